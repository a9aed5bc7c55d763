//! CSV reports. Each file starts with `# spec_hash=… seed=… grid=…` and ends
//! with a `# wall_clock_s=…` line; everything in between is a deterministic
//! function of the experiment settings.

use std::io::Write;
use std::time::Duration;

use crate::error::Result;
use crate::spec::{ExperimentSpec, Method};

pub const WALL_CLOCK_PREFIX: &str = "# wall_clock_s=";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportMeta {
    pub spec_hash: String,
    pub seed: u64,
    pub grid: String,
}

impl ReportMeta {
    pub fn of(spec: &ExperimentSpec) -> Self {
        Self {
            spec_hash: spec.hash(),
            seed: spec.seed,
            grid: spec.grid.to_string(),
        }
    }

    fn write_header<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "# spec_hash={} seed={} grid={}", self.spec_hash, self.seed, self.grid)
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

fn write_footer<W: Write>(out: &mut W, wall_clock: Duration) -> std::io::Result<()> {
    writeln!(out, "{WALL_CLOCK_PREFIX}{:.3}", wall_clock.as_secs_f64())
}

/// Drops the wall-clock line, leaving the deterministic part of a report.
pub fn strip_wall_clock(csv: &str) -> String {
    csv.lines()
        .filter(|l| !l.starts_with(WALL_CLOCK_PREFIX))
        .map(|l| format!("{l}\n"))
        .collect()
}

/// What the report rows are indexed by.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Gamma,
    N,
}

/// One method at one `γ` (or one `n`).
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRow {
    pub method: Method,
    pub p: usize,
    pub x: f64,
    /// Mean empirical test error over non-degenerate trials.
    pub mean_error: Option<f64>,
    pub std_error: Option<f64>,
    /// Mean conditional error under the true population.
    pub oracle_error: Option<f64>,
    /// Trials averaged in.
    pub trials: usize,
    pub degenerate: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub meta: ReportMeta,
    pub axis: Axis,
    pub rows: Vec<ErrorRow>,
    pub wall_clock: Duration,
}

impl ErrorReport {
    pub fn rows_for(&self, method: Method) -> impl Iterator<Item = &ErrorRow> {
        self.rows.iter().filter(move |r| r.method == method)
    }

    /// Smallest mean error of `method` over the axis.
    pub fn min_error(&self, method: Method) -> Option<(f64, f64)> {
        self.rows_for(method)
            .filter_map(|r| r.mean_error.map(|e| (r.x, e)))
            .fold(None, |best, (x, e)| match best {
                Some((_, b)) if b <= e => best,
                _ => Some((x, e)),
            })
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        self.meta.write_header(&mut out)?;
        let axis = match self.axis {
            Axis::Gamma => "gamma",
            Axis::N => "n",
        };
        writeln!(out, "method,p,{axis},mean_error,std_error,oracle_error,trials,degenerate")?;
        for r in &self.rows {
            let x = match self.axis {
                Axis::Gamma => format!("{:e}", r.x),
                Axis::N => format!("{}", r.x),
            };
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.method,
                r.p,
                x,
                opt(r.mean_error),
                opt(r.std_error),
                opt(r.oracle_error),
                r.trials,
                r.degenerate
            )?;
        }
        write_footer(&mut out, self.wall_clock)?;
        out.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("reports are ASCII")
    }
}

/// Estimate-versus-truth summary at one `(p, n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyRow {
    pub p: usize,
    pub n: usize,
    /// Mean `|ε̂(γ*) − ε|` with `ε` the conditional error under the true population.
    pub dev_oracle: Option<f64>,
    pub dev_oracle_se: Option<f64>,
    /// Mean `|ε̂(γ*) − hold-out error|`.
    pub dev_holdout: Option<f64>,
    pub dev_holdout_se: Option<f64>,
    pub mean_eps_hat: Option<f64>,
    pub mean_oracle: Option<f64>,
    pub mean_holdout: Option<f64>,
    /// Share of selected `γ` in `[10^0.5, 10^5]`.
    pub gamma_in_range: Option<f64>,
    pub trials: usize,
    pub degenerate: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyReport {
    pub meta: ReportMeta,
    pub rows: Vec<ConsistencyRow>,
    /// `(p, n, γ, times selected)` for every grid value.
    pub histogram: Vec<(usize, usize, f64, usize)>,
    pub wall_clock: Duration,
}

impl ConsistencyReport {
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        self.meta.write_header(&mut out)?;
        writeln!(
            out,
            "p,n,dev_oracle,dev_oracle_se,dev_holdout,dev_holdout_se,mean_eps_hat,mean_oracle,mean_holdout,gamma_in_range,trials,degenerate"
        )?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                r.p,
                r.n,
                opt(r.dev_oracle),
                opt(r.dev_oracle_se),
                opt(r.dev_holdout),
                opt(r.dev_holdout_se),
                opt(r.mean_eps_hat),
                opt(r.mean_oracle),
                opt(r.mean_holdout),
                opt(r.gamma_in_range),
                r.trials,
                r.degenerate
            )?;
        }
        write_footer(&mut out, self.wall_clock)?;
        out.flush()?;
        Ok(())
    }

    pub fn write_histogram_csv<W: Write>(&self, mut out: W) -> Result<()> {
        self.meta.write_header(&mut out)?;
        writeln!(out, "p,n,gamma,count")?;
        for (p, n, g, c) in &self.histogram {
            writeln!(out, "{p},{n},{g:e},{c}")?;
        }
        write_footer(&mut out, self.wall_clock)?;
        out.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("reports are ASCII")
    }
}
