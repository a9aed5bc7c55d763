//! Seeded Monte Carlo experiments on synthetic Gaussian populations.
//!
//! Trial `t` of configuration `k` draws its training set from stream
//! `(seed, k·2³² + t, Train)` and its test set from the matching `Test`
//! stream, so each trial is reproducible on its own and the worker count
//! never changes the numbers.

use std::sync::Arc;
use std::time::Instant;

use nlrlda::asymptotics::{AsymptoticModel, DeterministicRisk};
use nlrlda::precision::{precision_from_eig, PrecisionKind, TargetBasis};
use nlrlda::synth::{make_population, trial_rng, CovModel, GaussianSampler, SqrtRoute, Stream};
use nlrlda::{
    batch_scores, bayes_scores, decide, log_ratio, nl_precision, normal_cdf, oracle_conditional_error, pooled_covariance,
    predict, sym_eig, train_from_eig, ClassStats, Error as CoreError, LabeledDataset, PopulationModel,
    PrecisionOperator, RegParam, SymEig,
};

use crate::error::Result;
use crate::parallel::{map_trials, Moments};
use crate::report::{Axis, ConsistencyReport, ConsistencyRow, ErrorReport, ErrorRow, ReportMeta};
use crate::spec::{ExperimentSpec, Method, Size};

/// Selected `γ` values counted as "in range" by the consistency check.
pub const GAMMA_RANGE: (f64, f64) = (3.1622776601683795, 1e5);

fn stream_id(config: usize, trial: usize) -> u64 {
    ((config as u64) << 32) | trial as u64
}

struct Setting {
    size: Size,
    pop: PopulationModel,
    sampler: GaussianSampler,
    test: (usize, usize),
}

impl Setting {
    fn new(spec: &ExperimentSpec, size: Size) -> Result<Self> {
        let pop = make_population(CovModel { kind: spec.cov_model, p: size.p }, spec.nu_sq)?;
        let sampler = GaussianSampler::new(pop.clone(), SqrtRoute::Cholesky)?;
        Ok(Self {
            size,
            pop,
            sampler,
            test: size.test_counts(spec.test_size),
        })
    }

    fn draw(&self, seed: u64, id: u64) -> Result<(LabeledDataset, LabeledDataset)> {
        let train = self
            .sampler
            .sample(self.size.n0, self.size.n1, &mut trial_rng(seed, id, Stream::Train))?;
        let test = self.sampler.sample(self.test.0, self.test.1, &mut trial_rng(seed, id, Stream::Test))?;
        Ok((train, test))
    }

    /// Error of the Bayes rule with the true population and priors: empirical
    /// on `test`, and exact.
    fn bayes(&self, test: &LabeledDataset) -> Result<(f64, f64)> {
        let tau = log_ratio(self.size.n0, self.size.n1);
        let labels: Vec<u8> = bayes_scores(test.features(), &self.pop)?
            .into_iter()
            .map(|w| decide(w, tau))
            .collect();
        let nu = self.pop.nu_sq().sqrt();
        let pi0 = self.size.n0 as f64 / self.size.n() as f64;
        let exact = pi0 * normal_cdf((-0.5 * nu * nu + tau) / nu) + (1.0 - pi0) * normal_cdf((-0.5 * nu * nu - tau) / nu);
        Ok((error_rate(test.labels(), &labels), exact))
    }
}

pub fn error_rate(truth: &[u8], predicted: &[u8]) -> f64 {
    let wrong = truth.iter().zip(predicted).filter(|(a, b)| a != b).count();
    wrong as f64 / truth.len() as f64
}

/// Per-trial factorizations shared by every `γ`.
struct Fitted {
    stats: ClassStats,
    eig: Arc<SymEig>,
    target: Option<TargetBasis>,
}

impl Fitted {
    fn new(train: &LabeledDataset, with_target: bool) -> Result<Self> {
        let stats = pooled_covariance(train)?;
        let eig = Arc::new(sym_eig(&stats.s)?);
        let target = if with_target {
            Some(TargetBasis::new(&stats.s, None)?)
        } else {
            None
        };
        Ok(Self { stats, eig, target })
    }

    /// The estimator of `method` at `γ`, `None` when `γ` is outside its domain.
    fn operator(&self, method: Method, gamma: f64) -> Result<Option<PrecisionOperator>> {
        let h = match method {
            Method::NL => nl_precision(Arc::clone(&self.eig), RegParam::new(gamma)?),
            Method::LinearA => precision_from_eig(Arc::clone(&self.eig), gamma, PrecisionKind::LinearA)?,
            Method::LinearB => precision_from_eig(Arc::clone(&self.eig), gamma, PrecisionKind::LinearB)?,
            Method::LinearTarget => {
                if !(gamma > 0.0 && gamma < 1.0) {
                    return Ok(None);
                }
                self.target.as_ref().expect("target basis built").operator(gamma)?
            }
            Method::Bayes => unreachable!("the Bayes rule has no precision estimate"),
        };
        Ok(Some(h))
    }

    /// Empirical and oracle error of `h`; `None` when `D` degenerates.
    fn evaluate(&self, h: &PrecisionOperator, pop: &PopulationModel, test: &LabeledDataset) -> Result<Option<(f64, f64)>> {
        let oracle = match oracle_conditional_error(pop, &self.stats, h) {
            Ok(ce) => ce.eps,
            Err(CoreError::DegenerateD { .. }) => return Ok(None),
            Err(e) => return Err(e.into()),
        };
        let tau = self.stats.tau_hat();
        let labels: Vec<u8> = batch_scores(test.features(), &self.stats.m0, &self.stats.m1, h)?
            .into_iter()
            .map(|w| decide(w, tau))
            .collect();
        Ok(Some((error_rate(test.labels(), &labels), oracle)))
    }
}

#[derive(Default, Clone)]
struct Cell {
    empirical: Moments,
    oracle: Moments,
    degenerate: usize,
}

impl Cell {
    fn push(&mut self, v: Option<(f64, f64)>) {
        match v {
            Some((e, o)) => {
                self.empirical.push(e);
                self.oracle.push(o);
            }
            None => self.degenerate += 1,
        }
    }

    fn row(&self, method: Method, p: usize, x: f64) -> ErrorRow {
        ErrorRow {
            method,
            p,
            x,
            mean_error: self.empirical.mean(),
            std_error: self.empirical.std_error(),
            oracle_error: self.oracle.mean(),
            trials: self.empirical.count,
            degenerate: self.degenerate,
        }
    }
}

fn collect<T>(results: Vec<Result<T>>) -> Result<Vec<T>> {
    results.into_iter().collect()
}

/// Test error of every method at every fixed `γ` of the grid, averaged over
/// trials at the first configured `(p, n)`. `LinearTarget` is only evaluated
/// for `γ ∈ (0, 1)`; the Bayes rule is repeated on every row.
pub fn run_gamma_profile(spec: &ExperimentSpec) -> Result<ErrorReport> {
    spec.validate()?;
    let start = Instant::now();
    let setting = Setting::new(spec, spec.sizes[0])?;
    let grid = spec.grid.values();
    let with_target = spec.methods.contains(&Method::LinearTarget);

    let records = collect(map_trials(spec.threads, spec.trials, |t| -> Result<Vec<Vec<Option<Option<(f64, f64)>>>>> {
        let (train, test) = setting.draw(spec.seed, stream_id(0, t))?;
        let fitted = Fitted::new(&train, with_target)?;
        let mut per_method = Vec::with_capacity(spec.methods.len());
        for &method in &spec.methods {
            let cells = if method == Method::Bayes {
                let b = setting.bayes(&test)?;
                vec![Some(Some(b)); grid.len()]
            } else {
                let mut cells = Vec::with_capacity(grid.len());
                for &g in grid {
                    cells.push(match fitted.operator(method, g)? {
                        Some(h) => Some(fitted.evaluate(&h, &setting.pop, &test)?),
                        None => None,
                    });
                }
                cells
            };
            per_method.push(cells);
        }
        Ok(per_method)
    })?)?;

    let mut rows = Vec::new();
    for (mi, &method) in spec.methods.iter().enumerate() {
        for (gi, &g) in grid.iter().enumerate() {
            let mut cell = Cell::default();
            let mut defined = false;
            for rec in &records {
                if let Some(v) = rec[mi][gi] {
                    defined = true;
                    cell.push(v);
                }
            }
            if defined {
                rows.push(cell.row(method, setting.size.p, g));
            }
        }
    }
    Ok(ErrorReport {
        meta: ReportMeta::of(spec),
        axis: Axis::Gamma,
        rows,
        wall_clock: start.elapsed(),
    })
}

/// Full training per configured `(p, n)`: the nonlinear estimator picks `γ`
/// by minimizing `ε̂` over the grid; each linear estimator uses the grid value
/// with the smallest conditional error under the true population (a best-case
/// benchmark); the Bayes rule uses the true parameters.
pub fn run_montecarlo(spec: &ExperimentSpec) -> Result<ErrorReport> {
    spec.validate()?;
    let start = Instant::now();
    let grid = spec.grid.values();
    let with_target = spec.methods.contains(&Method::LinearTarget);
    let mut rows = Vec::new();
    for (k, &size) in spec.sizes.iter().enumerate() {
        let setting = Setting::new(spec, size)?;
        let records = collect(map_trials(spec.threads, spec.trials, |t| -> Result<Vec<Option<(f64, f64)>>> {
            let (train, test) = setting.draw(spec.seed, stream_id(k, t))?;
            let fitted = Fitted::new(&train, with_target)?;
            let mut out = Vec::with_capacity(spec.methods.len());
            for &method in &spec.methods {
                let v = match method {
                    Method::Bayes => Some(setting.bayes(&test)?),
                    Method::NL => {
                        let model = train_from_eig(&fitted.stats, Arc::clone(&fitted.eig), &spec.grid, spec.risk)?;
                        if model.degenerate {
                            None
                        } else {
                            fitted.evaluate(&model.h, &setting.pop, &test)?
                        }
                    }
                    _ => {
                        let mut best: Option<(f64, PrecisionOperator)> = None;
                        for &g in grid {
                            let Some(h) = fitted.operator(method, g)? else { continue };
                            match oracle_conditional_error(&setting.pop, &fitted.stats, &h) {
                                Ok(ce) if best.as_ref().is_none_or(|(b, _)| ce.eps < *b) => best = Some((ce.eps, h)),
                                Ok(_) | Err(CoreError::DegenerateD { .. }) => {}
                                Err(e) => return Err(e.into()),
                            }
                        }
                        match best {
                            Some((_, h)) => fitted.evaluate(&h, &setting.pop, &test)?,
                            None => None,
                        }
                    }
                };
                out.push(v);
            }
            Ok(out)
        })?)?;
        for (mi, &method) in spec.methods.iter().enumerate() {
            let mut cell = Cell::default();
            for rec in &records {
                cell.push(rec[mi]);
            }
            rows.push(cell.row(method, size.p, size.n() as f64));
        }
    }
    Ok(ErrorReport {
        meta: ReportMeta::of(spec),
        axis: Axis::N,
        rows,
        wall_clock: start.elapsed(),
    })
}

struct ConsistencyTrial {
    eps_hat: f64,
    oracle: f64,
    holdout: f64,
    gamma_index: usize,
}

fn in_range(gamma: f64) -> bool {
    let slack = 1e-12;
    gamma >= GAMMA_RANGE.0 * (1.0 - slack) && gamma <= GAMMA_RANGE.1 * (1.0 + slack)
}

/// The estimate `ε̂(γ*)` of the trained nonlinear classifier against its
/// conditional error under the true population and against hold-out error,
/// per configured `(p, n)`, with a histogram of the selected `γ`.
pub fn run_consistency_check(spec: &ExperimentSpec) -> Result<ConsistencyReport> {
    spec.validate()?;
    let start = Instant::now();
    let grid = spec.grid.values();
    let mut rows = Vec::new();
    let mut histogram = Vec::new();
    for (k, &size) in spec.sizes.iter().enumerate() {
        let setting = Setting::new(spec, size)?;
        let records = collect(map_trials(spec.threads, spec.trials, |t| -> Result<Option<ConsistencyTrial>> {
            let (train, test) = setting.draw(spec.seed, stream_id(k, t))?;
            let fitted = Fitted::new(&train, false)?;
            let model = train_from_eig(&fitted.stats, Arc::clone(&fitted.eig), &spec.grid, spec.risk)?;
            let Some(eps_hat) = model.selected_risk().filter(|_| !model.degenerate) else {
                return Ok(None);
            };
            let oracle = match model.conditional_error(&setting.pop) {
                Ok(ce) => ce.eps,
                Err(CoreError::DegenerateD { .. }) => return Ok(None),
                Err(e) => return Err(e.into()),
            };
            let holdout = error_rate(test.labels(), &predict(&model, test.features())?);
            let gamma_index = grid
                .iter()
                .position(|&g| g == model.gamma_star.gamma())
                .expect("selected from the grid");
            Ok(Some(ConsistencyTrial {
                eps_hat,
                oracle,
                holdout,
                gamma_index,
            }))
        })?)?;

        let (mut dev_o, mut dev_h) = (Moments::default(), Moments::default());
        let (mut est, mut ora, mut hold) = (Moments::default(), Moments::default(), Moments::default());
        let mut counts = vec![0usize; grid.len()];
        let mut degenerate = 0;
        for r in &records {
            match r {
                Some(r) => {
                    dev_o.push((r.eps_hat - r.oracle).abs());
                    dev_h.push((r.eps_hat - r.holdout).abs());
                    est.push(r.eps_hat);
                    ora.push(r.oracle);
                    hold.push(r.holdout);
                    counts[r.gamma_index] += 1;
                }
                None => degenerate += 1,
            }
        }
        let averaged = dev_o.count;
        let hits: usize = grid.iter().zip(&counts).filter(|(g, _)| in_range(**g)).map(|(_, c)| c).sum();
        rows.push(ConsistencyRow {
            p: size.p,
            n: size.n(),
            dev_oracle: dev_o.mean(),
            dev_oracle_se: dev_o.std_error(),
            dev_holdout: dev_h.mean(),
            dev_holdout_se: dev_h.std_error(),
            mean_eps_hat: est.mean(),
            mean_oracle: ora.mean(),
            mean_holdout: hold.mean(),
            gamma_in_range: (averaged > 0).then(|| hits as f64 / averaged as f64),
            trials: averaged,
            degenerate,
        });
        histogram.extend(grid.iter().zip(&counts).map(|(&g, &c)| (size.p, size.n(), g, c)));
    }
    Ok(ConsistencyReport {
        meta: ReportMeta::of(spec),
        rows,
        histogram,
        wall_clock: start.elapsed(),
    })
}

/// Deterministic equivalents over the grid for the first configured `(p, n)`.
pub fn run_asymptotic(spec: &ExperimentSpec) -> Result<Vec<DeterministicRisk>> {
    spec.validate()?;
    let size = spec.sizes[0];
    let pop = make_population(CovModel { kind: spec.cov_model, p: size.p }, spec.nu_sq)?;
    let model = AsymptoticModel::new(&pop, size.n0, size.n1, spec.asymptotic)?;
    let rows = collect(map_trials(spec.threads, spec.grid.len(), |i| {
        model.deterministic_risk(spec.grid.values()[i]).map_err(Into::into)
    })?)?;
    Ok(rows)
}

/// Writes the asymptotic table with the same header and footer as the other reports.
pub fn write_asymptotic_report<W: std::io::Write>(
    spec: &ExperimentSpec,
    rows: &[DeterministicRisk],
    wall_clock: std::time::Duration,
    mut out: W,
) -> Result<()> {
    let meta = ReportMeta::of(spec);
    writeln!(out, "# spec_hash={} seed={} grid={}", meta.spec_hash, meta.seed, meta.grid)?;
    nlrlda::asymptotics::write_asymptotic_csv(rows, &mut out)?;
    writeln!(out, "{}{:.3}", crate::report::WALL_CLOCK_PREFIX, wall_clock.as_secs_f64())?;
    out.flush()?;
    Ok(())
}
