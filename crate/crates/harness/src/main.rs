use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nlrlda::asymptotics::AsymptoticConfig;
use nlrlda::io::{read_dataset, read_features};
use nlrlda::risk::{write_risk_csv, EhatVariant};
use nlrlda::synth::{make_population, sample_gaussian, trial_rng, CovKind, CovModel, Stream};
use nlrlda::{decide, train, GammaGrid, RiskConfig, TrainedModel};
use nlrlda_harness::config::expand_config_args;
use nlrlda_harness::experiments::write_asymptotic_report;
use nlrlda_harness::spec::{parse_c_convention, parse_methods};
use nlrlda_harness::{
    run_asymptotic, run_consistency_check, run_gamma_profile, run_montecarlo, ExperimentSpec, HarnessError, Result,
    Size,
};

#[derive(Parser)]
#[command(name = "nlrlda", version, about = "Nonlinear-precision RLDA: training, prediction and experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a classifier on a labelled CSV and save it.
    #[command(args_override_self = true)]
    Train(TrainArgs),
    /// Score and label the rows of a CSV with a saved model.
    #[command(args_override_self = true)]
    Predict(PredictArgs),
    /// Estimated error over the γ grid for a CSV or a synthetic sample.
    #[command(args_override_self = true)]
    Sweep(SweepArgs),
    /// Test error versus fixed γ for each method (default 500 trials).
    #[command(args_override_self = true)]
    Profile(ExperimentArgs),
    /// Test error versus n with γ tuned per trial (default 100 trials).
    #[command(args_override_self = true)]
    Montecarlo(ExperimentArgs),
    /// Estimated versus true error of the tuned classifier (default 100 trials).
    #[command(args_override_self = true)]
    Consistency(ExperimentArgs),
    /// Deterministic equivalents of the error over the γ grid.
    #[command(args_override_self = true)]
    Asymptotic(ExperimentArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Variant {
    /// `ê = t1/(1 − t1)`
    Appendix,
    /// `ê = t2/(1 − t1)`
    Theorem,
}

#[derive(Args)]
struct TuningArgs {
    /// `default` (10^-5 … 10^5 in half decades) or a comma-separated list.
    #[arg(long = "gamma-grid", default_value = "default")]
    gamma_grid: String,
    /// A single γ, replacing the grid.
    #[arg(long)]
    gamma: Option<f64>,
    /// Numerator of the trace estimate.
    #[arg(long = "theorem2-variant", value_enum, default_value = "appendix")]
    theorem2_variant: Variant,
}

impl TuningArgs {
    fn grid(&self) -> Result<GammaGrid> {
        Ok(match self.gamma {
            Some(g) => GammaGrid::single(g)?,
            None => self.gamma_grid.parse()?,
        })
    }

    fn risk(&self) -> RiskConfig {
        RiskConfig {
            e_hat: match self.theorem2_variant {
                Variant::Appendix => EhatVariant::TraceRatio,
                Variant::Theorem => EhatVariant::SecondTrace,
            },
            ..RiskConfig::default()
        }
    }
}

#[derive(Args)]
struct ScenarioArgs {
    /// Dimension, or a comma-separated list matching --n.
    #[arg(long, default_value = "100")]
    p: String,
    /// Training size, or a comma-separated list.
    #[arg(long, default_value = "50")]
    n: String,
    /// Explicit class-0 training count (with --n1; overrides --n and --pi0).
    #[arg(long)]
    n0: Option<usize>,
    #[arg(long)]
    n1: Option<usize>,
    /// Class-0 prior.
    #[arg(long, default_value_t = 0.5)]
    pi0: f64,
    /// Squared Mahalanobis distance between the class means.
    #[arg(long, default_value_t = 0.5)]
    nu2: f64,
    #[arg(long = "cov-model", default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=3))]
    cov_model: u8,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl ScenarioArgs {
    fn sizes(&self) -> Result<Vec<Size>> {
        let list = |s: &str, name: &str| -> Result<Vec<usize>> {
            s.split(',')
                .map(|t| {
                    t.trim()
                        .parse::<usize>()
                        .map_err(|_| HarnessError::Invalid(format!("--{name}: '{}' is not a count", t.trim())))
                })
                .collect()
        };
        let ps = list(&self.p, "p")?;
        if let (Some(n0), Some(n1)) = (self.n0, self.n1) {
            if ps.len() != 1 {
                return Err(HarnessError::Invalid("--n0/--n1 need a single --p".into()));
            }
            return Ok(vec![Size { p: ps[0], n0, n1 }]);
        }
        if self.n0.is_some() != self.n1.is_some() {
            return Err(HarnessError::Invalid("--n0 and --n1 must be given together".into()));
        }
        if !(self.pi0 > 0.0 && self.pi0 < 1.0) {
            return Err(HarnessError::Invalid(format!("--pi0 {} is outside (0, 1)", self.pi0)));
        }
        let ns = list(&self.n, "n")?;
        let ps = match (ps.len(), ns.len()) {
            (1, k) => vec![ps[0]; k],
            (a, b) if a == b => ps,
            (a, b) => return Err(HarnessError::Invalid(format!("--p has {a} values but --n has {b}"))),
        };
        Ok(ps.into_iter().zip(ns).map(|(p, n)| Size::from_prior(p, n, self.pi0)).collect())
    }

    fn cov_kind(&self) -> Result<CovKind> {
        Ok(CovKind::from_index(self.cov_model)?)
    }
}

#[derive(Args)]
struct ExperimentArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[command(flatten)]
    tuning: TuningArgs,
    #[arg(long)]
    trials: Option<usize>,
    /// Comma-separated subset of nl, linear-a, linear-b, linear-target, bayes.
    #[arg(long, default_value = "nl,linear-a,linear-b,bayes")]
    methods: String,
    /// Ratio p/n used by the deterministic equivalents.
    #[arg(long = "c-convention", default_value = "ntilde")]
    c_convention: String,
    /// Test points per trial (default max(10000 − n, 1000)).
    #[arg(long = "test-size")]
    test_size: Option<usize>,
    /// Worker threads, 0 for one per core.
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Output CSV (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

impl ExperimentArgs {
    fn spec(&self, default_trials: usize) -> Result<ExperimentSpec> {
        let spec = ExperimentSpec {
            cov_model: self.scenario.cov_kind()?,
            sizes: self.scenario.sizes()?,
            nu_sq: self.scenario.nu2,
            trials: self.trials.unwrap_or(default_trials),
            seed: self.scenario.seed,
            test_size: self.test_size,
            methods: parse_methods(&self.methods)?,
            grid: self.tuning.grid()?,
            risk: self.tuning.risk(),
            asymptotic: AsymptoticConfig {
                c: parse_c_convention(&self.c_convention)?,
                ..AsymptoticConfig::default()
            },
            threads: self.threads,
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Args)]
struct TrainArgs {
    /// Labelled training CSV.
    #[arg(long)]
    data: PathBuf,
    /// Where to write the model.
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    tuning: TuningArgs,
}

#[derive(Args)]
struct PredictArgs {
    /// CSV of feature rows; a label column is ignored.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    model: PathBuf,
    /// Output CSV with columns row, score, label (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Labelled CSV; without it a synthetic training set is drawn.
    #[arg(long)]
    data: Option<PathBuf>,
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[command(flatten)]
    tuning: TuningArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| {
            HarnessError::Invalid(format!("cannot create {}: {e}", p.display()))
        })?)),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn cmd_train(args: &TrainArgs) -> Result<()> {
    let data = read_dataset(&args.data)?.data;
    let model = train(&data, &args.tuning.grid()?, args.tuning.risk())?;
    model.save(&args.model)?;
    if model.degenerate {
        return Err(HarnessError::Degenerate(
            "the risk estimate is undefined at every grid point; saved the prior-only classifier".into(),
        ));
    }
    eprintln!(
        "gamma*={:e} eps_hat={} n0={} n1={}",
        model.gamma_star.gamma(),
        model.selected_risk().map_or_else(|| "NA".into(), |e| e.to_string()),
        model.n0,
        model.n1
    );
    Ok(())
}

fn cmd_predict(args: &PredictArgs) -> Result<()> {
    let model = TrainedModel::load(&args.model)?;
    let (_, x) = read_features(&args.data)?;
    let scores = model.scores(&x)?;
    let mut out = output(args.out.as_deref())?;
    writeln!(out, "row,score,label")?;
    for (i, w) in scores.iter().enumerate() {
        writeln!(out, "{i},{w},{}", decide(*w, model.tau_hat))?;
    }
    out.flush()?;
    Ok(())
}

fn cmd_sweep(args: &SweepArgs) -> Result<()> {
    let data = match &args.data {
        Some(path) => read_dataset(path)?.data,
        None => {
            let sizes = args.scenario.sizes()?;
            let [size] = sizes.as_slice() else {
                return Err(HarnessError::Invalid("sweep takes a single (p, n)".into()));
            };
            let pop = make_population(CovModel { kind: args.scenario.cov_kind()?, p: size.p }, args.scenario.nu2)?;
            sample_gaussian(&pop, size.n0, size.n1, &mut trial_rng(args.scenario.seed, 0, Stream::Train))?
        }
    };
    let model = train(&data, &args.tuning.grid()?, args.tuning.risk())?;
    write_risk_csv(&model.risk_curve, output(args.out.as_deref())?)?;
    if model.degenerate {
        return Err(HarnessError::Degenerate("the risk estimate is undefined at every grid point".into()));
    }
    Ok(())
}

fn histogram_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map_or_else(|| "consistency".into(), |s| s.to_string_lossy().into_owned());
    out.with_file_name(format!("{stem}_gamma_hist.csv"))
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Profile(a) => run_gamma_profile(&a.spec(500)?)?.write_csv(output(a.out.as_deref())?),
        Command::Montecarlo(a) => run_montecarlo(&a.spec(100)?)?.write_csv(output(a.out.as_deref())?),
        Command::Consistency(a) => {
            let report = run_consistency_check(&a.spec(100)?)?;
            report.write_csv(output(a.out.as_deref())?)?;
            match &a.out {
                Some(path) => report.write_histogram_csv(output(Some(&histogram_path(path)))?),
                None => report.write_histogram_csv(output(None)?),
            }
        }
        Command::Asymptotic(a) => {
            let spec = a.spec(1)?;
            let start = Instant::now();
            let rows = run_asymptotic(&spec)?;
            write_asymptotic_report(&spec, &rows, start.elapsed(), output(a.out.as_deref())?)
        }
    }
}

fn main() -> ExitCode {
    let args = match expand_config_args(std::env::args().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        // downstream closed the pipe (e.g. `| head`)
        Err(HarnessError::Io(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
