//! Experiment orchestration for `nlrlda`: fixed-`γ` error profiles, per-`n`
//! Monte Carlo sweeps, checks of the risk estimate against the truth, and
//! deterministic-equivalent tables, all written as CSV.

pub mod config;
pub mod error;
pub mod experiments;
pub mod parallel;
pub mod report;
pub mod spec;

pub use error::{HarnessError, Result};
pub use experiments::{run_asymptotic, run_consistency_check, run_gamma_profile, run_montecarlo};
pub use report::{ConsistencyReport, ErrorReport};
pub use spec::{ExperimentSpec, Method, Size};
