//! Regularized linear discriminant analysis with the nonlinear precision
//! estimator `S(S+γI)⁻²`, tuned by minimizing a consistent estimate of its
//! misclassification rate.
//!
//! * [`stats`]: datasets, class moments, pooled covariance, eigendecomposition
//! * [`precision`]: the nonlinear and linear ridge precision estimators
//! * [`risk`]: the data-only error estimate and the normal CDF
//! * [`classifier`]: scores, decision rule, training and prediction
//! * [`asymptotics`]: deterministic equivalents for known populations
//! * [`synth`]: synthetic covariance models and seeded samplers

pub mod asymptotics;
pub mod classifier;
pub mod error;
pub mod io;
pub mod precision;
pub mod risk;
pub mod stats;
pub mod synth;

pub use classifier::{
    batch_scores, bayes_score, bayes_scores, decide, oracle_conditional_error, oracle_d, oracle_g, predict, score, score_quadratic, train, train_from_eig, train_from_stats,
    ConditionalError, GammaGrid, TrainedModel,
};
pub use error::{Error, Result};
pub use precision::{
    contribution_ratios, filter_coeff, nl_precision, ridge_precision, Filter, PrecisionKind, PrecisionOperator,
    RegParam,
};
pub use risk::{normal_cdf, BiasScale, ConsistentRisk, DcForm, EhatVariant, RiskConfig, ResolventStats};
pub use stats::{
    calibrate_mean_scale, log_ratio, mahalanobis, pooled_covariance, sample_means, sym_eig, ClassStats, LabeledDataset,
    PopulationModel, SymEig,
};
