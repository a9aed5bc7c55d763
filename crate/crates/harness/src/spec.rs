//! Experiment descriptions and their content hash.

use std::fmt;
use std::str::FromStr;

use nlrlda::asymptotics::{AsymptoticConfig, CConvention};
use nlrlda::synth::{split_counts, CovKind};
use nlrlda::{GammaGrid, RiskConfig};
use sha2::{Digest, Sha256};

use crate::error::HarnessError;

/// A discriminant compared in the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    NL,
    LinearA,
    LinearB,
    LinearTarget,
    Bayes,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::NL, Method::LinearA, Method::LinearB, Method::LinearTarget, Method::Bayes];

    pub fn name(self) -> &'static str {
        match self {
            Method::NL => "nl",
            Method::LinearA => "linear-a",
            Method::LinearB => "linear-b",
            Method::LinearTarget => "linear-target",
            Method::Bayes => "bayes",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim().to_ascii_lowercase().replace('_', "-");
        Method::ALL
            .into_iter()
            .find(|m| m.name() == key || (key == "linear" && *m == Method::LinearA))
            .ok_or_else(|| HarnessError::Invalid(format!("unknown method '{}'", s.trim())))
    }
}

/// Comma-separated method list, e.g. `nl,linear-a,bayes`.
pub fn parse_methods(s: &str) -> Result<Vec<Method>, HarnessError> {
    let mut methods = s.split(',').map(str::parse).collect::<Result<Vec<Method>, _>>()?;
    methods.sort();
    methods.dedup();
    if methods.is_empty() {
        return Err(HarnessError::Invalid("at least one method is required".into()));
    }
    Ok(methods)
}

/// Dimension and per-class training counts of one experiment point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Size {
    pub p: usize,
    pub n0: usize,
    pub n1: usize,
}

impl Size {
    pub fn from_prior(p: usize, n: usize, pi0: f64) -> Self {
        let (n0, n1) = split_counts(n, pi0);
        Self { p, n0, n1 }
    }

    pub fn n(&self) -> usize {
        self.n0 + self.n1
    }

    /// Held-out test counts: `max(10000 − n, 1000)` points unless overridden,
    /// split with the training proportions.
    pub fn test_counts(&self, test_size: Option<usize>) -> (usize, usize) {
        let total = test_size.unwrap_or_else(|| 10_000usize.saturating_sub(self.n()).max(1000));
        split_counts(total, self.n0 as f64 / self.n() as f64)
    }
}

/// Everything that determines the numbers an experiment reports.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub cov_model: CovKind,
    pub sizes: Vec<Size>,
    pub nu_sq: f64,
    pub trials: usize,
    pub seed: u64,
    pub test_size: Option<usize>,
    pub methods: Vec<Method>,
    pub grid: GammaGrid,
    pub risk: RiskConfig,
    pub asymptotic: AsymptoticConfig,
    /// Worker threads, 0 for one per core. Does not affect results.
    pub threads: usize,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.methods.is_empty() {
            return Err(HarnessError::Invalid("at least one method is required".into()));
        }
        if self.sizes.is_empty() {
            return Err(HarnessError::Invalid("no (p, n) configuration given".into()));
        }
        if self.trials == 0 {
            return Err(HarnessError::Invalid("trials must be at least 1".into()));
        }
        if !(self.nu_sq > 0.0 && self.nu_sq.is_finite()) {
            return Err(HarnessError::Invalid(format!("nu2 = {} must be positive", self.nu_sq)));
        }
        for s in &self.sizes {
            if s.p < 2 {
                return Err(HarnessError::Invalid(format!("p = {} is below 2", s.p)));
            }
            if s.n0 < 2 || s.n1 < 2 {
                return Err(HarnessError::Invalid(format!(
                    "class counts ({}, {}) need at least 2 samples each",
                    s.n0, s.n1
                )));
            }
        }
        if self.test_size == Some(0) {
            return Err(HarnessError::Invalid("test size must be positive".into()));
        }
        Ok(())
    }

    fn canonical(&self) -> String {
        let sizes: Vec<String> = self.sizes.iter().map(|s| format!("{}x{}+{}", s.p, s.n0, s.n1)).collect();
        let methods: Vec<&str> = self.methods.iter().map(|m| m.name()).collect();
        format!(
            "cov_model={};sizes={};nu2={:e};trials={};seed={};test_size={:?};methods={};grid={};e_hat={:?};d_c={:?};bias={:?};eta={:?};c={:?}",
            self.cov_model.index(),
            sizes.join(","),
            self.nu_sq,
            self.trials,
            self.seed,
            self.test_size,
            methods.join(","),
            self.grid,
            self.risk.e_hat,
            self.risk.d_c,
            self.risk.bias,
            self.asymptotic.eta,
            self.asymptotic.c,
        )
    }

    /// SHA-256 of every result-determining field (thread count excluded).
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }
}

pub fn parse_c_convention(s: &str) -> Result<CConvention, HarnessError> {
    match s.trim().to_ascii_lowercase().as_str() {
        "ntilde" => Ok(CConvention::NTilde),
        "n" => Ok(CConvention::N),
        other => Err(HarnessError::Invalid(format!("c convention '{other}' is not 'ntilde' or 'n'"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> ExperimentSpec {
        ExperimentSpec {
            cov_model: CovKind::Model1,
            sizes: vec![Size::from_prior(10, 20, 0.5)],
            nu_sq: 1.0,
            trials: 3,
            seed: 1,
            test_size: None,
            methods: vec![Method::NL],
            grid: GammaGrid::default(),
            risk: RiskConfig::default(),
            asymptotic: AsymptoticConfig::default(),
            threads: 1,
        }
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert_eq!(parse_methods("bayes, NL,nl").unwrap(), vec![Method::NL, Method::Bayes]);
        assert!(parse_methods("nl,qda").is_err());
    }

    #[test]
    fn hash_tracks_results_not_threads() {
        let a = spec();
        assert_eq!(a.hash(), ExperimentSpec { threads: 4, ..a.clone() }.hash());
        assert_ne!(a.hash(), ExperimentSpec { seed: 2, ..a.clone() }.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn default_test_counts() {
        let s = Size::from_prior(100, 50, 0.5);
        assert_eq!(s.test_counts(None), (4975, 4975));
        assert_eq!(Size { p: 5, n0: 3, n1: 7 }.test_counts(Some(100)), (30, 70));
    }
}
