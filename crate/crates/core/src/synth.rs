//! Synthetic Gaussian populations and seeded samplers.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::stats::{calibrate_mean_scale, sym_eig, LabeledDataset, PopulationModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CovKind {
    /// `0.9I + 0.1·11ᵀ`
    Model1,
    /// `0.9^|i−j|`
    Model2,
    /// Banded: `0.9` for `|i−j| ∈ 1..=4`, `0.3` for `|i−j| ∈ 5..=9`.
    Model3,
}

impl CovKind {
    pub fn from_index(i: u8) -> Result<Self> {
        match i {
            1 => Ok(Self::Model1),
            2 => Ok(Self::Model2),
            3 => Ok(Self::Model3),
            other => Err(Error::InvalidArgument(format!("covariance model {other} is not 1, 2 or 3"))),
        }
    }

    pub fn index(self) -> u8 {
        match self {
            Self::Model1 => 1,
            Self::Model2 => 2,
            Self::Model3 => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CovModel {
    pub kind: CovKind,
    pub p: usize,
}

fn entry(kind: CovKind, i: usize, j: usize) -> f64 {
    let d = i.abs_diff(j);
    if d == 0 {
        return 1.0;
    }
    match kind {
        CovKind::Model1 => 0.1,
        CovKind::Model2 => 0.9f64.powi(d as i32),
        CovKind::Model3 => match d {
            1..=4 => 0.9,
            5..=9 => 0.3,
            _ => 0.0,
        },
    }
}

/// The covariance of a model; fails when it is not positive definite.
pub fn build_cov(model: CovModel) -> Result<DMatrix<f64>> {
    if model.p < 2 {
        return Err(Error::InvalidArgument(format!("dimension {} is below 2", model.p)));
    }
    let sigma = DMatrix::from_fn(model.p, model.p, |i, j| entry(model.kind, i, j));
    if Cholesky::new(sigma.clone()).is_none() {
        return Err(Error::NotPositiveDefinite { p: model.p });
    }
    Ok(sigma)
}

/// `μ0 = k·1`, `μ1 = −μ0`, with `k` set so the squared Mahalanobis distance is `nu_sq`.
pub fn make_population(model: CovModel, nu_sq: f64) -> Result<PopulationModel> {
    let sigma = build_cov(model)?;
    let k = calibrate_mean_scale(&sigma, nu_sq)?;
    let mu0 = DVector::from_element(model.p, k);
    let mu1 = -&mu0;
    PopulationModel::new(mu0, mu1, sigma)
}

/// One synthetic experiment setting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioConfig {
    pub model: CovModel,
    pub n: usize,
    pub pi0: f64,
    pub nu_sq: f64,
    pub trials: usize,
    pub seed: u64,
    pub test_size: usize,
}

impl ScenarioConfig {
    pub fn p(&self) -> usize {
        self.model.p
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.pi0 > 0.0 && self.pi0 < 1.0) {
            return Err(Error::InvalidArgument(format!("pi0 = {} is outside (0, 1)", self.pi0)));
        }
        let (n0, n1) = self.class_counts();
        if n0 < 2 || n1 < 2 {
            return Err(Error::InvalidArgument(format!(
                "n = {} with pi0 = {} gives class counts ({n0}, {n1}); both must be at least 2",
                self.n, self.pi0
            )));
        }
        if self.trials == 0 {
            return Err(Error::InvalidArgument("trials must be at least 1".into()));
        }
        if !(self.nu_sq > 0.0 && self.nu_sq.is_finite()) {
            return Err(Error::InvalidArgument(format!("nu2 = {} must be positive", self.nu_sq)));
        }
        Ok(())
    }

    /// `n0 = round(n·π0)`, `n1 = n − n0`.
    pub fn class_counts(&self) -> (usize, usize) {
        split_counts(self.n, self.pi0)
    }

    pub fn test_counts(&self) -> (usize, usize) {
        split_counts(self.test_size, self.pi0)
    }
}

pub fn split_counts(n: usize, pi0: f64) -> (usize, usize) {
    let n0 = ((n as f64) * pi0).round().clamp(0.0, n as f64) as usize;
    (n0, n - n0)
}

/// Independent random streams within one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Train = 0,
    Test = 1,
}

/// Generator for stream `(seed, trial, purpose)`. The seed is expanded into a
/// ChaCha key and the pair `(trial, purpose)` selects one of its 2⁶⁴ streams,
/// so every trial is reproducible on its own and independent of the others.
pub fn trial_rng(seed: u64, trial: u64, purpose: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial.wrapping_mul(2).wrapping_add(purpose as u64));
    rng
}

/// Factor used to color standard normal draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SqrtRoute {
    /// Lower Cholesky factor `L`, `LLᵀ = Σ`.
    #[default]
    Cholesky,
    /// Symmetric square root `Σ^{1/2}`.
    Symmetric,
}

/// Draws labelled samples from a population.
#[derive(Debug, Clone)]
pub struct GaussianSampler {
    pop: PopulationModel,
    factor: DMatrix<f64>,
}

impl GaussianSampler {
    pub fn new(pop: PopulationModel, route: SqrtRoute) -> Result<Self> {
        let factor = match route {
            SqrtRoute::Cholesky => pop.cholesky_factor(),
            SqrtRoute::Symmetric => sym_eig(&pop.sigma)?.spectral_map(f64::sqrt),
        };
        Ok(Self { pop, factor })
    }

    pub fn population(&self) -> &PopulationModel {
        &self.pop
    }

    /// `n0` columns from class 0 followed by `n1` from class 1, each
    /// `factor·z + μᵢ` with `z` filled column by column from `rng`.
    pub fn sample<R: Rng + ?Sized>(&self, n0: usize, n1: usize, rng: &mut R) -> Result<LabeledDataset> {
        if n0 == 0 || n1 == 0 {
            return Err(Error::InvalidArgument(format!(
                "both classes need samples, requested ({n0}, {n1})"
            )));
        }
        let p = self.pop.p();
        let n = n0 + n1;
        let mut z = DMatrix::<f64>::zeros(p, n);
        for v in z.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let mut x = &self.factor * z;
        for (j, mut col) in x.column_iter_mut().enumerate() {
            let mu = if j < n0 { &self.pop.mu0 } else { &self.pop.mu1 };
            col += mu;
        }
        let mut labels = vec![0u8; n0];
        labels.resize(n, 1);
        LabeledDataset::new(x, labels)
    }
}

/// One-shot sampling with the Cholesky factor.
pub fn sample_gaussian<R: Rng + ?Sized>(pop: &PopulationModel, n0: usize, n1: usize, rng: &mut R) -> Result<LabeledDataset> {
    if n0 == 0 || n1 == 0 {
        return Err(Error::InvalidArgument(format!(
            "both classes need samples, requested ({n0}, {n1})"
        )));
    }
    GaussianSampler::new(pop.clone(), SqrtRoute::Cholesky)?.sample(n0, n1, rng)
}
