//! Estimators of the inverse covariance held in eigen-filtered form.

use std::sync::{Arc, OnceLock};

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::stats::{sym_eig, symmetrize, SymEig};

/// Regularization strength `γ > 0`; the resolvent is evaluated at `z = −γ`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct RegParam {
    gamma: f64,
}

impl RegParam {
    pub fn new(gamma: f64) -> Result<Self> {
        if gamma > 0.0 && gamma.is_finite() {
            Ok(Self { gamma })
        } else {
            Err(Error::DomainError {
                gamma,
                interval: "(0, inf)",
            })
        }
    }

    pub fn gamma(self) -> f64 {
        self.gamma
    }

    pub fn z(self) -> f64 {
        -self.gamma
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PrecisionKind {
    /// `S(S+γI)⁻²`
    NL,
    /// `(γS+I)⁻¹`
    LinearA,
    /// `(S+γI)⁻¹`
    LinearB,
    /// `(γS+(1−γ)F)⁻¹`, `γ ∈ (0,1)`
    LinearTarget,
}

/// Change of basis applied around the spectral core, `H = T·U·diag(w)·Uᵀ·Tᵀ`.
#[derive(Debug, Clone)]
enum Whitening {
    Identity,
    Diagonal(DVector<f64>),
    Dense(DMatrix<f64>),
}

impl Whitening {
    /// `Tᵀ v`
    fn apply_t(&self, v: &DVector<f64>) -> DVector<f64> {
        match self {
            Whitening::Identity => v.clone(),
            Whitening::Diagonal(d) => d.component_mul(v),
            Whitening::Dense(t) => t.tr_mul(v),
        }
    }

    /// `T v`
    fn apply(&self, v: DVector<f64>) -> DVector<f64> {
        match self {
            Whitening::Identity => v,
            Whitening::Diagonal(d) => d.component_mul(&v),
            Whitening::Dense(t) => t * v,
        }
    }
}

#[derive(Debug, Clone)]
enum Repr {
    Spectral {
        eig: Arc<SymEig>,
        weights: DVector<f64>,
        whitening: Whitening,
    },
    Dense(DMatrix<f64>),
}

/// A symmetric PSD estimate `H` of `Σ⁻¹`.
///
/// Matrix-vector products use the factored form; the dense matrix is only
/// built when [`PrecisionOperator::matrix`] is called, and then cached.
#[derive(Debug, Clone)]
pub struct PrecisionOperator {
    kind: PrecisionKind,
    gamma: RegParam,
    repr: Repr,
    dense: OnceLock<DMatrix<f64>>,
}

impl PrecisionOperator {
    fn spectral(kind: PrecisionKind, gamma: RegParam, eig: Arc<SymEig>, f: impl Fn(f64) -> f64) -> Self {
        let weights = eig.values.map(f);
        Self {
            kind,
            gamma,
            repr: Repr::Spectral {
                eig,
                weights,
                whitening: Whitening::Identity,
            },
            dense: OnceLock::new(),
        }
    }

    pub fn kind(&self) -> PrecisionKind {
        self.kind
    }

    pub fn gamma(&self) -> RegParam {
        self.gamma
    }

    pub fn p(&self) -> usize {
        match &self.repr {
            Repr::Spectral { eig, .. } => eig.p(),
            Repr::Dense(h) => h.nrows(),
        }
    }

    /// Eigenvalues of `H` paired with the eigenvectors of `S`, when `H` shares them.
    pub fn spectrum(&self) -> Option<&DVector<f64>> {
        match &self.repr {
            Repr::Spectral {
                weights,
                whitening: Whitening::Identity,
                ..
            } => Some(weights),
            _ => None,
        }
    }

    /// `H v`.
    pub fn apply(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        if v.len() != self.p() {
            return Err(Error::DimensionMismatch {
                expected: self.p(),
                found: v.len(),
            });
        }
        Ok(match &self.repr {
            Repr::Spectral {
                eig,
                weights,
                whitening,
            } => {
                let c = eig.project(&whitening.apply_t(v));
                whitening.apply(&eig.vectors * c.component_mul(weights))
            }
            Repr::Dense(h) => h * v,
        })
    }

    /// The dense `p × p` matrix.
    pub fn matrix(&self) -> &DMatrix<f64> {
        self.dense.get_or_init(|| match &self.repr {
            Repr::Spectral {
                eig,
                weights,
                whitening,
            } => {
                let core = eig.from_spectrum(weights);
                let mut h = match whitening {
                    Whitening::Identity => core,
                    Whitening::Diagonal(d) => {
                        DMatrix::from_fn(core.nrows(), core.ncols(), |i, j| d[i] * core[(i, j)] * d[j])
                    }
                    Whitening::Dense(t) => t * core * t.transpose(),
                };
                symmetrize(&mut h);
                h
            }
            Repr::Dense(h) => h.clone(),
        })
    }
}

/// `H̃ = S(S+γI)⁻²` from the eigendecomposition of `S`.
pub fn nl_precision(eig: Arc<SymEig>, gamma: RegParam) -> PrecisionOperator {
    let g = gamma.gamma();
    PrecisionOperator::spectral(PrecisionKind::NL, gamma, eig, |l| l / ((l + g) * (l + g)))
}

fn check_target_gamma(gamma: f64) -> Result<RegParam> {
    if gamma > 0.0 && gamma < 1.0 {
        RegParam::new(gamma)
    } else {
        Err(Error::DomainError {
            gamma,
            interval: "(0, 1)",
        })
    }
}

/// Forms that share the eigenvectors of `S`. `LinearTarget` is rejected here;
/// use [`TargetBasis`].
pub fn precision_from_eig(eig: Arc<SymEig>, gamma: f64, kind: PrecisionKind) -> Result<PrecisionOperator> {
    let param = RegParam::new(gamma)?;
    let g = gamma;
    Ok(match kind {
        PrecisionKind::NL => nl_precision(eig, param),
        PrecisionKind::LinearA => PrecisionOperator::spectral(kind, param, eig, |l| 1.0 / (g * l + 1.0)),
        PrecisionKind::LinearB => PrecisionOperator::spectral(kind, param, eig, |l| 1.0 / (l + g)),
        PrecisionKind::LinearTarget => {
            return Err(Error::InvalidArgument(
                "the target form needs the target matrix, not only the spectrum of S".into(),
            ))
        }
    })
}

/// Factorization reused across `γ` for the target form `(γS+(1−γ)F)⁻¹`.
///
/// With `F = LLᵀ` and `K = L⁻¹SL⁻ᵀ = UΛUᵀ`, the inverse equals
/// `L⁻ᵀU·diag(1/(γλ+1−γ))·UᵀL⁻¹`.
#[derive(Debug, Clone)]
pub struct TargetBasis {
    inner: TargetInner,
}

#[derive(Debug, Clone)]
enum TargetInner {
    Whitened { eig: Arc<SymEig>, whitening: Whitening },
    /// `F` not positive definite: each `γ` needs its own inverse.
    Direct { s: DMatrix<f64>, f: DMatrix<f64> },
}

impl TargetBasis {
    /// `target = None` selects `F = diag(S)`.
    pub fn new(s: &DMatrix<f64>, target: Option<&DMatrix<f64>>) -> Result<Self> {
        let p = s.nrows();
        let f = match target {
            Some(f) => {
                if f.nrows() != p || f.ncols() != p {
                    return Err(Error::DimensionMismatch {
                        expected: p,
                        found: f.nrows(),
                    });
                }
                f.clone()
            }
            None => DMatrix::from_diagonal(&s.diagonal()),
        };
        let is_diagonal = (0..p).all(|i| (0..p).all(|j| i == j || f[(i, j)] == 0.0));
        if is_diagonal && f.diagonal().iter().all(|&d| d > 0.0) {
            let scale = f.diagonal().map(|d| 1.0 / d.sqrt());
            let mut k = DMatrix::from_fn(p, p, |i, j| scale[i] * s[(i, j)] * scale[j]);
            symmetrize(&mut k);
            return Ok(Self {
                inner: TargetInner::Whitened {
                    eig: Arc::new(sym_eig(&k)?),
                    whitening: Whitening::Diagonal(scale),
                },
            });
        }
        if let Some(chol) = Cholesky::new(f.clone()) {
            let l_inv = chol
                .l()
                .try_inverse()
                .ok_or(Error::SingularTarget)?;
            let mut k = &l_inv * s * l_inv.transpose();
            symmetrize(&mut k);
            return Ok(Self {
                inner: TargetInner::Whitened {
                    eig: Arc::new(sym_eig(&k)?),
                    whitening: Whitening::Dense(l_inv.transpose()),
                },
            });
        }
        Ok(Self {
            inner: TargetInner::Direct { s: s.clone(), f },
        })
    }

    pub fn operator(&self, gamma: f64) -> Result<PrecisionOperator> {
        let param = check_target_gamma(gamma)?;
        let repr = match &self.inner {
            TargetInner::Whitened { eig, whitening } => Repr::Spectral {
                eig: Arc::clone(eig),
                weights: eig.values.map(|l| 1.0 / (gamma * l + 1.0 - gamma)),
                whitening: whitening.clone(),
            },
            TargetInner::Direct { s, f } => {
                let combo = s * gamma + f * (1.0 - gamma);
                let mut h = combo.try_inverse().ok_or(Error::SingularTarget)?;
                if h.iter().any(|v| !v.is_finite()) {
                    return Err(Error::SingularTarget);
                }
                symmetrize(&mut h);
                Repr::Dense(h)
            }
        };
        Ok(PrecisionOperator {
            kind: PrecisionKind::LinearTarget,
            gamma: param,
            repr,
            dense: OnceLock::new(),
        })
    }
}

/// Linear ridge forms `(γS+I)⁻¹`, `(S+γI)⁻¹` or `(γS+(1−γ)F)⁻¹`.
pub fn ridge_precision(
    s: &DMatrix<f64>,
    gamma: f64,
    kind: PrecisionKind,
    target: Option<&DMatrix<f64>>,
) -> Result<PrecisionOperator> {
    match kind {
        PrecisionKind::LinearA | PrecisionKind::LinearB => {
            RegParam::new(gamma)?;
            precision_from_eig(Arc::new(sym_eig(s)?), gamma, kind)
        }
        PrecisionKind::LinearTarget => {
            check_target_gamma(gamma)?;
            TargetBasis::new(s, target)?.operator(gamma)
        }
        PrecisionKind::NL => Err(Error::InvalidArgument(
            "the nonlinear estimator is not a ridge form".into(),
        )),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Filter {
    /// `λ²/(λ+γ)²`
    Nonlinear,
    /// `λ/(λ+γ)`
    Linear,
}

/// Weight with which the sample direction of eigenvalue `λ` enters `H·S`.
pub fn filter_coeff(lambda: f64, gamma: f64, filter: Filter) -> f64 {
    // written as 1/(1+γ/λ) so that rounding preserves monotonicity in both arguments
    let r = 1.0 / (1.0 + gamma / lambda);
    match filter {
        Filter::Nonlinear => r * r,
        Filter::Linear => r,
    }
}

/// Filter weights relative to the leading direction: `(ρᴸ, ρ̃)` with
/// `ρᴸ(λ) = (λ₁λ+γλ)/(λ₁λ+γλ₁)` and `ρ̃ = (ρᴸ)²`.
pub fn contribution_ratios(lambdas: &DVector<f64>, gamma: f64) -> Result<(DVector<f64>, DVector<f64>)> {
    let l1 = lambdas.iter().copied().fold(0.0f64, f64::max);
    if l1 <= 0.0 {
        return Err(Error::AllZeroSpectrum);
    }
    let rho_l = lambdas.map(|l| (l1 * l + gamma * l) / (l1 * l + gamma * l1));
    let rho_nl = rho_l.map(|r| r * r);
    Ok((rho_l, rho_nl))
}
