//! Discriminant scores, the decision rule, training by risk minimization over
//! a grid of `γ`, and exact error functionals for known populations.

use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::precision::{nl_precision, PrecisionOperator, RegParam};
use crate::risk::{normal_cdf, RiskConfig, RiskCurve, RiskPoint};
use crate::stats::{log_ratio, pooled_covariance, sym_eig, ClassStats, LabeledDataset, PopulationModel, SymEig};

/// Candidate values of `γ`, strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaGrid {
    values: Vec<f64>,
}

impl GammaGrid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("gamma grid is empty".into()));
        }
        if let Some(&g) = values.iter().find(|g| !(**g > 0.0 && g.is_finite())) {
            return Err(Error::DomainError {
                gamma: g,
                interval: "(0, inf)",
            });
        }
        if values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument("gamma grid must be strictly increasing".into()));
        }
        Ok(Self { values })
    }

    pub fn single(gamma: f64) -> Result<Self> {
        Self::new(vec![gamma])
    }

    /// `10^(j/2)` for `j = −10, …, 10`.
    pub fn exponential(lo: i32, hi: i32) -> Self {
        Self {
            values: (lo..=hi).map(|j| 10f64.powf(j as f64 / 2.0)).collect(),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl Default for GammaGrid {
    fn default() -> Self {
        Self::exponential(-10, 10)
    }
}

impl FromStr for GammaGrid {
    type Err = Error;

    /// `default` or a comma-separated list of values.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("default") {
            return Ok(Self::default());
        }
        let values = s
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidArgument(format!("bad gamma value '{}'", t.trim())))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(values)
    }
}

impl std::fmt::Display for GammaGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.values.iter().map(|v| format!("{v:e}")).collect();
        f.write_str(&parts.join(","))
    }
}

fn check_len(v: &DVector<f64>, p: usize) -> Result<()> {
    if v.len() == p {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            expected: p,
            found: v.len(),
        })
    }
}

/// `W = (x − (m0+m1)/2)ᵀ H (m0 − m1)`, evaluated as
/// `½[(x − m0)ᵀv + (x − m1)ᵀv]` with `v = H(m0 − m1)` so that swapping the
/// classes negates it exactly.
pub fn score(x: &DVector<f64>, m0: &DVector<f64>, m1: &DVector<f64>, h: &PrecisionOperator) -> Result<f64> {
    let p = h.p();
    check_len(x, p)?;
    check_len(m0, p)?;
    check_len(m1, p)?;
    let v = h.apply(&(m0 - m1))?;
    Ok(linear_score(x.as_slice(), m0, m1, &v))
}

/// [`score`] for every column of `x`, computing `H(m0 − m1)` once.
pub fn batch_scores(x: &DMatrix<f64>, m0: &DVector<f64>, m1: &DVector<f64>, h: &PrecisionOperator) -> Result<Vec<f64>> {
    let p = h.p();
    if x.nrows() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: x.nrows(),
        });
    }
    check_len(m0, p)?;
    check_len(m1, p)?;
    let v = h.apply(&(m0 - m1))?;
    Ok(x.column_iter().map(|col| linear_score(col.as_slice(), m0, m1, &v)).collect())
}

fn linear_score(x: &[f64], m0: &DVector<f64>, m1: &DVector<f64>, v: &DVector<f64>) -> f64 {
    let (mut a, mut b) = (0.0, 0.0);
    for i in 0..x.len() {
        a += (x[i] - m0[i]) * v[i];
        b += (x[i] - m1[i]) * v[i];
    }
    0.5 * (a + b)
}

/// The same score written as half the difference of the two squared
/// `H̃`-distances to the class means, `½(‖x−m1‖²_H̃ − ‖x−m0‖²_H̃)`,
/// each evaluated as `‖diag(√λ/(λ+γ))·Uᵀ(x−mᵢ)‖²`.
pub fn score_quadratic(
    x: &DVector<f64>,
    m0: &DVector<f64>,
    m1: &DVector<f64>,
    eig: &SymEig,
    gamma: RegParam,
) -> Result<f64> {
    let p = eig.p();
    check_len(x, p)?;
    check_len(m0, p)?;
    check_len(m1, p)?;
    let g = gamma.gamma();
    let root = eig.values.map(|l| l.sqrt() / (l + g));
    let dist = |m: &DVector<f64>| eig.project(&(x - m)).component_mul(&root).norm_squared();
    Ok(0.5 * (dist(m1) - dist(m0)))
}

/// Class 0 when `W > τ̂`, class 1 otherwise.
pub fn decide(w: f64, tau_hat: f64) -> u8 {
    if w > tau_hat {
        0
    } else {
        1
    }
}

/// `(x − (μ0+μ1)/2)ᵀ Σ⁻¹ (μ0 − μ1)`.
pub fn bayes_score(x: &DVector<f64>, pop: &PopulationModel) -> Result<f64> {
    check_len(x, pop.p())?;
    let w = pop.solve(&pop.mean_diff());
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularSigma);
    }
    Ok((x - (&pop.mu0 + &pop.mu1) * 0.5).dot(&w))
}

/// [`bayes_score`] for every column of `x`.
pub fn bayes_scores(x: &DMatrix<f64>, pop: &PopulationModel) -> Result<Vec<f64>> {
    if x.nrows() != pop.p() {
        return Err(Error::DimensionMismatch {
            expected: pop.p(),
            found: x.nrows(),
        });
    }
    let w = pop.solve(&pop.mean_diff());
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularSigma);
    }
    Ok(x.column_iter()
        .map(|col| linear_score(col.as_slice(), &pop.mu0, &pop.mu1, &w))
        .collect())
}

/// `G = (μᵢ − (m0+m1)/2)ᵀ H (m0 − m1)`.
pub fn oracle_g(mu_i: &DVector<f64>, m0: &DVector<f64>, m1: &DVector<f64>, h: &PrecisionOperator) -> Result<f64> {
    score(mu_i, m0, m1, h)
}

/// `D = (m0 − m1)ᵀ H Σ H (m0 − m1)`.
pub fn oracle_d(m0: &DVector<f64>, m1: &DVector<f64>, h: &PrecisionOperator, sigma: &DMatrix<f64>) -> Result<f64> {
    let p = h.p();
    check_len(m0, p)?;
    check_len(m1, p)?;
    if sigma.nrows() != p || sigma.ncols() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: sigma.nrows(),
        });
    }
    let hm = h.apply(&(m0 - m1))?;
    Ok(hm.dot(&(sigma * &hm)))
}

/// Conditional error rates of a trained discriminant under the true population.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionalError {
    pub g0: f64,
    pub g1: f64,
    pub d: f64,
    pub eps0: f64,
    pub eps1: f64,
    /// `π̂0·ε0 + π̂1·ε1` with priors from the training counts.
    pub eps: f64,
}

/// `εᵢ = Φ(((−1)^(i+1) G(μᵢ) + (−1)ⁱ τ̂)/√D)`.
pub fn oracle_conditional_error(pop: &PopulationModel, stats: &ClassStats, h: &PrecisionOperator) -> Result<ConditionalError> {
    conditional_error_parts(pop, &stats.m0, &stats.m1, stats.n0, stats.n1, h)
}

fn conditional_error_parts(
    pop: &PopulationModel,
    m0: &DVector<f64>,
    m1: &DVector<f64>,
    n0: usize,
    n1: usize,
    h: &PrecisionOperator,
) -> Result<ConditionalError> {
    let p = h.p();
    check_len(&pop.mu0, p)?;
    check_len(m0, p)?;
    check_len(m1, p)?;
    let hm = h.apply(&(m0 - m1))?;
    let g0 = linear_score(pop.mu0.as_slice(), m0, m1, &hm);
    let g1 = linear_score(pop.mu1.as_slice(), m0, m1, &hm);
    let d = hm.dot(&(&pop.sigma * &hm));
    if !(d > 0.0) || !d.is_finite() {
        return Err(Error::DegenerateD { value: d });
    }
    let tau = log_ratio(n0, n1);
    let sd = d.sqrt();
    let eps0 = normal_cdf((-g0 + tau) / sd);
    let eps1 = normal_cdf((g1 - tau) / sd);
    let n = (n0 + n1) as f64;
    Ok(ConditionalError {
        g0,
        g1,
        d,
        eps0,
        eps1,
        eps: n0 as f64 / n * eps0 + n1 as f64 / n * eps1,
    })
}

/// A fitted nonlinear-precision discriminant.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub m0: DVector<f64>,
    pub m1: DVector<f64>,
    pub n0: usize,
    pub n1: usize,
    pub eig: Arc<SymEig>,
    pub gamma_star: RegParam,
    pub h: PrecisionOperator,
    pub tau_hat: f64,
    pub risk_curve: Vec<RiskPoint>,
    /// Every grid point was degenerate; the model predicts the majority class.
    pub degenerate: bool,
    direction: DVector<f64>,
}

impl TrainedModel {
    #[allow(clippy::too_many_arguments)]
    fn assemble(
        m0: DVector<f64>,
        m1: DVector<f64>,
        n0: usize,
        n1: usize,
        eig: Arc<SymEig>,
        gamma_star: RegParam,
        tau_hat: f64,
        risk_curve: Vec<RiskPoint>,
        degenerate: bool,
    ) -> Result<Self> {
        let h = nl_precision(Arc::clone(&eig), gamma_star);
        let direction = if degenerate {
            DVector::zeros(m0.len())
        } else {
            h.apply(&(&m0 - &m1))?
        };
        Ok(Self {
            m0,
            m1,
            n0,
            n1,
            eig,
            gamma_star,
            h,
            tau_hat,
            risk_curve,
            degenerate,
            direction,
        })
    }

    pub fn p(&self) -> usize {
        self.m0.len()
    }

    /// `ε̂` at the selected `γ`, if defined.
    pub fn selected_risk(&self) -> Option<f64> {
        self.risk_curve
            .iter()
            .find(|pt| pt.gamma == self.gamma_star.gamma())
            .and_then(|pt| pt.eps_hat())
    }

    pub fn score(&self, x: &DVector<f64>) -> Result<f64> {
        check_len(x, self.p())?;
        Ok(linear_score(x.as_slice(), &self.m0, &self.m1, &self.direction))
    }

    pub fn scores(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        if x.nrows() != self.p() {
            return Err(Error::DimensionMismatch {
                expected: self.p(),
                found: x.nrows(),
            });
        }
        Ok(x.column_iter()
            .map(|col| linear_score(col.as_slice(), &self.m0, &self.m1, &self.direction))
            .collect())
    }

    /// Error rates of this model under a known population.
    pub fn conditional_error(&self, pop: &PopulationModel) -> Result<ConditionalError> {
        conditional_error_parts(pop, &self.m0, &self.m1, self.n0, self.n1, &self.h)
    }
}

/// Fits class moments once, decomposes `S` once, evaluates `ε̂` on every grid
/// point and keeps the minimizer (smallest `γ` on ties).
pub fn train(data: &LabeledDataset, grid: &GammaGrid, config: RiskConfig) -> Result<TrainedModel> {
    let stats = pooled_covariance(data)?;
    train_from_stats(&stats, grid, config)
}

pub fn train_from_stats(stats: &ClassStats, grid: &GammaGrid, config: RiskConfig) -> Result<TrainedModel> {
    let eig = Arc::new(sym_eig(&stats.s)?);
    train_from_eig(stats, eig, grid, config)
}

pub fn train_from_eig(stats: &ClassStats, eig: Arc<SymEig>, grid: &GammaGrid, config: RiskConfig) -> Result<TrainedModel> {
    let c = eig.project(&stats.mean_diff());
    let curve = RiskCurve::evaluate(&eig.values, &c, stats.n0, stats.n1, grid.values(), config);
    let (gamma, degenerate) = match curve.argmin() {
        Some(i) => (grid.values()[i], false),
        None => (grid.values()[0], true),
    };
    TrainedModel::assemble(
        stats.m0.clone(),
        stats.m1.clone(),
        stats.n0,
        stats.n1,
        eig,
        RegParam::new(gamma)?,
        stats.tau_hat(),
        curve.summary(),
        degenerate,
    )
}

/// Labels for the columns of `x`.
pub fn predict(model: &TrainedModel, x: &DMatrix<f64>) -> Result<Vec<u8>> {
    Ok(model
        .scores(x)?
        .into_iter()
        .map(|w| decide(w, model.tau_hat))
        .collect())
}

#[derive(Serialize, Deserialize)]
struct CurveRow {
    gamma: f64,
    degenerate: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    eps_hat: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    eps0_hat: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    eps1_hat: Option<f64>,
}

/// On-disk model layout (TOML).
#[derive(Serialize, Deserialize)]
struct ModelFile {
    p: usize,
    n0: usize,
    n1: usize,
    gamma_star: f64,
    tau_hat: f64,
    degenerate: bool,
    m0: Vec<f64>,
    m1: Vec<f64>,
    eigenvalues: Vec<f64>,
    /// `eigenvectors[i][d]` is entry `i` of eigenvector `d`.
    eigenvectors: Vec<Vec<f64>>,
    risk_curve: Vec<CurveRow>,
}

impl TrainedModel {
    pub fn to_toml_string(&self) -> Result<String> {
        let p = self.p();
        let u = &self.eig.vectors;
        let file = ModelFile {
            p,
            n0: self.n0,
            n1: self.n1,
            gamma_star: self.gamma_star.gamma(),
            tau_hat: self.tau_hat,
            degenerate: self.degenerate,
            m0: self.m0.iter().copied().collect(),
            m1: self.m1.iter().copied().collect(),
            eigenvalues: self.eig.values.iter().copied().collect(),
            eigenvectors: (0..p).map(|i| (0..p).map(|d| u[(i, d)]).collect()).collect(),
            risk_curve: self
                .risk_curve
                .iter()
                .map(|pt| CurveRow {
                    gamma: pt.gamma,
                    degenerate: pt.estimate.is_none(),
                    eps_hat: pt.estimate.map(|e| e[0]),
                    eps0_hat: pt.estimate.map(|e| e[1]),
                    eps1_hat: pt.estimate.map(|e| e[2]),
                })
                .collect(),
        };
        toml::to_string(&file).map_err(|e| Error::InvalidArgument(format!("model serialization: {e}")))
    }

    pub fn from_toml_str(text: &str, origin: &str) -> Result<Self> {
        let parse_err = |message: String| Error::Parse {
            path: origin.to_string(),
            line: 0,
            column: String::new(),
            message,
        };
        let file: ModelFile = toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1)
                .unwrap_or(0);
            Error::Parse {
                path: origin.to_string(),
                line,
                column: String::new(),
                message: e.message().to_string(),
            }
        })?;
        let p = file.p;
        for (name, len) in [("m0", file.m0.len()), ("m1", file.m1.len()), ("eigenvalues", file.eigenvalues.len()), ("eigenvectors", file.eigenvectors.len())] {
            if len != p {
                return Err(parse_err(format!("{name} has length {len}, expected {p}")));
            }
        }
        if let Some(row) = file.eigenvectors.iter().find(|r| r.len() != p) {
            return Err(parse_err(format!("eigenvector row has length {}, expected {p}", row.len())));
        }
        if file.n0 < 2 || file.n1 < 2 {
            return Err(parse_err("class counts must be at least 2".into()));
        }
        let all = file
            .m0
            .iter()
            .chain(&file.m1)
            .chain(&file.eigenvalues)
            .chain(file.eigenvectors.iter().flatten());
        if all.clone().any(|v| !v.is_finite()) || !file.tau_hat.is_finite() {
            return Err(Error::NonFinite { what: "model file" });
        }
        let eig = SymEig {
            values: DVector::from_vec(file.eigenvalues),
            vectors: DMatrix::from_fn(p, p, |i, d| file.eigenvectors[i][d]),
        };
        let curve = file
            .risk_curve
            .iter()
            .map(|r| RiskPoint {
                gamma: r.gamma,
                estimate: match (r.degenerate, r.eps_hat, r.eps0_hat, r.eps1_hat) {
                    (false, Some(a), Some(b), Some(c)) => Some([a, b, c]),
                    _ => None,
                },
            })
            .collect();
        Self::assemble(
            DVector::from_vec(file.m0),
            DVector::from_vec(file.m1),
            file.n0,
            file.n1,
            Arc::new(eig),
            RegParam::new(file.gamma_star)?,
            file.tau_hat,
            curve,
            file.degenerate,
        )
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml_string()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text, &path.display().to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector};

    use crate::precision::precision_from_eig;
    use crate::precision::PrecisionKind;

    fn quarter_identity() -> PrecisionOperator {
        let eig = Arc::new(sym_eig(&DMatrix::identity(2, 2)).unwrap());
        nl_precision(eig, RegParam::new(1.0).unwrap())
    }

    #[test]
    fn default_grid_shape() {
        let g = GammaGrid::default();
        assert_eq!(g.len(), 21);
        assert!((g.values()[0] - 1e-5).abs() < 1e-20);
        assert_eq!(g.values()[10], 1.0);
        assert!((g.values()[20] - 1e5).abs() < 1e-9);
    }

    #[test]
    fn grid_validation_and_parsing() {
        assert!(GammaGrid::new(vec![]).is_err());
        assert!(GammaGrid::new(vec![1.0, 1.0]).is_err());
        assert!(GammaGrid::new(vec![0.0, 1.0]).is_err());
        let g: GammaGrid = "0.1, 1,10".parse().unwrap();
        assert_eq!(g.values(), &[0.1, 1.0, 10.0]);
        assert_eq!("default".parse::<GammaGrid>().unwrap(), GammaGrid::default());
        assert!("1,x".parse::<GammaGrid>().is_err());
    }

    #[test]
    fn score_fixtures() {
        let h = quarter_identity();
        let (m0, m1) = (dvector![1.0, 0.0], dvector![0.0, 1.0]);
        assert_eq!(score(&dvector![1.0, 1.0], &m0, &m1, &h).unwrap(), 0.0);
        let at_m0 = score(&m0, &m0, &m1, &h).unwrap();
        assert!((at_m0 - 0.25).abs() < 1e-15);
        assert!(matches!(
            score(&dvector![1.0], &m0, &m1, &h),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn quadratic_form_fixtures() {
        let eig = sym_eig(&dmatrix![2.0, 0.3; 0.3, 0.5]).unwrap();
        let g = RegParam::new(0.4).unwrap();
        let x = dvector![0.2, -0.7];
        let (m0, m1) = (dvector![1.0, 0.5], dvector![-0.3, 0.1]);
        let h = nl_precision(Arc::new(eig.clone()), g);
        let lin = score(&x, &m0, &m1, &h).unwrap();
        let quad = score_quadratic(&x, &m0, &m1, &eig, g).unwrap();
        assert!((lin - quad).abs() <= 1e-12 * (1.0 + lin.abs()));
        assert_eq!(score_quadratic(&x, &m0, &m0, &eig, g).unwrap(), 0.0);
        let swapped = score_quadratic(&x, &m1, &m0, &eig, g).unwrap();
        assert_eq!(swapped, -quad);
    }

    #[test]
    fn decision_rule() {
        assert_eq!(decide(0.0, 0.0), 1);
        assert_eq!(decide(1.0, 0.0), 0);
        assert_eq!(decide(0.0, (0.3f64 / 0.7).ln()), 0);
    }

    #[test]
    fn bayes_score_fixtures() {
        let e1 = dvector![1.0, 0.0];
        let pop = PopulationModel::new(e1.clone(), -&e1, DMatrix::identity(2, 2)).unwrap();
        assert_eq!(bayes_score(&dvector![0.0, 0.0], &pop).unwrap(), 0.0);
        assert_eq!(bayes_score(&e1, &pop).unwrap(), 2.0);
    }

    #[test]
    fn oracle_functionals() {
        let h = quarter_identity();
        let (m0, m1) = (dvector![1.0, 0.0], dvector![0.0, 1.0]);
        let g0 = oracle_g(&m0, &m0, &m1, &h).unwrap();
        let g1 = oracle_g(&m1, &m0, &m1, &h).unwrap();
        assert!((g0 - 0.25).abs() < 1e-15);
        assert_eq!(g0 + g1, 0.0);
        let d = oracle_d(&m0, &m1, &h, &DMatrix::identity(2, 2)).unwrap();
        assert!((d - 0.125).abs() < 1e-15);
    }

    #[test]
    fn bayes_plug_in_error() {
        let mu = dvector![0.5, 0.0, 0.0];
        let sigma = DMatrix::identity(3, 3);
        let pop = PopulationModel::new(mu.clone(), -&mu, sigma.clone()).unwrap();
        let stats = ClassStats {
            m0: mu.clone(),
            m1: -&mu,
            s: sigma.clone(),
            n0: 10,
            n1: 10,
        };
        let eig = Arc::new(sym_eig(&sigma).unwrap());
        let h = precision_from_eig(eig, 1e-300, PrecisionKind::LinearB).unwrap();
        let err = oracle_conditional_error(&pop, &stats, &h).unwrap();
        assert_eq!(err.eps0, err.eps1);
        let nu = pop.nu_sq().sqrt();
        assert!((err.eps - normal_cdf(-nu / 2.0)).abs() < 1e-14);
    }

    fn toy_data() -> LabeledDataset {
        let class0 = dmatrix![1.0, 2.0, 1.5, 0.8; 0.1, -0.3, 0.4, 0.0; 1.0, 0.7, 1.2, 0.9];
        let class1 = dmatrix![-1.0, -0.5, -1.4; 0.2, 0.5, -0.1; -0.8, -1.1, -0.6];
        LabeledDataset::from_classes(&class0, &class1).unwrap()
    }

    #[test]
    fn single_point_grid_is_selected() {
        let model = train(&toy_data(), &GammaGrid::single(0.7).unwrap(), RiskConfig::default()).unwrap();
        assert_eq!(model.gamma_star.gamma(), 0.7);
        assert!(!model.degenerate);
    }

    #[test]
    fn train_is_deterministic() {
        let data = toy_data();
        let a = train(&data, &GammaGrid::default(), RiskConfig::default()).unwrap();
        let b = train(&data, &GammaGrid::default(), RiskConfig::default()).unwrap();
        assert_eq!(a.gamma_star, b.gamma_star);
        assert_eq!(a.risk_curve, b.risk_curve);
        let best = a.risk_curve.iter().filter_map(|p| p.eps_hat()).fold(f64::INFINITY, f64::min);
        assert_eq!(a.selected_risk(), Some(best));
        assert_eq!(predict(&a, data.features()).unwrap(), predict(&b, data.features()).unwrap());
    }

    #[test]
    fn predicts_class_means() {
        let data = toy_data();
        let model = train(&data, &GammaGrid::default(), RiskConfig::default()).unwrap();
        let x = DMatrix::from_columns(&[model.m0.clone(), model.m1.clone()]);
        // unequal priors shift the threshold but not past the class means here
        assert_eq!(predict(&model, &x).unwrap(), vec![0, 1]);
        assert!(predict(&model, &DMatrix::zeros(2, 1)).is_err());
    }

    #[test]
    fn degenerate_data_falls_back_to_majority() {
        // identical class means: D_c = 0 at every grid point
        let class0 = dmatrix![1.0, -1.0, 0.0; 0.0, 0.0, 0.0];
        let class1 = dmatrix![1.0, -1.0; 0.0, 0.0];
        let data = LabeledDataset::from_classes(&class0, &class1).unwrap();
        let model = train(&data, &GammaGrid::default(), RiskConfig::default()).unwrap();
        assert!(model.degenerate);
        assert!(model.risk_curve.iter().all(|p| p.estimate.is_none()));
        assert_eq!(predict(&model, data.features()).unwrap(), vec![0; 5]);
    }

    #[test]
    fn model_round_trip_is_exact() {
        let data = toy_data();
        let model = train(&data, &GammaGrid::default(), RiskConfig::default()).unwrap();
        let text = model.to_toml_string().unwrap();
        let back = TrainedModel::from_toml_str(&text, "mem").unwrap();
        assert_eq!(back.gamma_star, model.gamma_star);
        assert_eq!(back.risk_curve, model.risk_curve);
        let a = model.scores(data.features()).unwrap();
        let b = back.scores(data.features()).unwrap();
        assert_eq!(a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }

    #[test]
    fn model_parse_errors() {
        assert!(matches!(
            TrainedModel::from_toml_str("p = 2\nn0 = ", "bad.toml"),
            Err(Error::Parse { line: 2, .. })
        ));
        let model = train(&toy_data(), &GammaGrid::default(), RiskConfig::default()).unwrap();
        let text = model.to_toml_string().unwrap().replacen("p = 3", "p = 4", 1);
        assert!(matches!(TrainedModel::from_toml_str(&text, "x"), Err(Error::Parse { .. })));
    }
}
