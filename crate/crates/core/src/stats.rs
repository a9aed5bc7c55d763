//! Datasets, class moments, the pooled covariance and its eigendecomposition,
//! and ground-truth population models.
//!
//! Observations are stored column-wise: a dataset with `p` features and `n`
//! samples is a `p × n` matrix.

use std::cmp::Ordering;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative threshold below which eigenvalues of a PSD matrix are treated as zero.
pub const EIG_ZERO_RTOL: f64 = 1e-10;

/// A binary-labelled sample, one observation per column.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    features: DMatrix<f64>,
    labels: Vec<u8>,
}

impl LabeledDataset {
    pub fn new(features: DMatrix<f64>, labels: Vec<u8>) -> Result<Self> {
        if labels.len() != features.ncols() {
            return Err(Error::DimensionMismatch {
                expected: features.ncols(),
                found: labels.len(),
            });
        }
        if let Some((index, &label)) = labels.iter().enumerate().find(|(_, &l)| l > 1) {
            return Err(Error::InvalidLabel {
                index,
                label: i64::from(label),
            });
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "features" });
        }
        Ok(Self { features, labels })
    }

    /// Stacks class-0 columns followed by class-1 columns.
    pub fn from_classes(class0: &DMatrix<f64>, class1: &DMatrix<f64>) -> Result<Self> {
        if class0.nrows() != class1.nrows() {
            return Err(Error::DimensionMismatch {
                expected: class0.nrows(),
                found: class1.nrows(),
            });
        }
        let p = class0.nrows();
        let (n0, n1) = (class0.ncols(), class1.ncols());
        let mut features = DMatrix::zeros(p, n0 + n1);
        features.columns_mut(0, n0).copy_from(class0);
        features.columns_mut(n0, n1).copy_from(class1);
        let mut labels = vec![0u8; n0];
        labels.resize(n0 + n1, 1);
        Self::new(features, labels)
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn p(&self) -> usize {
        self.features.nrows()
    }

    pub fn n(&self) -> usize {
        self.features.ncols()
    }

    pub fn class_count(&self, class: u8) -> usize {
        self.labels.iter().filter(|&&l| l == class).count()
    }

    /// Columns of one class in canonical (lexicographic) order, so that every
    /// accumulation below is independent of the sample order.
    fn class_columns(&self, class: u8) -> Vec<Vec<f64>> {
        let mut cols: Vec<Vec<f64>> = self
            .labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == class)
            .map(|(j, _)| self.features.column(j).iter().copied().collect())
            .collect();
        cols.sort_by(|a, b| {
            a.iter()
                .zip(b)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| *o != Ordering::Equal)
                .unwrap_or(Ordering::Equal)
        });
        cols
    }
}

fn column_mean(cols: &[Vec<f64>], p: usize) -> DVector<f64> {
    let mut mean = DVector::zeros(p);
    for col in cols {
        for (m, v) in mean.iter_mut().zip(col) {
            *m += v;
        }
    }
    mean / cols.len() as f64
}

/// Class means `(m0, m1)`.
pub fn sample_means(data: &LabeledDataset) -> Result<(DVector<f64>, DVector<f64>)> {
    let p = data.p();
    let mut means = Vec::with_capacity(2);
    for class in 0..2u8 {
        let cols = data.class_columns(class);
        if cols.is_empty() {
            return Err(Error::EmptyClass { class });
        }
        means.push(column_mean(&cols, p));
    }
    let m1 = means.pop().unwrap();
    let m0 = means.pop().unwrap();
    Ok((m0, m1))
}

/// `ln n1 − ln n0`, exactly antisymmetric under swapping the counts.
pub fn log_ratio(n0: usize, n1: usize) -> f64 {
    (n1 as f64).ln() - (n0 as f64).ln()
}

/// Sample moments of a two-class training set.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassStats {
    pub m0: DVector<f64>,
    pub m1: DVector<f64>,
    /// Pooled covariance with denominator `n − 2`.
    pub s: DMatrix<f64>,
    pub n0: usize,
    pub n1: usize,
}

impl ClassStats {
    pub fn p(&self) -> usize {
        self.m0.len()
    }

    pub fn n(&self) -> usize {
        self.n0 + self.n1
    }

    pub fn n_tilde(&self) -> usize {
        self.n() - 2
    }

    pub fn pi0_hat(&self) -> f64 {
        self.n0 as f64 / self.n() as f64
    }

    pub fn pi1_hat(&self) -> f64 {
        self.n1 as f64 / self.n() as f64
    }

    /// Decision threshold `log(π̂₁/π̂₀)`.
    pub fn tau_hat(&self) -> f64 {
        log_ratio(self.n0, self.n1)
    }

    /// `m = m0 − m1`.
    pub fn mean_diff(&self) -> DVector<f64> {
        &self.m0 - &self.m1
    }
}

/// Class means and the pooled sample covariance
/// `S = (1/(n−2)) Σᵢ (nᵢ−1) Sᵢ`, symmetrized.
pub fn pooled_covariance(data: &LabeledDataset) -> Result<ClassStats> {
    let p = data.p();
    let mut scatter = DMatrix::<f64>::zeros(p, p);
    let mut means = Vec::with_capacity(2);
    let mut counts = [0usize; 2];
    for class in 0..2u8 {
        let cols = data.class_columns(class);
        if cols.len() < 2 {
            return Err(Error::InsufficientSamples {
                class,
                count: cols.len(),
            });
        }
        let mean = column_mean(&cols, p);
        let mut centered = DMatrix::<f64>::zeros(p, cols.len());
        for (j, col) in cols.iter().enumerate() {
            for i in 0..p {
                centered[(i, j)] = col[i] - mean[i];
            }
        }
        scatter.gemm(1.0, &centered, &centered.transpose(), 1.0);
        counts[class as usize] = cols.len();
        means.push(mean);
    }
    let n_tilde = (counts[0] + counts[1] - 2) as f64;
    let mut s = scatter / n_tilde;
    symmetrize(&mut s);
    let m1 = means.pop().unwrap();
    let m0 = means.pop().unwrap();
    Ok(ClassStats {
        m0,
        m1,
        s,
        n0: counts[0],
        n1: counts[1],
    })
}

pub(crate) fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

/// Symmetric eigendecomposition with eigenvalues sorted in descending order.
#[derive(Debug, Clone, PartialEq)]
pub struct SymEig {
    /// `λ₁ ≥ … ≥ λ_p`.
    pub values: DVector<f64>,
    /// Orthonormal eigenvectors, column `d` pairs with `values[d]`.
    pub vectors: DMatrix<f64>,
}

impl SymEig {
    pub fn p(&self) -> usize {
        self.values.len()
    }

    /// Number of strictly positive eigenvalues.
    pub fn rank(&self) -> usize {
        self.values.iter().filter(|&&l| l > 0.0).count()
    }

    /// Coordinates `Uᵀv` in the eigenbasis.
    pub fn project(&self, v: &DVector<f64>) -> DVector<f64> {
        self.vectors.tr_mul(v)
    }

    /// `U · diag(f(λ)) · Uᵀ`.
    pub fn spectral_map(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let weights: DVector<f64> = self.values.map(f);
        self.from_spectrum(&weights)
    }

    /// `U · diag(weights) · Uᵀ`.
    pub fn from_spectrum(&self, weights: &DVector<f64>) -> DMatrix<f64> {
        let mut scaled = self.vectors.clone();
        for (mut col, &w) in scaled.column_iter_mut().zip(weights.iter()) {
            col *= w;
        }
        let mut out = scaled * self.vectors.transpose();
        symmetrize(&mut out);
        out
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        self.from_spectrum(&self.values)
    }
}

/// Eigendecomposition of a symmetric matrix, descending, with eigenvalues
/// below `1e−10·λ₁` in magnitude set to exactly zero.
pub fn sym_eig(s: &DMatrix<f64>) -> Result<SymEig> {
    if !s.is_square() {
        return Err(Error::DimensionMismatch {
            expected: s.nrows(),
            found: s.ncols(),
        });
    }
    if s.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { what: "matrix" });
    }
    let p = s.nrows();
    if p == 0 {
        return Ok(SymEig {
            values: DVector::zeros(0),
            vectors: DMatrix::zeros(0, 0),
        });
    }
    let eig = SymmetricEigen::<f64, Dyn>::try_new(s.clone(), 1e-15, 100_000)
        .ok_or(Error::ConvergenceFailure)?;
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let largest = eig.eigenvalues[order[0]].max(0.0);
    let threshold = EIG_ZERO_RTOL * largest;
    let mut values = DVector::zeros(p);
    let mut vectors = DMatrix::zeros(p, p);
    for (dst, &src) in order.iter().enumerate() {
        let lambda = eig.eigenvalues[src];
        values[dst] = if lambda.abs() <= threshold { 0.0 } else { lambda };
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(SymEig { values, vectors })
}

/// Ground-truth Gaussian class model with common covariance.
#[derive(Debug, Clone)]
pub struct PopulationModel {
    pub mu0: DVector<f64>,
    pub mu1: DVector<f64>,
    pub sigma: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
}

impl PopulationModel {
    pub fn new(mu0: DVector<f64>, mu1: DVector<f64>, sigma: DMatrix<f64>) -> Result<Self> {
        let p = sigma.nrows();
        for len in [sigma.ncols(), mu0.len(), mu1.len()] {
            if len != p {
                return Err(Error::DimensionMismatch { expected: p, found: len });
            }
        }
        if sigma.iter().chain(mu0.iter()).chain(mu1.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "population" });
        }
        let chol = Cholesky::new(sigma.clone()).ok_or(Error::SingularSigma)?;
        Ok(Self { mu0, mu1, sigma, chol })
    }

    pub fn p(&self) -> usize {
        self.sigma.nrows()
    }

    /// `μ = μ₀ − μ₁`.
    pub fn mean_diff(&self) -> DVector<f64> {
        &self.mu0 - &self.mu1
    }

    /// Lower Cholesky factor of Σ.
    pub fn cholesky_factor(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    /// `Σ⁻¹ v`.
    pub fn solve(&self, v: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(v)
    }

    /// Squared Mahalanobis distance `(μ₀−μ₁)ᵀΣ⁻¹(μ₀−μ₁)`.
    pub fn nu_sq(&self) -> f64 {
        let mu = self.mean_diff();
        mu.dot(&self.solve(&mu))
    }
}

/// Squared Mahalanobis distance between the two class means.
pub fn mahalanobis(pop: &PopulationModel) -> f64 {
    pop.nu_sq()
}

/// Scale `k > 0` such that `μ₀ = k·1`, `μ₁ = −μ₀` has squared Mahalanobis
/// distance `nu_sq` under Σ, i.e. `4k²·1ᵀΣ⁻¹1 = nu_sq`.
pub fn calibrate_mean_scale(sigma: &DMatrix<f64>, nu_sq: f64) -> Result<f64> {
    if !(nu_sq > 0.0 && nu_sq.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "squared Mahalanobis distance must be positive, got {nu_sq}"
        )));
    }
    let chol = Cholesky::new(sigma.clone()).ok_or(Error::SingularSigma)?;
    let ones = DVector::from_element(sigma.nrows(), 1.0);
    let quad = ones.dot(&chol.solve(&ones));
    if !(quad > 0.0 && quad.is_finite()) {
        return Err(Error::SingularSigma);
    }
    Ok((nu_sq / (4.0 * quad)).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    fn toy() -> LabeledDataset {
        let class0 = dmatrix![0.0, 2.0; 0.0, 0.0];
        let class1 = dmatrix![0.0, 0.0; 0.0, 2.0];
        LabeledDataset::from_classes(&class0, &class1).unwrap()
    }

    #[test]
    fn two_point_means() {
        let (m0, m1) = sample_means(&toy()).unwrap();
        assert_eq!(m0.as_slice(), &[1.0, 0.0]);
        assert_eq!(m1.as_slice(), &[0.0, 1.0]);
    }

    #[test]
    fn constant_data_means() {
        let v = [0.5, -3.0, 7.0];
        let cols = DMatrix::from_fn(3, 6, |i, _| v[i]);
        let data = LabeledDataset::new(cols, vec![0, 1, 0, 1, 0, 1]).unwrap();
        let (m0, m1) = sample_means(&data).unwrap();
        assert_eq!(m0.as_slice(), &v);
        assert_eq!(m1.as_slice(), &v);
    }

    #[test]
    fn empty_class_is_rejected() {
        let data = LabeledDataset::new(DMatrix::zeros(2, 3), vec![0, 0, 0]).unwrap();
        assert_eq!(sample_means(&data), Err(Error::EmptyClass { class: 1 }));
    }

    #[test]
    fn hand_computed_pooled_covariance_is_identity() {
        let stats = pooled_covariance(&toy()).unwrap();
        assert_eq!(stats.s, DMatrix::identity(2, 2));
        assert_eq!((stats.n0, stats.n1, stats.n_tilde()), (2, 2, 2));
        assert_eq!(stats.tau_hat(), 0.0);
    }

    #[test]
    fn singleton_class_is_insufficient() {
        let data = LabeledDataset::new(DMatrix::zeros(2, 3), vec![0, 0, 1]).unwrap();
        assert_eq!(
            pooled_covariance(&data),
            Err(Error::InsufficientSamples { class: 1, count: 1 })
        );
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            LabeledDataset::new(DMatrix::zeros(2, 2), vec![0, 2]),
            Err(Error::InvalidLabel { index: 1, .. })
        ));
        let mut x = DMatrix::zeros(2, 2);
        x[(1, 1)] = f64::NAN;
        assert!(matches!(
            LabeledDataset::new(x, vec![0, 1]),
            Err(Error::NonFinite { .. })
        ));
    }

    #[test]
    fn eig_of_identity_and_diagonal() {
        let eig = sym_eig(&DMatrix::identity(3, 3)).unwrap();
        assert_eq!(eig.values.as_slice(), &[1.0, 1.0, 1.0]);

        let eig = sym_eig(&dmatrix![1.0, 0.0; 0.0, 3.0]).unwrap();
        assert_eq!(eig.values.as_slice(), &[3.0, 1.0]);
        assert!((eig.vectors[(1, 0)].abs() - 1.0).abs() < 1e-15);
        assert!((eig.vectors[(0, 1)].abs() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn eig_rejects_nan() {
        let mut m = DMatrix::identity(2, 2);
        m[(0, 1)] = f64::INFINITY;
        assert_eq!(sym_eig(&m), Err(Error::NonFinite { what: "matrix" }));
    }

    #[test]
    fn rank_two_matrix_has_exact_zero_eigenvalues() {
        let a = DMatrix::from_fn(5, 2, |i, j| ((i * 3 + j * 7) % 5) as f64 - 1.5 + 0.25 * j as f64);
        let s = &a * a.transpose();
        let eig = sym_eig(&s).unwrap();
        assert_eq!(eig.rank(), 2);
        assert_eq!(eig.values.iter().filter(|&&l| l == 0.0).count(), 3);
    }

    #[test]
    fn calibration_closed_forms() {
        let k = calibrate_mean_scale(&DMatrix::identity(1, 1), 4.0).unwrap();
        assert!((k - 1.0).abs() < 1e-15);

        // Sherman–Morrison: 1ᵀΣ⁻¹1 = p / (0.9 + 0.1 p) for Σ = 0.9 I + 0.1 11ᵀ
        let p = 100;
        let sigma = DMatrix::from_fn(p, p, |i, j| if i == j { 1.0 } else { 0.1 });
        let k = calibrate_mean_scale(&sigma, 0.5).unwrap();
        let quad = p as f64 / (0.9 + 0.1 * p as f64);
        assert!((k - (0.5 / (4.0 * quad)).sqrt()).abs() < 1e-14);
        assert!((k - 0.11673).abs() < 5e-6);

        let k2 = calibrate_mean_scale(&sigma, 1.0).unwrap();
        assert!((k2 / k - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn calibration_rejects_singular_sigma() {
        let sigma = DMatrix::from_element(2, 2, 1.0);
        assert_eq!(calibrate_mean_scale(&sigma, 1.0), Err(Error::SingularSigma));
    }
}
