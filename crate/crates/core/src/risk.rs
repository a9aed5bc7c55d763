//! Data-only estimate of the misclassification rate of the nonlinear-precision
//! discriminant, evaluated from the spectrum of `S` at `z = −γ`.

use std::io::Write;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::stats::{log_ratio, SymEig};

/// Standard normal CDF via the complementary error function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Spectral traces of the resolvent `Q = (S − zI)⁻¹` at `z = −γ`, with
/// `m = m0 − m1` and `c_d = u_dᵀm`:
///
/// * `t_k = (1/ñ) Σ λ/(λ+γ)^k` for `k = 1, 2, 3`
/// * `q_k = Σ λc²/(λ+γ)^(k+1)` for `k = 1, 2, 3`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolventStats {
    pub gamma: f64,
    pub z: f64,
    pub n_tilde: f64,
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
    pub q1: f64,
    pub q2: f64,
    pub q3: f64,
}

/// Statistics from eigenvalues and the projected mean difference `c = Uᵀm`.
pub fn resolvent_stats_projected(values: &DVector<f64>, c: &DVector<f64>, n_tilde: usize, gamma: f64) -> ResolventStats {
    let (mut t1, mut t2, mut t3) = (0.0, 0.0, 0.0);
    let (mut q1, mut q2, mut q3) = (0.0, 0.0, 0.0);
    for (&l, &cd) in values.iter().zip(c.iter()) {
        if l == 0.0 {
            continue;
        }
        let r = 1.0 / (l + gamma);
        let a = l * r;
        t1 += a;
        t2 += a * r;
        t3 += a * r * r;
        let b = l * cd * cd * r * r;
        q1 += b;
        q2 += b * r;
        q3 += b * r * r;
    }
    let nt = n_tilde as f64;
    ResolventStats {
        gamma,
        z: -gamma,
        n_tilde: nt,
        t1: t1 / nt,
        t2: t2 / nt,
        t3: t3 / nt,
        q1,
        q2,
        q3,
    }
}

pub fn resolvent_stats(eig: &SymEig, m: &DVector<f64>, n_tilde: usize, gamma: f64) -> ResolventStats {
    resolvent_stats_projected(&eig.values, &eig.project(m), n_tilde, gamma)
}

/// Which normalized trace enters the numerator of `ê`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EhatVariant {
    /// `ê = t1/(1 − t1)`
    #[default]
    TraceRatio,
    /// `ê = t2/(1 − t1)`
    SecondTrace,
}

/// Assembly of the consistent estimate of `D`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DcForm {
    /// `z²(1+ê)⁴q3 + 2z(1+ê)²q2 + ((1+ê)² + 2zê′(1+ê))q1`
    #[default]
    Expanded,
    /// Second mixed derivative of `(1+ê₁)(1+ê₂)·mᵀQ₁SQ₂m`:
    /// `z²[(1+ê)²q3 + 2ê′(1+ê)q2 + ê′²q1] + 2z[(1+ê)²q2 + ê′(1+ê)q1] + (1+ê)²q1`
    ResolventDerivative,
}

/// Scale of the bias term `θ/nᵢ` added to the score mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BiasScale {
    /// `θ = ñ·θ̂_G`, the estimate of `tr[ΣH̃]`.
    #[default]
    Trace,
    /// `θ = θ̂_G` as a trace normalized by `ñ`.
    Normalized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RiskConfig {
    pub e_hat: EhatVariant,
    pub d_c: DcForm,
    pub bias: BiasScale,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EQuantities {
    pub e_hat: f64,
    pub e_hat_prime: f64,
    pub x_hat: f64,
    pub x_hat_prime: f64,
}

/// `ê`, its `z`-derivative (from `dQ/dz = Q²`), `x̂ = 1/(1+ê)` and `x̂′`.
pub fn e_quantities(stats: &ResolventStats, variant: EhatVariant) -> Result<EQuantities> {
    let t1 = stats.t1;
    if !(t1 < 1.0) || !t1.is_finite() {
        return Err(Error::DegenerateTrace { t1 });
    }
    let u = 1.0 - t1;
    let (e_hat, e_hat_prime) = match variant {
        EhatVariant::TraceRatio => (t1 / u, stats.t2 / (u * u)),
        EhatVariant::SecondTrace => (
            stats.t2 / u,
            (2.0 * stats.t3 * u + stats.t2 * stats.t2) / (u * u),
        ),
    };
    let x_hat = 1.0 / (1.0 + e_hat);
    let x_hat_prime = -e_hat_prime * x_hat * x_hat;
    Ok(EQuantities {
        e_hat,
        e_hat_prime,
        x_hat,
        x_hat_prime,
    })
}

/// `θ̂_G = (ê′(x̂ − zx̂′) − t2) / (ê′(1+ê)⁻²)`.
pub fn theta_g_hat(stats: &ResolventStats, eq: &EQuantities) -> Result<f64> {
    if !(eq.e_hat_prime > 0.0) {
        return Err(Error::DegeneratePrime);
    }
    let e1 = 1.0 + eq.e_hat;
    let numer = eq.e_hat_prime * (eq.x_hat - stats.z * eq.x_hat_prime) - stats.t2;
    Ok(numer * e1 * e1 / eq.e_hat_prime)
}

/// Consistent estimate of `D = mᵀH̃ΣH̃m`. The sign is not checked here.
pub fn d_consistent(stats: &ResolventStats, eq: &EQuantities, form: DcForm) -> f64 {
    let z = stats.z;
    let e1 = 1.0 + eq.e_hat;
    let ep = eq.e_hat_prime;
    let (q1, q2, q3) = (stats.q1, stats.q2, stats.q3);
    match form {
        DcForm::Expanded => {
            z * z * e1.powi(4) * q3 + 2.0 * z * e1 * e1 * q2 + (e1 * e1 + 2.0 * z * ep * e1) * q1
        }
        DcForm::ResolventDerivative => {
            z * z * (e1 * e1 * q3 + 2.0 * ep * e1 * q2 + ep * ep * q1)
                + 2.0 * z * (e1 * e1 * q2 + ep * e1 * q1)
                + e1 * e1 * q1
        }
    }
}

/// Every estimated quantity at one `γ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConsistentRisk {
    pub gamma: f64,
    pub e_hat: f64,
    pub e_hat_prime: f64,
    pub x_hat: f64,
    pub x_hat_prime: f64,
    pub theta_g_hat: f64,
    pub d_c: f64,
    pub eps0_hat: f64,
    pub eps1_hat: f64,
    pub eps_hat: f64,
}

/// Estimated conditional errors at one `γ`, using `G(m0) = ½q1`,
/// `G(m1) = −½q1` and the threshold `log(n1/n0)`.
pub fn epsilon_hat(stats: &ResolventStats, n0: usize, n1: usize, config: RiskConfig) -> Result<ConsistentRisk> {
    let eq = e_quantities(stats, config.e_hat)?;
    let theta = theta_g_hat(stats, &eq)?;
    let d_c = d_consistent(stats, &eq, config.d_c);
    if !(d_c > 0.0) || !d_c.is_finite() {
        return Err(Error::DegenerateD { value: d_c });
    }
    let bias = match config.bias {
        BiasScale::Trace => stats.n_tilde * theta,
        BiasScale::Normalized => theta,
    };
    let (n0f, n1f) = (n0 as f64, n1 as f64);
    let tau = log_ratio(n0, n1);
    let g0 = 0.5 * stats.q1;
    let g1 = -0.5 * stats.q1;
    let sd = d_c.sqrt();
    let eps0_hat = normal_cdf((-g0 + bias / n0f + tau) / sd);
    let eps1_hat = normal_cdf((g1 + bias / n1f - tau) / sd);
    let n = n0f + n1f;
    Ok(ConsistentRisk {
        gamma: stats.gamma,
        e_hat: eq.e_hat,
        e_hat_prime: eq.e_hat_prime,
        x_hat: eq.x_hat,
        x_hat_prime: eq.x_hat_prime,
        theta_g_hat: theta,
        d_c,
        eps0_hat,
        eps1_hat,
        eps_hat: n0f / n * eps0_hat + n1f / n * eps1_hat,
    })
}

/// `ε̂` over a grid; points whose estimate is undefined are kept with the error.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskCurve {
    pub points: Vec<(f64, std::result::Result<ConsistentRisk, Error>)>,
}

impl RiskCurve {
    pub fn evaluate(
        values: &DVector<f64>,
        c: &DVector<f64>,
        n0: usize,
        n1: usize,
        grid: &[f64],
        config: RiskConfig,
    ) -> Self {
        let n_tilde = n0 + n1 - 2;
        let points = grid
            .iter()
            .map(|&g| {
                let stats = resolvent_stats_projected(values, c, n_tilde, g);
                (g, epsilon_hat(&stats, n0, n1, config))
            })
            .collect();
        Self { points }
    }

    /// Grid index of the smallest `ε̂`, earliest (smallest `γ` on an increasing grid) on ties.
    pub fn argmin(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, (_, r)) in self.points.iter().enumerate() {
            if let Ok(r) = r {
                if best.map_or(true, |(_, b)| r.eps_hat < b) {
                    best = Some((i, r.eps_hat));
                }
            }
        }
        best.map(|(i, _)| i)
    }

    pub fn degenerate_count(&self) -> usize {
        self.points.iter().filter(|(_, r)| r.is_err()).count()
    }

    pub fn summary(&self) -> Vec<RiskPoint> {
        self.points
            .iter()
            .map(|(g, r)| match r {
                Ok(r) => RiskPoint {
                    gamma: *g,
                    estimate: Some([r.eps_hat, r.eps0_hat, r.eps1_hat]),
                },
                Err(_) => RiskPoint {
                    gamma: *g,
                    estimate: None,
                },
            })
            .collect()
    }
}

/// One row of an exported risk curve; `estimate` is `[ε̂, ε̂₀, ε̂₁]`, absent
/// where the estimate is undefined.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskPoint {
    pub gamma: f64,
    pub estimate: Option<[f64; 3]>,
}

impl RiskPoint {
    pub fn eps_hat(&self) -> Option<f64> {
        self.estimate.map(|e| e[0])
    }
}

/// CSV with columns `gamma, eps_hat, eps0_hat, eps1_hat, degenerate_flag`.
pub fn write_risk_csv<W: Write>(points: &[RiskPoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(["gamma", "eps_hat", "eps0_hat", "eps1_hat", "degenerate_flag"])
        .map_err(io)?;
    for pt in points {
        let mut row = vec![format!("{:e}", pt.gamma)];
        match pt.estimate {
            Some(e) => {
                row.extend(e.iter().map(|v| format!("{v:.12e}")));
                row.push("0".into());
            }
            None => {
                row.extend(std::iter::repeat(String::new()).take(3));
                row.push("1".into());
            }
        }
        w.write_record(&row).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dvector, DMatrix};

    use crate::stats::sym_eig;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    fn fixture() -> ResolventStats {
        let eig = sym_eig(&DMatrix::identity(2, 2)).unwrap();
        resolvent_stats(&eig, &dvector![1.0, -1.0], 4, 1.0)
    }

    #[test]
    fn normal_cdf_values() {
        assert_eq!(normal_cdf(0.0), 0.5);
        assert!((normal_cdf(1.959964) - 0.975).abs() < 1e-6);
        // frozen from a 50-digit evaluation
        assert!((normal_cdf(-1.0) - 0.15865525393145705).abs() < 1e-15);
        assert!((normal_cdf(-8.0) - 6.220960574271784e-16).abs() < 1e-27);
        assert!((normal_cdf(-3.5) - 2.3262907903552504e-4).abs() < 1e-16);
        assert!((normal_cdf(2.5) - 0.9937903346742238).abs() < 1e-15);
        for x in [0.1, 0.77, 2.5, 6.0] {
            assert!((normal_cdf(x) + normal_cdf(-x) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn hand_fixture_stats() {
        let s = fixture();
        assert!(close(s.t1, 0.25, 1e-15));
        assert!(close(s.t2, 0.125, 1e-15));
        assert!(close(s.q1, 0.5, 1e-15));
        assert!(close(s.q2, 0.25, 1e-15));
        assert!(close(s.q3, 0.125, 1e-15));
    }

    #[test]
    fn hand_fixture_estimates() {
        let s = fixture();
        let eq = e_quantities(&s, EhatVariant::TraceRatio).unwrap();
        assert!(close(eq.e_hat, 1.0 / 3.0, 1e-15));
        assert!(close(eq.e_hat_prime, 2.0 / 9.0, 1e-15));
        assert!(close(eq.x_hat, 0.75, 1e-15));
        assert!(close(eq.x_hat_prime, -0.125, 1e-15));
        assert!(close(eq.x_hat - s.z * eq.x_hat_prime, 0.625, 1e-15));
        assert!(close(theta_g_hat(&s, &eq).unwrap(), 1.0 / 9.0, 1e-14));
        for form in [DcForm::Expanded, DcForm::ResolventDerivative] {
            assert!(close(d_consistent(&s, &eq, form), 8.0 / 81.0, 1e-14));
        }
    }

    #[test]
    fn hand_fixture_error() {
        let s = fixture();
        let literal = RiskConfig {
            bias: BiasScale::Normalized,
            ..RiskConfig::default()
        };
        let r = epsilon_hat(&s, 3, 3, literal).unwrap();
        let expected = normal_cdf((-0.25 + 1.0 / 27.0) / (8.0f64 / 81.0).sqrt());
        assert!(close(r.eps0_hat, expected, 1e-14));
        assert_eq!(r.eps0_hat, r.eps1_hat);
        assert!((r.eps0_hat - 0.249).abs() < 5e-4);

        let r = epsilon_hat(&s, 3, 3, RiskConfig::default()).unwrap();
        let expected = normal_cdf((-0.25 + 4.0 / 27.0) / (8.0f64 / 81.0).sqrt());
        assert!(close(r.eps_hat, expected, 1e-14));
    }

    #[test]
    fn zero_spectrum() {
        let s = resolvent_stats_projected(&dvector![0.0, 0.0], &dvector![1.0, 2.0], 5, 0.3);
        assert_eq!((s.t1, s.t2, s.t3, s.q1, s.q2, s.q3), (0.0, 0.0, 0.0, 0.0, 0.0, 0.0));
        let eq = e_quantities(&s, EhatVariant::TraceRatio).unwrap();
        assert_eq!((eq.e_hat, eq.x_hat), (0.0, 1.0));
        assert_eq!(theta_g_hat(&s, &eq), Err(Error::DegeneratePrime));
    }

    #[test]
    fn large_gamma_limit() {
        let s = resolvent_stats_projected(&dvector![3.0, 1.0], &dvector![1.0, 2.0], 5, 1e12);
        for v in [s.t1, s.t2, s.t3, s.q1, s.q2, s.q3] {
            assert!(v.abs() < 1e-11);
        }
    }

    #[test]
    fn zero_mean_difference_gives_zero_d() {
        let s = resolvent_stats_projected(&dvector![3.0, 1.0], &dvector![0.0, 0.0], 5, 1.0);
        let eq = e_quantities(&s, EhatVariant::TraceRatio).unwrap();
        assert_eq!(d_consistent(&s, &eq, DcForm::Expanded), 0.0);
        assert!(matches!(
            epsilon_hat(&s, 3, 4, RiskConfig::default()),
            Err(Error::DegenerateD { .. })
        ));
    }

    #[test]
    fn isotropic_boundary_degeneracy() {
        let p = 6;
        let eig = sym_eig(&DMatrix::identity(p, p)).unwrap();
        let m = DVector::from_fn(p, |i, _| i as f64 - 2.0);
        for g in [0.01, 0.5, 1.0, 30.0] {
            let s = resolvent_stats(&eig, &m, p, g);
            let eq = e_quantities(&s, EhatVariant::TraceRatio).unwrap();
            for form in [DcForm::Expanded, DcForm::ResolventDerivative] {
                assert!(d_consistent(&s, &eq, form).abs() < 1e-12 * (1.0 + s.q1 / (g * g)));
            }
        }
    }

    #[test]
    fn degenerate_trace_rejected() {
        let mut s = fixture();
        s.t1 = 1.0;
        assert_eq!(
            e_quantities(&s, EhatVariant::TraceRatio),
            Err(Error::DegenerateTrace { t1: 1.0 })
        );
    }

    #[test]
    fn alternate_variant_derivative_matches_difference() {
        let values = dvector![4.0, 2.0, 0.5, 0.0];
        let c = dvector![0.3, -1.0, 0.7, 2.0];
        let g = 0.8;
        let h = 1e-5;
        let at = |gamma: f64| {
            e_quantities(&resolvent_stats_projected(&values, &c, 9, gamma), EhatVariant::SecondTrace).unwrap()
        };
        // z = −γ, so d/dz = −d/dγ
        let fd = -(at(g + h).e_hat - at(g - h).e_hat) / (2.0 * h);
        assert!(close(at(g).e_hat_prime, fd, 1e-7));
    }

    #[test]
    fn curve_argmin_and_csv() {
        let values = dvector![3.0, 1.0, 0.2];
        let c = dvector![1.0, 0.5, -0.2];
        let grid = [0.1, 1.0, 10.0];
        let curve = RiskCurve::evaluate(&values, &c, 4, 5, &grid, RiskConfig::default());
        let best = curve.argmin().unwrap();
        let min = curve.points.iter().filter_map(|(_, r)| r.as_ref().ok()).map(|r| r.eps_hat).fold(f64::INFINITY, f64::min);
        assert_eq!(curve.points[best].1.as_ref().unwrap().eps_hat, min);

        let mut buf = Vec::new();
        write_risk_csv(&curve.summary(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("gamma,eps_hat,eps0_hat,eps1_hat,degenerate_flag\n"));
        assert_eq!(text.lines().count(), 4);
    }

    #[test]
    fn curve_marks_degenerate_points() {
        let values = dvector![2.0, 1.0];
        let c = dvector![0.0, 0.0];
        let curve = RiskCurve::evaluate(&values, &c, 3, 3, &[1.0, 2.0], RiskConfig::default());
        assert_eq!(curve.degenerate_count(), 2);
        assert_eq!(curve.argmin(), None);
        let mut buf = Vec::new();
        write_risk_csv(&curve.summary(), &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().contains(",,,1"));
    }
}
