//! Deterministic equivalents of the score moments for a known population:
//! the fixed points `e(z)` and `b(z)`, the quadratic functional `η_Θ`, and the
//! limiting `G̃ᵢ`, `D̃` and total error `ε̄`.
//!
//! Every quantity commutes with `Σ` and is evaluated in its eigenbasis. With
//! `σ_d` the eigenvalues of `Σ`: `R = (xΣ − zI)⁻¹`, `P = (wΣ − zI)⁻¹`,
//! `φ = (1/ñ)tr[Σ²R²]`, `φ̃ = x²`, and `ξ_{A,B} = (1/ñ)tr[ΣAΣB]`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::risk::normal_cdf;
use crate::stats::{log_ratio, sym_eig, PopulationModel, SymEig};

pub const FIXED_POINT_TOL: f64 = 1e-12;
pub const FIXED_POINT_MAX_ITER: usize = 10_000;

/// Normalization of the aspect ratio entering `b(z)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CConvention {
    /// `c = p/ñ`
    #[default]
    NTilde,
    /// `c = p/n`
    N,
}

/// Assembly of the first (two-resolvent trace) part of `η_Θ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EtaForm {
    /// `z`-derivative of the two-resolvent identity, with the first-order
    /// terms `T2/d + 2z[((1 − zx′/x)T3 − (x′/x)T2)/d + a·T2/d²]`.
    #[default]
    Derived,
    /// The `φφ̃`-prefactor grouping of the first-order terms.
    Display,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct AsymptoticConfig {
    pub eta: EtaForm,
    pub c: CConvention,
}

/// Root of an increasing function on `[lo, hi]` with `h(lo) < 0 < h(hi)`, by
/// false position with the Illinois modification. Stops as soon as
/// `accept(x)` returns the fixed-point residual below tolerance.
fn bracketed_root(
    h: impl Fn(f64) -> f64,
    accept: impl Fn(f64) -> (bool, f64),
    mut lo: f64,
    mut hi: f64,
) -> Result<f64> {
    let (mut flo, mut fhi) = (h(lo), h(hi));
    if !(flo < 0.0 && fhi > 0.0) {
        return Err(Error::NoConvergence {
            iterations: 0,
            residual: flo.min(fhi),
        });
    }
    let mut side = 0i8;
    let mut residual = f64::INFINITY;
    for _ in 0..FIXED_POINT_MAX_ITER {
        let mut x = (lo * fhi - hi * flo) / (fhi - flo);
        if !(x > lo && x < hi) {
            x = 0.5 * (lo + hi);
        }
        let (ok, r) = accept(x);
        residual = r;
        if ok || x <= lo || x >= hi {
            return Ok(x);
        }
        let fx = h(x);
        if !fx.is_finite() {
            break;
        }
        if fx < 0.0 {
            lo = x;
            flo = fx;
            if side == -1 {
                fhi *= 0.5;
            }
            side = -1;
        } else if fx > 0.0 {
            hi = x;
            fhi = fx;
            if side == 1 {
                flo *= 0.5;
            }
            side = 1;
        } else {
            return Ok(x);
        }
    }
    Err(Error::NoConvergence {
        iterations: FIXED_POINT_MAX_ITER,
        residual,
    })
}

/// `e = (1/ñ) Σ σ/(xσ − z)` with `x = 1/(1+e)`; returns `(e, x)`.
///
/// The map `e ↦ (1/ñ) Σ σ(1+e)/(σ − z(1+e))` is increasing and concave with a
/// single crossing in `[0, (1/ñ)Σσ/|z|]`; the crossing is bracketed and the
/// result has relative fixed-point residual at most `1e−12`.
pub fn solve_e(sigma_eigs: &[f64], z: f64, n_tilde: f64) -> Result<(f64, f64)> {
    check_z(z)?;
    let f = |e: f64| {
        let x = 1.0 / (1.0 + e);
        sigma_eigs.iter().map(|&s| s / (x * s - z)).sum::<f64>() / n_tilde
    };
    let hi = sigma_eigs.iter().sum::<f64>() / (n_tilde * -z);
    if hi == 0.0 {
        return Ok((0.0, 1.0));
    }
    let accept = |e: f64| {
        let r = f(e) - e;
        (r.abs() <= FIXED_POINT_TOL * e, r)
    };
    let e = bracketed_root(|e| e - f(e), accept, 0.0, hi * (1.0 + 1e-12))?;
    Ok((e, 1.0 / (1.0 + e)))
}

/// `b = (1/p) Σ 1/(σw − z)` with `w = 1 − c − czb`; returns `(b, w)`.
///
/// Solved through `w ∈ (0, 1]`, where `w − (1 − c − cz·b(w))` is increasing.
/// For `c = p/ñ` the solution satisfies `w = x`.
pub fn solve_b(sigma_eigs: &[f64], z: f64, c: f64) -> Result<(f64, f64)> {
    check_z(z)?;
    let p = sigma_eigs.len() as f64;
    let b_of = |w: f64| sigma_eigs.iter().map(|&s| 1.0 / (s * w - z)).sum::<f64>() / p;
    let w_of = |b: f64| 1.0 - c - c * z * b;
    if c == 0.0 {
        return Ok((b_of(1.0), 1.0));
    }
    let accept = |w: f64| {
        let b = b_of(w);
        let r = b_of(w_of(b)) - b;
        (r.abs() <= FIXED_POINT_TOL * b, r)
    };
    let w = bracketed_root(|w| w - w_of(b_of(w)), accept, 0.0, 1.0)?;
    let b = b_of(w);
    Ok((b, w_of(b)))
}

fn check_z(z: f64) -> Result<()> {
    if z < 0.0 && z.is_finite() {
        Ok(())
    } else {
        Err(Error::DomainError {
            gamma: -z,
            interval: "(0, inf)",
        })
    }
}

/// Step for central differences at `z`: `1e−5·max(1, |z|)`, reduced to
/// `|z|/10` when that would cross zero.
pub fn fd_step(z: f64) -> f64 {
    (1e-5 * z.abs().max(1.0)).min(0.1 * z.abs())
}

/// Richardson-extrapolated central difference `(4D(h/2) − D(h))/3`.
pub fn richardson(f: impl Fn(f64) -> Result<f64>, z: f64, h: f64) -> Result<f64> {
    let d = |h: f64| -> Result<f64> { Ok((f(z + h)? - f(z - h)?) / (2.0 * h)) };
    Ok((4.0 * d(0.5 * h)? - d(h)?) / 3.0)
}

/// Fixed points, their `z`-derivatives and the resolvent traces at one `z`.
#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticState {
    pub z: f64,
    pub p: usize,
    pub n0: usize,
    pub n1: usize,
    pub n_tilde: f64,
    pub c: f64,
    pub e: f64,
    pub x: f64,
    pub e_prime: f64,
    pub x_prime: f64,
    pub phi: f64,
    pub phi_tilde: f64,
    pub phi_prime: f64,
    pub phi_tilde_prime: f64,
    pub b: f64,
    pub w: f64,
    pub w_prime: f64,
    pub xi_pp: f64,
    pub xi_pp_prime: f64,
    pub xi_p_prime_p_prime: f64,
    /// Eigenvalues of `R`, `P` and `P′` in the basis of `Σ`.
    pub r: DVector<f64>,
    pub p_res: DVector<f64>,
    pub p_res_prime: DVector<f64>,
}

/// Limits of the score moments at one `γ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeterministicRisk {
    pub gamma: f64,
    pub g_tilde_0: f64,
    pub g_tilde_1: f64,
    pub d_tilde: f64,
    pub eps_bar: f64,
}

/// A population with fixed class counts, decomposed once for repeated
/// evaluation over `z`.
#[derive(Debug, Clone)]
pub struct AsymptoticModel {
    pub eig: Arc<SymEig>,
    /// `Vᵀμ` with `μ = μ0 − μ1`.
    pub mu_coords: DVector<f64>,
    pub n0: usize,
    pub n1: usize,
    pub config: AsymptoticConfig,
}

fn phi_of(sigma: &[f64], x: f64, z: f64, n_tilde: f64) -> f64 {
    sigma.iter().map(|&s| (s / (x * s - z)).powi(2)).sum::<f64>() / n_tilde
}

impl AsymptoticModel {
    pub fn new(pop: &PopulationModel, n0: usize, n1: usize, config: AsymptoticConfig) -> Result<Self> {
        if n0 + n1 < 3 || n0 == 0 || n1 == 0 {
            return Err(Error::InvalidArgument(format!("class counts ({n0}, {n1}) are too small")));
        }
        let eig = sym_eig(&pop.sigma)?;
        if eig.values.iter().any(|&s| s <= 0.0) {
            return Err(Error::SingularSigma);
        }
        let mu_coords = eig.project(&pop.mean_diff());
        Ok(Self {
            eig: Arc::new(eig),
            mu_coords,
            n0,
            n1,
            config,
        })
    }

    pub fn p(&self) -> usize {
        self.eig.p()
    }

    pub fn n_tilde(&self) -> f64 {
        (self.n0 + self.n1 - 2) as f64
    }

    pub fn aspect(&self) -> f64 {
        let p = self.p() as f64;
        match self.config.c {
            CConvention::NTilde => p / self.n_tilde(),
            CConvention::N => p / (self.n0 + self.n1) as f64,
        }
    }

    fn sigma(&self) -> &[f64] {
        self.eig.values.as_slice()
    }

    pub fn state(&self, z: f64) -> Result<AsymptoticState> {
        let sigma = self.sigma();
        let nt = self.n_tilde();
        let c = self.aspect();
        let (e, x) = solve_e(sigma, z, nt)?;
        let (b, w) = solve_b(sigma, z, c)?;
        let h = fd_step(z);
        let e_prime = richardson(|zz| Ok(solve_e(sigma, zz, nt)?.0), z, h)?;
        let w_prime = richardson(|zz| Ok(solve_b(sigma, zz, c)?.1), z, h)?;
        let phi_prime = richardson(
            |zz| {
                let (_, xx) = solve_e(sigma, zz, nt)?;
                Ok(phi_of(sigma, xx, zz, nt))
            },
            z,
            h,
        )?;
        let x_prime = -e_prime * x * x;
        let phi = phi_of(sigma, x, z, nt);

        let ev = &self.eig.values;
        let r = ev.map(|s| 1.0 / (x * s - z));
        let p_res = ev.map(|s| 1.0 / (w * s - z));
        let p_res_prime = DVector::from_fn(ev.len(), |d, _| (1.0 - w_prime * ev[d]) * p_res[d] * p_res[d]);
        let xi = |a: &DVector<f64>, bb: &DVector<f64>| {
            ev.iter().zip(a.iter()).zip(bb.iter()).map(|((s, a), b)| s * s * a * b).sum::<f64>() / nt
        };
        Ok(AsymptoticState {
            z,
            p: self.p(),
            n0: self.n0,
            n1: self.n1,
            n_tilde: nt,
            c,
            e,
            x,
            e_prime,
            x_prime,
            phi,
            phi_tilde: x * x,
            phi_prime,
            phi_tilde_prime: 2.0 * x * x_prime,
            b,
            w,
            w_prime,
            xi_pp: xi(&p_res, &p_res),
            xi_pp_prime: xi(&p_res, &p_res_prime),
            xi_p_prime_p_prime: xi(&p_res_prime, &p_res_prime),
            r,
            p_res,
            p_res_prime,
        })
    }

    /// Diagonal of `VᵀΘV` for a symmetric `Θ`.
    pub fn theta_coords(&self, theta: &DMatrix<f64>) -> Result<DVector<f64>> {
        let p = self.p();
        if theta.nrows() != p || theta.ncols() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: theta.nrows(),
            });
        }
        let v = &self.eig.vectors;
        let tv = theta * v;
        Ok(DVector::from_fn(p, |d, _| v.column(d).dot(&tv.column(d))))
    }

    /// `η_Θ` for a symmetric `Θ`.
    pub fn eta(&self, theta: &DMatrix<f64>, state: &AsymptoticState) -> Result<f64> {
        Ok(eta_diag(&self.theta_coords(theta)?, &self.eig.values, state, self.config.eta))
    }

    pub fn deterministic_risk(&self, gamma: f64) -> Result<DeterministicRisk> {
        let z = -gamma;
        let st = self.state(z)?;
        let sigma = &self.eig.values;
        let form = self.config.eta;
        let (n0, n1) = (self.n0 as f64, self.n1 as f64);

        let mu_sq = self.mu_coords.map(|v| v * v);
        let mu_term: f64 = (0..sigma.len()).map(|d| mu_sq[d] * sigma[d] * st.r[d] * st.r[d]).sum();
        let trace_term: f64 = (0..sigma.len()).map(|d| (sigma[d] * st.r[d]).powi(2)).sum();
        let scale = 0.5 * (st.x - st.x_prime * z);
        let prior_gap = 1.0 / n1 - 1.0 / n0;
        let g_tilde_0 = scale * (mu_term + prior_gap * trace_term);
        let g_tilde_1 = scale * (-mu_term + prior_gap * trace_term);

        let eta_mu = eta_diag(&mu_sq, sigma, &st, form);
        let eta_sigma = eta_diag(sigma, sigma, &st, form);
        let d_tilde = eta_mu + (1.0 / n1 + 1.0 / n0) * eta_sigma;
        if !(d_tilde > 0.0) || !d_tilde.is_finite() {
            return Err(Error::DegenerateD { value: d_tilde });
        }
        let tau = log_ratio(self.n0, self.n1);
        let sd = d_tilde.sqrt();
        let n = n0 + n1;
        let eps_bar = n0 / n * normal_cdf((-g_tilde_0 + tau) / sd) + n1 / n * normal_cdf((g_tilde_1 - tau) / sd);
        Ok(DeterministicRisk {
            gamma,
            g_tilde_0,
            g_tilde_1,
            d_tilde,
            eps_bar,
        })
    }
}

/// `η_Θ` from the diagonal `θ_d` of `Θ` in the eigenbasis of `Σ`.
pub fn eta_diag(theta: &DVector<f64>, sigma: &DVector<f64>, st: &AsymptoticState, form: EtaForm) -> f64 {
    let z = st.z;
    let tr = |f: &dyn Fn(usize) -> f64| -> f64 { (0..sigma.len()).map(|d| theta[d] * sigma[d] * f(d)).sum() };
    let r = &st.r;
    let (pv, pp) = (&st.p_res, &st.p_res_prime);
    let t2 = tr(&|d| r[d] * r[d]);
    let t3 = tr(&|d| r[d] * r[d] * r[d]);
    let t_pp = tr(&|d| pv[d] * pv[d]);
    let t_ppp = tr(&|d| pv[d] * pp[d]);
    let t_pppp = tr(&|d| pp[d] * pp[d]);

    let (w, wp) = (st.w, st.w_prime);
    let d = 1.0 - w * w * st.xi_pp;
    let a = w * wp * st.xi_pp + w * w * st.xi_pp_prime;
    let b = wp * wp * st.xi_pp + 2.0 * w * wp * st.xi_pp_prime + w * w * st.xi_p_prime_p_prime;
    let second = z * z * (t_pppp / d + 2.0 * a * t_ppp / (d * d) + t_pp * (2.0 * a * a + b * d) / (d * d * d));

    let ratio = st.x_prime / st.x;
    let first = match form {
        EtaForm::Derived => {
            let a1 = t2 / d;
            let a2 = ((1.0 - z * ratio) * t3 - ratio * t2) / d + a * t2 / (d * d);
            a1 + 2.0 * z * a2
        }
        EtaForm::Display => {
            let k = 1.0 - st.phi * st.phi_tilde;
            let lead = 1.0 / k
                - (st.phi * st.phi_tilde_prime + st.phi_prime * st.phi_tilde + 2.0 * ratio * k) / (k * k) * z;
            lead * t2 + 2.0 * (z - ratio * z * z) / (k * k) * t3
        }
    };
    first + second
}

/// Deterministic risk of a population at one `γ`.
pub fn deterministic_risk(
    pop: &PopulationModel,
    n0: usize,
    n1: usize,
    gamma: f64,
    config: AsymptoticConfig,
) -> Result<DeterministicRisk> {
    AsymptoticModel::new(pop, n0, n1, config)?.deterministic_risk(gamma)
}

/// CSV with columns `gamma, G_tilde_0, G_tilde_1, D_tilde, eps_bar`.
pub fn write_asymptotic_csv<W: std::io::Write>(rows: &[DeterministicRisk], out: W) -> Result<()> {
    let io = |e: csv::Error| Error::Io(e.to_string());
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["gamma", "G_tilde_0", "G_tilde_1", "D_tilde", "eps_bar"])
        .map_err(io)?;
    for r in rows {
        w.write_record([
            format!("{:e}", r.gamma),
            format!("{:.12e}", r.g_tilde_0),
            format!("{:.12e}", r.g_tilde_1),
            format!("{:.12e}", r.d_tilde),
            format!("{:.12e}", r.eps_bar),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{make_population, CovKind, CovModel};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1e-300)
    }

    #[test]
    fn isotropic_closed_forms() {
        let ones = vec![1.0; 10];
        let (e, x) = solve_e(&ones, -1.0, 10.0).unwrap();
        assert!(close(e, (5f64.sqrt() - 1.0) / 2.0, 1e-12));
        assert!(close(x, 1.0 / (1.0 + e), 1e-15));

        let (e, _) = solve_e(&ones, -1.0, 20.0).unwrap();
        let root = (-1.5 + (1.5f64 * 1.5 + 2.0).sqrt()) / 2.0;
        assert!(close(e, root, 1e-12));
        assert!((e - 0.28078).abs() < 1e-5);
    }

    #[test]
    fn large_negative_z_limit() {
        let sigma = vec![2.0, 1.0, 0.5];
        let (e, x) = solve_e(&sigma, -1e9, 10.0).unwrap();
        assert!(e < 1e-9);
        assert!((x - 1.0).abs() < 1e-9);
    }

    #[test]
    fn residual_at_solution() {
        let sigma: Vec<f64> = (1..=40).map(|i| 0.1 * i as f64).collect();
        for z in [-1e-4, -0.01, -1.0, -50.0] {
            let (e, x) = solve_e(&sigma, z, 30.0).unwrap();
            let f: f64 = sigma.iter().map(|&s| s / (x * s - z)).sum::<f64>() / 30.0;
            assert!((f - e).abs() <= 1e-10 * e.max(1.0));
            let (b, w) = solve_b(&sigma, z, 40.0 / 30.0).unwrap();
            let g: f64 = sigma.iter().map(|&s| 1.0 / (s * w - z)).sum::<f64>() / 40.0;
            assert!((g - b).abs() <= 1e-10 * b.max(1.0));
        }
    }

    #[test]
    fn w_equals_x_for_ntilde_convention() {
        let sigma: Vec<f64> = (1..=25).map(|i| 1.0 + 0.3 * (i as f64).sin()).collect();
        for z in [-0.05, -1.0, -12.0] {
            let (_, x) = solve_e(&sigma, z, 18.0).unwrap();
            let (_, w) = solve_b(&sigma, z, 25.0 / 18.0).unwrap();
            assert!(close(w, x, 1e-10));
        }
    }

    #[test]
    fn decoupled_b() {
        let sigma = vec![3.0, 1.0];
        let (b, w) = solve_b(&sigma, -2.0, 0.0).unwrap();
        assert_eq!(w, 1.0);
        assert!(close(b, (1.0 / 5.0 + 1.0 / 3.0) / 2.0, 1e-12));
    }

    #[test]
    fn isotropic_b_matches_scalar_root() {
        // Σ = I: b = 1/((1 − c − czb) − z), i.e. −cz b² + (1 − c − z) b − 1 = 0
        let (c, z) = (0.5, -1.5);
        let (b, _) = solve_b(&[1.0; 8], z, c).unwrap();
        let (qa, qb) = (-c * z, 1.0 - c - z);
        let root = (-qb + (qb * qb + 4.0 * qa).sqrt()) / (2.0 * qa);
        assert!(close(b, root, 1e-12));
    }

    #[test]
    fn e_decreases_in_gamma() {
        let sigma: Vec<f64> = (1..=30).map(|i| i as f64 / 10.0).collect();
        let mut last = f64::INFINITY;
        for j in -6..=6 {
            let (e, x) = solve_e(&sigma, -(10f64.powi(j)), 20.0).unwrap();
            assert!(e < last);
            assert!(x > 0.0 && x < 1.0);
            last = e;
        }
    }

    fn small_model() -> AsymptoticModel {
        let pop = make_population(CovModel { kind: CovKind::Model2, p: 30 }, 3.0).unwrap();
        AsymptoticModel::new(&pop, 20, 26, AsymptoticConfig::default()).unwrap()
    }

    #[test]
    fn derivatives_match_analytic_forms() {
        let m = small_model();
        for z in [-0.1, -1.0, -10.0] {
            let st = m.state(z).unwrap();
            let t: f64 = m.eig.values.iter().zip(st.r.iter()).map(|(s, r)| s * r * r).sum::<f64>() / st.n_tilde;
            let analytic = t / (1.0 - st.x * st.x * st.phi);
            assert!(close(st.e_prime, analytic, 1e-6));
            assert!(close(st.phi_tilde_prime, 2.0 * st.x * st.x_prime, 1e-15));
            // w ≡ x, so w′ = x′
            assert!(close(st.w_prime, st.x_prime, 1e-6));
        }
    }

    #[test]
    fn isotropic_derivative_closed_form() {
        // Σ = I, c = p/ñ: −z e² + (1 − z − c) e − c = 0, e′ = (e² + e)/(1 − z − c − 2ze)
        let pop = PopulationModel::new(
            DVector::from_element(12, 0.2),
            DVector::from_element(12, -0.2),
            DMatrix::identity(12, 12),
        )
        .unwrap();
        let m = AsymptoticModel::new(&pop, 10, 10, AsymptoticConfig::default()).unwrap();
        let c = 12.0 / 18.0;
        let z = -0.7;
        let st = m.state(z).unwrap();
        let e = st.e;
        assert!((-z * e * e + (1.0 - z - c) * e - c).abs() < 1e-12);
        assert!(close(st.e_prime, (e * e + e) / (1.0 - z - c - 2.0 * z * e), 1e-6));
    }

    #[test]
    fn derivative_step_robustness() {
        let m = small_model();
        let sigma = m.eig.values.as_slice();
        let nt = m.n_tilde();
        let z = -0.8;
        let h = fd_step(z);
        let f = |zz: f64| Ok(solve_e(sigma, zz, nt)?.0);
        let full = richardson(f, z, h).unwrap();
        let half = richardson(f, z, 0.5 * h).unwrap();
        assert!(close(half, full, 1e-6));
    }

    #[test]
    fn eta_is_linear_in_theta() {
        let m = small_model();
        let st = m.state(-0.5).unwrap();
        let p = m.p();
        let t1 = DMatrix::from_fn(p, p, |i, j| 1.0 / (1.0 + i as f64 + j as f64));
        let t2 = DMatrix::from_fn(p, p, |i, j| if i == j { 0.5 } else { 0.01 * (i * j % 5) as f64 });
        let t2 = (&t2 + t2.transpose()) * 0.5;
        for form in [EtaForm::Derived, EtaForm::Display] {
            let mm = AsymptoticModel {
                config: AsymptoticConfig { eta: form, ..m.config },
                ..m.clone()
            };
            assert_eq!(mm.eta(&DMatrix::zeros(p, p), &st).unwrap(), 0.0);
            let sum = mm.eta(&(&t1 + &t2), &st).unwrap();
            let parts = mm.eta(&t1, &st).unwrap() + mm.eta(&t2, &st).unwrap();
            assert!((sum - parts).abs() <= 1e-10 * sum.abs());
        }
    }

    #[test]
    fn xi_matches_materialized_resolvents() {
        let m = small_model();
        let st = m.state(-2.0).unwrap();
        let v = &m.eig.vectors;
        let sigma = v * DMatrix::from_diagonal(&m.eig.values) * v.transpose();
        let p_mat = (&sigma * st.w - DMatrix::identity(m.p(), m.p()) * st.z).try_inverse().unwrap();
        let p_prime = -&p_mat * (&sigma * st.w_prime - DMatrix::identity(m.p(), m.p())) * &p_mat;
        let xi = |a: &DMatrix<f64>, b: &DMatrix<f64>| (&sigma * a * &sigma * b).trace() / st.n_tilde;
        assert!(close(xi(&p_mat, &p_mat), st.xi_pp, 1e-10));
        assert!(close(xi(&p_mat, &p_prime), st.xi_pp_prime, 1e-10));
        assert!(close(xi(&p_prime, &p_prime), st.xi_p_prime_p_prime, 1e-10));
    }

    #[test]
    fn equal_counts_cancel_trace_term() {
        let pop = make_population(CovModel { kind: CovKind::Model1, p: 20 }, 2.0).unwrap();
        let r = deterministic_risk(&pop, 15, 15, 1.0, AsymptoticConfig::default()).unwrap();
        assert!(close(r.g_tilde_0, -r.g_tilde_1, 1e-14));
        assert!(r.eps_bar > 0.0 && r.eps_bar < 1.0);
        assert!(r.d_tilde > 0.0);
    }

    #[test]
    fn equal_means_leave_only_trace_term() {
        let p = 10;
        let pop = PopulationModel::new(DVector::zeros(p), DVector::zeros(p), DMatrix::identity(p, p)).unwrap();
        let r = deterministic_risk(&pop, 8, 12, 1.0, AsymptoticConfig::default()).unwrap();
        assert!(close(r.g_tilde_0, r.g_tilde_1, 1e-14));
        // the total error tends to the prior-only regime
        assert!(r.eps_bar > 0.35);
    }

    #[test]
    fn csv_layout() {
        let pop = make_population(CovModel { kind: CovKind::Model1, p: 8 }, 2.0).unwrap();
        let rows: Vec<_> = [0.1, 1.0]
            .iter()
            .map(|&g| deterministic_risk(&pop, 6, 6, g, AsymptoticConfig::default()).unwrap())
            .collect();
        let mut buf = Vec::new();
        write_asymptotic_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("gamma,G_tilde_0,G_tilde_1,D_tilde,eps_bar\n"));
        assert_eq!(text.lines().count(), 3);
    }

    #[test]
    fn rejects_nonnegative_z() {
        assert!(solve_e(&[1.0], 0.0, 3.0).is_err());
        assert!(solve_b(&[1.0], 1.0, 0.3).is_err());
    }
}
