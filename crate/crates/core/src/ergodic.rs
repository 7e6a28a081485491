//! End-to-end ergodic rate: exact double integral, closed-form upper bound
//! and a Rayleigh lower bound.
//!
//! The upper bound integrates `1 - P_LB(r)` over the target rate. With the
//! substitution `r → Ψ = Ψ_r(C_x)` every term of the quadruple sum becomes
//! `∫ Ψ^ν e^{-ΩΨ} F(Ψ) dΨ` with a rational `F`, which is split into partial
//! fractions and integrated term by term with `Ξ_n` and Tricomi `U`.

use std::f64::consts::LN_2;

use thiserror::Error;

use crate::model::{alpha, ModelError, RateTarget, SignalParams, SystemParams};
use crate::outage::{e2e_lb_complement, p_rd_exact, p_sr_exact, EvalResult, Method, OutageError};
use crate::quad::{integrate, QuadError, QuadratureConfig};
use crate::specfun::{binomial, factorial, gamma_int, tricomi_u, xi_n, SpecFunError};

/// Minimum upper limit of the outer rate integral.
pub const MIN_RATE_CAP: f64 = 20.0;

/// Complementary probability below which the rate integrand is treated as zero.
pub const RATE_TAIL: f64 = 1e-12;

/// Relative distance at which two poles of `F` are considered coincident.
pub const POLE_COLLISION_TOL: f64 = 1e-9;

/// At or above this circularity `Ω` is unbounded and the upper bound is
/// evaluated from its defining rate integral instead.
pub const UB_CLOSED_FORM_MAX_C: f64 = crate::model::CIRCULARITY_LIMIT_SWITCH;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ErgodicError {
    #[error(transparent)]
    Outage(#[from] OutageError),
    #[error(transparent)]
    SpecFun(#[from] SpecFunError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{what}: {source}")]
    Quadrature {
        what: &'static str,
        #[source]
        source: QuadError,
    },
    #[error("poles of the rational integrand nearly coincide: {0}")]
    PoleCollision(String),
    #[error("lower-bound partial fraction is degenerate (denominator {0:e})")]
    DegenerateKappa(f64),
    #[error("{0} requires Rayleigh fading on every link")]
    NotRayleigh(&'static str),
}

/// Summation indices `(m, m', k, k')` of one term of the quadruple sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TermIndices {
    pub m: u32,
    pub m_prime: u32,
    pub k: u32,
    pub k_prime: u32,
}

/// Partial-fraction form of
/// `F(Ψ) = (Ψ + 1) / ((Ψ + 1 - C)(Ψ + 1 + C) L1^{n1} L2^{n2})`
/// with `L1 = s1 Ψ + 1/θ_rr` and `L2 = s2 Ψ + 1/θ_sd`.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialFractionExpansion {
    /// `(root, λ)` pairs: `λ / (Ψ - root)`.
    pub simple_terms: Vec<(f64, f64)>,
    /// `ζ_j`, coefficient of `L1^{-j}` for `j = 1..=n1`.
    pub sr_pole_terms: Vec<f64>,
    /// `ξ_l`, coefficient of `L2^{-l}` for `l = 1..=n2`.
    pub sd_pole_terms: Vec<f64>,
    pub context: TermIndices,
    pub s1: f64,
    pub s2: f64,
    pub inv_theta_rr: f64,
    pub inv_theta_sd: f64,
}

impl PartialFractionExpansion {
    /// Root of `L1`.
    pub fn sr_pole(&self) -> f64 {
        -self.inv_theta_rr / self.s1
    }

    /// Root of `L2`.
    pub fn sd_pole(&self) -> f64 {
        -self.inv_theta_sd / self.s2
    }

    /// Sum of all partial fractions at `psi`.
    pub fn evaluate(&self, psi: f64) -> f64 {
        let l1 = self.s1 * psi + self.inv_theta_rr;
        let l2 = self.s2 * psi + self.inv_theta_sd;
        let simple: f64 = self.simple_terms.iter().map(|&(root, c)| c / (psi - root)).sum();
        let sr: f64 = self
            .sr_pole_terms
            .iter()
            .enumerate()
            .map(|(j, c)| c / l1.powi(j as i32 + 1))
            .sum();
        let sd: f64 = self
            .sd_pole_terms
            .iter()
            .enumerate()
            .map(|(l, c)| c / l2.powi(l as i32 + 1))
            .sum();
        simple + sr + sd
    }
}

/// Constants shared by every term of the upper bound.
#[derive(Debug, Clone, Copy)]
struct UbGeometry {
    c: f64,
    s1: f64,
    s2: f64,
    inv_theta_rr: f64,
    inv_theta_sd: f64,
}

impl UbGeometry {
    fn new(sys: &SystemParams, sig: &SignalParams) -> Self {
        let c = sig.c_x();
        Self {
            c,
            s1: sig.p_r() / (sys.p_s() * sys.sr().theta()),
            s2: sys.p_s() / (sig.p_r() * sys.rd().theta() * (1.0 - c) * (1.0 + c)),
            inv_theta_rr: 1.0 / sys.rr().theta(),
            inv_theta_sd: 1.0 / sys.sd().theta(),
        }
    }

    fn poles(&self) -> (f64, f64) {
        (-self.inv_theta_rr / self.s1, -self.inv_theta_sd / self.s2)
    }
}

fn indices_in_bounds(sys: &SystemParams, idx: TermIndices) -> Result<(), ErgodicError> {
    let ok = idx.m < sys.sr().m() && idx.k <= idx.m && idx.m_prime < sys.rd().m() && idx.k_prime <= idx.m_prime;
    if ok {
        Ok(())
    } else {
        Err(ModelError::Domain {
            function: "compute_partial_fractions",
            x: f64::from(idx.m),
        }
        .into())
    }
}

/// The rational function `F(Ψ)` evaluated directly.
pub fn rational_f(sys: &SystemParams, sig: &SignalParams, idx: TermIndices, psi: f64) -> f64 {
    let g = UbGeometry::new(sys, sig);
    let n1 = (idx.k + sys.rr().m()) as i32;
    let n2 = (idx.k_prime + sys.sd().m()) as i32;
    let l1 = g.s1 * psi + g.inv_theta_rr;
    let l2 = g.s2 * psi + g.inv_theta_sd;
    (psi + 1.0) / ((psi + 1.0 - g.c) * (psi + 1.0 + g.c) * l1.powi(n1) * l2.powi(n2))
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= POLE_COLLISION_TOL * a.abs().max(b.abs()).max(1.0)
}

/// Taylor coefficients of `1/(x + d)` about `x = 0`, truncated to `n` terms.
fn inv_linear_series(d: f64, n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    let mut term = 1.0 / d;
    for _ in 0..n {
        out.push(term);
        term *= -1.0 / d;
    }
    out
}

/// Taylor coefficients of `(x + d)^{-p}` about `x = 0`, truncated to `n` terms.
fn inv_power_series(d: f64, p: u32, n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    let mut term = d.powi(-(p as i32));
    for k in 0..n {
        out.push(term);
        let kf = k as f64;
        term *= -(f64::from(p) + kf) / ((kf + 1.0) * d);
    }
    out
}

fn series_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len().min(b.len());
    (0..n)
        .map(|i| (0..=i).map(|j| a[j] * b[i - j]).sum())
        .collect()
}

/// Principal-part coefficients at a pole of order `order` located at `p`,
/// where `F = H/(slope^order (Ψ - p)^order)`, `H` analytic at `p`, and `H`
/// is `(Ψ + 1)/((Ψ + q1)(Ψ + q2)) · (other_slope (Ψ - other_pole))^{-other_order}`.
fn pole_coefficients(
    p: f64,
    slope: f64,
    order: u32,
    q: [f64; 2],
    other_pole: f64,
    other_slope: f64,
    other_order: u32,
) -> Vec<f64> {
    let n = order as usize;
    let mut h = vec![0.0; n];
    h[0] = p + 1.0;
    if n > 1 {
        h[1] = 1.0;
    }
    h = series_mul(&h, &inv_linear_series(p + q[0], n));
    h = series_mul(&h, &inv_linear_series(p + q[1], n));
    let other = inv_power_series(p - other_pole, other_order, n);
    let scale = other_slope.powi(-(other_order as i32));
    h = series_mul(&h, &other).into_iter().map(|x| x * scale).collect();
    // ζ_j = a_{n-j} / slope^{n-j}
    (1..=order)
        .map(|j| {
            let e = (order - j) as usize;
            h[e] / slope.powi(e as i32)
        })
        .collect()
}

/// Partial-fraction decomposition of `F(Ψ)` for one index tuple.
pub fn compute_partial_fractions(
    sys: &SystemParams,
    sig: &SignalParams,
    indices: TermIndices,
) -> Result<PartialFractionExpansion, ErgodicError> {
    indices_in_bounds(sys, indices)?;
    if sig.c_x() >= 1.0 {
        return Err(ModelError::Domain {
            function: "compute_partial_fractions",
            x: sig.c_x(),
        }
        .into());
    }
    let g = UbGeometry::new(sys, sig);
    build_expansion(&g, indices, indices.k + sys.rr().m(), indices.k_prime + sys.sd().m())
}

fn build_expansion(g: &UbGeometry, idx: TermIndices, n1: u32, n2: u32) -> Result<PartialFractionExpansion, ErgodicError> {
    let (p1, p2) = g.poles();
    let q = [1.0 - g.c, 1.0 + g.c];
    if close(p1, p2) {
        return Err(ErgodicError::PoleCollision(format!("L1 root {p1} vs L2 root {p2}")));
    }
    for &qi in &q {
        for (name, p) in [("L1", p1), ("L2", p2)] {
            if close(p, -qi) {
                return Err(ErgodicError::PoleCollision(format!("{name} root {p} vs simple pole {}", -qi)));
            }
        }
    }
    let l_product = |psi: f64| (g.s1 * psi + g.inv_theta_rr).powi(n1 as i32) * (g.s2 * psi + g.inv_theta_sd).powi(n2 as i32);
    // Residue of (Ψ+1)/((Ψ+q1)(Ψ+q2)) at either root is exactly 1/2.
    let simple_terms = q.iter().map(|&qi| (-qi, 0.5 / l_product(-qi))).collect();
    let sr_pole_terms = pole_coefficients(p1, g.s1, n1, q, p2, g.s2, n2);
    let sd_pole_terms = pole_coefficients(p2, g.s2, n2, q, p1, g.s1, n1);
    Ok(PartialFractionExpansion {
        simple_terms,
        sr_pole_terms,
        sd_pole_terms,
        context: idx,
        s1: g.s1,
        s2: g.s2,
        inv_theta_rr: g.inv_theta_rr,
        inv_theta_sd: g.inv_theta_sd,
    })
}

/// Upper limit for the rate integral: at least [`MIN_RATE_CAP`], extended
/// until the complementary lower-bound outage drops below [`RATE_TAIL`].
fn rate_cap(sys: &SystemParams, sig: &SignalParams) -> Result<f64, ErgodicError> {
    let mut cap = MIN_RATE_CAP;
    while e2e_lb_complement(sys, sig, &RateTarget::new(cap)?)? >= RATE_TAIL {
        cap *= 1.5;
        if cap > 1e3 {
            break;
        }
    }
    Ok(cap)
}

fn integrate_rate<F: Fn(f64) -> Result<f64, ErgodicError>>(
    integrand: F,
    cap: f64,
    quad: &QuadratureConfig,
    what: &'static str,
) -> Result<f64, ErgodicError> {
    let failure = std::cell::RefCell::new(None);
    let f = |r: f64| match integrand(r) {
        Ok(v) => v,
        Err(e) => {
            failure.borrow_mut().get_or_insert(e);
            f64::NAN
        }
    };
    let out = integrate(f, 0.0, cap, quad);
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    out.map(|o| o.value)
        .map_err(|source| ErgodicError::Quadrature { what, source })
}

/// Exact ergodic rate: `∫ (1 - P_E2E(r)) dr` with the exact outage inside.
pub fn r_e2e_exact(sys: &SystemParams, sig: &SignalParams, quad: &QuadratureConfig) -> Result<EvalResult, ErgodicError> {
    let cap = rate_cap(sys, sig)?;
    let value = integrate_rate(
        |r| {
            let t = RateTarget::new(r)?;
            let p_sr = p_sr_exact(sys, sig, &t, quad)?.value;
            let p_rd = p_rd_exact(sys, sig, &t)?.value;
            Ok((1.0 - p_sr) * (1.0 - p_rd))
        },
        cap,
        quad,
        "r_e2e_exact",
    )?;
    Ok(EvalResult::analytic(value, Method::ExactIntegral))
}

/// `∫ (1 - P_LB(r)) dr` by quadrature; the defining integral of the upper bound.
pub fn r_e2e_ub_quadrature(sys: &SystemParams, sig: &SignalParams, quad: &QuadratureConfig) -> Result<f64, ErgodicError> {
    let cap = rate_cap(sys, sig)?;
    integrate_rate(
        |r| Ok(e2e_lb_complement(sys, sig, &RateTarget::new(r)?)?),
        cap,
        quad,
        "r_e2e_ub",
    )
}

/// Closed-form ergodic-rate upper bound.
///
/// For `C_x ≥` [`UB_CLOSED_FORM_MAX_C`] the same bound is returned from its
/// rate integral, where `Ψ_r(C)/(1 - C²)` takes its limit.
pub fn r_e2e_ub(sys: &SystemParams, sig: &SignalParams, quad: &QuadratureConfig) -> Result<EvalResult, ErgodicError> {
    if sig.c_x() >= UB_CLOSED_FORM_MAX_C {
        let value = r_e2e_ub_quadrature(sys, sig, quad)?;
        return Ok(EvalResult::analytic(value, Method::UpperBound));
    }
    Ok(EvalResult::analytic(r_e2e_ub_closed_form(sys, sig)?, Method::UpperBound))
}

/// The closed form itself, without the high-circularity fallback.
pub fn r_e2e_ub_closed_form(sys: &SystemParams, sig: &SignalParams) -> Result<f64, ErgodicError> {
    let (sr, rd, rr, sd) = (sys.sr(), sys.rd(), sys.rr(), sys.sd());
    let (p_s, p_r, c) = (sys.p_s(), sig.p_r(), sig.c_x());
    if c >= 1.0 {
        return Err(ModelError::Domain {
            function: "r_e2e_ub_closed_form",
            x: c,
        }
        .into());
    }
    let g = UbGeometry::new(sys, sig);
    let one_minus_c2 = (1.0 - c) * (1.0 + c);
    let a_sr = p_s * sr.theta();
    let a_rd = p_r * rd.theta() * one_minus_c2;
    let omega = 1.0 / a_sr + 1.0 / a_rd;
    let (p1, p2) = g.poles();
    let q = [1.0 - c, 1.0 + c];

    let nu_max = (sr.m() - 1 + rd.m() - 1) as usize;
    let n1_max = sr.m() - 1 + rr.m();
    let n2_max = rd.m() - 1 + sd.m();
    let nu_fact: Vec<f64> = (0..=nu_max as u32).map(factorial).collect();

    // ∫ Ψ^ν e^{-ΩΨ} / (Ψ + q) dΨ = ν! Ω^{-ν} Ξ_{ν+1}(qΩ)
    let mut simple = vec![[0.0; 2]; nu_max + 1];
    for (nu, row) in simple.iter_mut().enumerate() {
        for (i, &qi) in q.iter().enumerate() {
            row[i] = nu_fact[nu] * omega.powi(-(nu as i32)) * xi_n(nu as u32 + 1, qi * omega)?;
        }
    }
    // ∫ Ψ^ν e^{-ΩΨ} / L^j dΨ = s^{-j} ν! Ω^{j-1-ν} U(j, j-ν, -pΩ)
    let pole_table = |slope: f64, pole: f64, n_max: u32| -> Result<Vec<Vec<f64>>, ErgodicError> {
        let mut table = vec![vec![0.0; n_max as usize + 1]; nu_max + 1];
        for (nu, row) in table.iter_mut().enumerate() {
            for j in 1..=n_max {
                let jf = f64::from(j);
                let u = tricomi_u(jf, jf - nu as f64, -pole * omega)?;
                row[j as usize] = slope.powi(-(j as i32)) * nu_fact[nu] * omega.powi(j as i32 - 1 - nu as i32) * u;
            }
        }
        Ok(table)
    };
    let sr_table = pole_table(g.s1, p1, n1_max)?;
    let sd_table = pole_table(g.s2, p2, n2_max)?;

    let gamma_rr = gamma_int(rr.m())?;
    let gamma_sd = gamma_int(sd.m())?;
    let mut total = 0.0;
    for m in 0..sr.m() {
        for k in 0..=m {
            for mp in 0..rd.m() {
                for kp in 0..=mp {
                    let idx = TermIndices {
                        m,
                        m_prime: mp,
                        k,
                        k_prime: kp,
                    };
                    let n1 = k + rr.m();
                    let n2 = kp + sd.m();
                    let coef = binomial(m, k)
                        * binomial(mp, kp)
                        * (p_r * rr.theta()).powi(k as i32)
                        * (p_s * sd.theta()).powi(kp as i32)
                        * gamma_int(n1)?
                        * gamma_int(n2)?
                        / (gamma_rr * gamma_sd * factorial(m) * factorial(mp))
                        / (a_sr.powi(m as i32) * a_rd.powi(mp as i32))
                        / (rr.theta().powi(n1 as i32) * sd.theta().powi(n2 as i32));
                    let pf = build_expansion(&g, idx, n1, n2)?;
                    let nu = (m + mp) as usize;
                    let mut integral = 0.0;
                    for (i, &(_, lam)) in pf.simple_terms.iter().enumerate() {
                        integral += lam * simple[nu][i];
                    }
                    for (j, z) in pf.sr_pole_terms.iter().enumerate() {
                        integral += z * sr_table[nu][j + 1];
                    }
                    for (l, x) in pf.sd_pole_terms.iter().enumerate() {
                        integral += x * sd_table[nu][l + 1];
                    }
                    total += coef * integral;
                }
            }
        }
    }
    Ok(total / LN_2)
}

/// Closed-form Rayleigh lower bound on the ergodic rate.
pub fn r_e2e_rayleigh_lb(sys: &SystemParams, sig: &SignalParams) -> Result<EvalResult, ErgodicError> {
    if !sys.is_rayleigh() {
        return Err(ErgodicError::NotRayleigh("r_e2e_rayleigh_lb"));
    }
    let c = sig.c_x();
    if c >= crate::model::CIRCULARITY_LIMIT_SWITCH {
        // The R–D exponent diverges, so the bound collapses to zero.
        return Ok(EvalResult::analytic(0.0, Method::LowerBound));
    }
    let (p_s, p_r) = (sys.p_s(), sig.p_r());
    let one_minus_c2 = (1.0 - c) * (1.0 + c);
    let beta = alpha(sys, p_r) * c;
    let big_q = p_r * sys.rd().pi() * one_minus_c2 / (p_s * sys.sd().pi());
    let d_minus = big_q - (1.0 - beta);
    let d_plus = big_q - (1.0 + beta);
    for d in [d_minus, d_plus] {
        if d.abs() < 1e-9 {
            return Err(ErgodicError::DegenerateKappa(d));
        }
    }
    let omega = (p_r * sys.rr().pi() + 1.0) / (p_s * sys.sr().pi()) + 1.0 / (p_r * sys.rd().pi() * one_minus_c2);
    let kappa3 = (1.0 - big_q) / (d_minus * d_plus);
    let sum = 0.5 / d_minus * xi_n(1, omega * (1.0 - beta))?
        + 0.5 / d_plus * xi_n(1, omega * (1.0 + beta))?
        + kappa3 * xi_n(1, omega * big_q)?;
    Ok(EvalResult::analytic(big_q / LN_2 * sum, Method::LowerBound))
}
