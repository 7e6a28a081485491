//! Outage probabilities of the two hops and of the end-to-end link.
//!
//! Hop outages are independent, so `P_E2E = 1 - P̄_sr P̄_rd`. The S–R hop
//! is exact only through a one-dimensional integral over the RSI gain;
//! the closed forms on that hop are bounds. The R–D hop is exact in closed
//! form for any integer shapes.

use thiserror::Error;

use crate::model::{ModelError, RateTarget, SignalParams, SystemParams};
use crate::quad::{integrate_semi_infinite, QuadError, QuadratureConfig};
use crate::specfun::{binomial, factorial, gamma_int, ln_gamma_int, regularized_lower_gamma_int, SpecFunError};

/// How a reported value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    ExactIntegral,
    LowerBound,
    UpperBound,
    ClosedFormExact,
    MonteCarlo,
}

impl Method {
    pub fn tag(&self) -> &'static str {
        match self {
            Method::ExactIntegral => "exact-integral",
            Method::LowerBound => "lower-bound",
            Method::UpperBound => "upper-bound",
            Method::ClosedFormExact => "closed-form-exact",
            Method::MonteCarlo => "monte-carlo",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

/// A metric value tagged with its method; `stderr` is set only for Monte Carlo.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalResult {
    pub value: f64,
    pub method: Method,
    pub stderr: Option<f64>,
}

impl EvalResult {
    pub fn analytic(value: f64, method: Method) -> Self {
        debug_assert!(method != Method::MonteCarlo);
        Self {
            value,
            method,
            stderr: None,
        }
    }

    pub fn monte_carlo(value: f64, stderr: f64) -> Self {
        Self {
            value,
            method: Method::MonteCarlo,
            stderr: Some(stderr),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OutageError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    SpecFun(#[from] SpecFunError),
    #[error("{what}: {source}")]
    Quadrature {
        what: &'static str,
        #[source]
        source: QuadError,
    },
    #[error("{0} requires Rayleigh fading (m = 1) on the links it uses")]
    NotRayleigh(&'static str),
}

fn quad_err(what: &'static str) -> impl FnOnce(QuadError) -> OutageError {
    move |source| OutageError::Quadrature { what, source }
}

/// `E[Q(m_main, (a·X + 1)·u)]` for `X ~ Gamma(m_int, θ_int)`, in closed form.
///
/// Expanding `(aX + 1)^m` binomially and integrating each power of `X`
/// against the gamma density gives a finite double sum.
fn gamma_mixture_complement(m_main: u32, u: f64, a_theta: f64, m_int: u32) -> Result<f64, OutageError> {
    let w = a_theta * u + 1.0;
    let ln_g0 = ln_gamma_int(m_int)?;
    let mut sum = 0.0;
    for m in 0..m_main {
        let mut inner = 0.0;
        for k in 0..=m {
            let ratio = (ln_gamma_int(k + m_int)? - ln_g0).exp();
            inner += binomial(m, k) * a_theta.powi(k as i32) * ratio / w.powi((k + m_int) as i32);
        }
        sum += inner * u.powi(m as i32) / factorial(m);
    }
    Ok((-u).exp() * sum)
}

/// Threshold on `g_sr` below which the S–R hop is in outage, given `g_rr = x`.
fn sr_root(sys: &SystemParams, sig: &SignalParams, target: &RateTarget, x: f64) -> f64 {
    let i = sig.p_r() * x;
    (i + 1.0) / sys.p_s() * target.psi_attenuated(sig.c_x(), i)
}

/// Exact S–R outage by quadrature over the RSI gain.
pub fn p_sr_exact(
    sys: &SystemParams,
    sig: &SignalParams,
    target: &RateTarget,
    quad: &QuadratureConfig,
) -> Result<EvalResult, OutageError> {
    let rr = sys.rr();
    let m_rr = rr.m();
    let m_sr = sys.sr().m();
    let theta_sr = sys.sr().theta();
    let ln_norm = ln_gamma_int(m_rr)? + f64::from(m_rr) * rr.theta().ln();
    let integrand = |x: f64| {
        if x <= 0.0 {
            return 0.0;
        }
        let ln_density = f64::from(m_rr - 1) * x.ln() - x / rr.theta() - ln_norm;
        let density = ln_density.exp();
        if density == 0.0 {
            return 0.0;
        }
        let p = regularized_lower_gamma_int(m_sr, sr_root(sys, sig, target, x) / theta_sr)
            .unwrap_or(f64::NAN);
        density * p
    };
    let out = integrate_semi_infinite(integrand, rr.pi(), quad).map_err(quad_err("p_sr_exact"))?;
    Ok(EvalResult::analytic(out.value, Method::ExactIntegral))
}

/// Closed-form S–R lower bound obtained by evaluating `Ψ_r` at `C_x`.
pub fn p_sr_lb(sys: &SystemParams, sig: &SignalParams, target: &RateTarget) -> Result<EvalResult, OutageError> {
    let pbar = sr_lb_complement(sys, sig, target)?;
    Ok(EvalResult::analytic(1.0 - pbar, Method::LowerBound))
}

fn sr_lb_complement(sys: &SystemParams, sig: &SignalParams, target: &RateTarget) -> Result<f64, OutageError> {
    let u = target.psi(sig.c_x()) / (sys.p_s() * sys.sr().theta());
    gamma_mixture_complement(sys.sr().m(), u, sig.p_r() * sys.rr().theta(), sys.rr().m())
}

fn require_rayleigh(ok: bool, what: &'static str) -> Result<(), OutageError> {
    if ok {
        Ok(())
    } else {
        Err(OutageError::NotRayleigh(what))
    }
}

/// Exact S–R outage under Rayleigh fading: a single expectation over `g_rr`.
pub fn p_sr_rayleigh_exact(
    sys: &SystemParams,
    sig: &SignalParams,
    target: &RateTarget,
    quad: &QuadratureConfig,
) -> Result<EvalResult, OutageError> {
    require_rayleigh(sys.sr().is_rayleigh() && sys.rr().is_rayleigh(), "p_sr_rayleigh_exact")?;
    let pi_rr = sys.rr().pi();
    let pi_sr = sys.sr().pi();
    let integrand = |x: f64| (-x / pi_rr).exp() / pi_rr * -(-sr_root(sys, sig, target, x) / pi_sr).exp_m1();
    let out = integrate_semi_infinite(integrand, pi_rr, quad).map_err(quad_err("p_sr_rayleigh_exact"))?;
    Ok(EvalResult::analytic(out.value, Method::ExactIntegral))
}

/// Jensen upper bound on the Rayleigh S–R outage.
pub fn p_sr_rayleigh_ub(sys: &SystemParams, sig: &SignalParams, target: &RateTarget) -> Result<EvalResult, OutageError> {
    require_rayleigh(sys.sr().is_rayleigh() && sys.rr().is_rayleigh(), "p_sr_rayleigh_ub")?;
    let e = sr_ub_exponent(sys, sig.p_r(), sig.c_x(), target);
    Ok(EvalResult::analytic(-(-e).exp_m1(), Method::UpperBound))
}

/// `(P_r π_rr + 1) Ψ_r(α C_x) / (P_s π_sr)`.
fn sr_ub_exponent(sys: &SystemParams, p_r: f64, c_x: f64, target: &RateTarget) -> f64 {
    let b = (p_r * sys.rr().pi() + 1.0) / (sys.p_s() * sys.sr().pi());
    b * target.psi_attenuated(c_x, p_r * sys.rr().pi())
}

/// Second derivative in `g_rr` of the S–R outage exponent
/// `f(g) = √(A g² + B g + C) - (D g + F)`; nonpositive everywhere.
pub fn convexity_witness(sys: &SystemParams, sig: &SignalParams, target: &RateTarget, g_rr: f64) -> f64 {
    let g = target.gamma();
    let p_r = sig.p_r();
    let c_x = sig.c_x();
    let k2 = (sys.p_s() * sys.sr().pi()).powi(2);
    let a = p_r * p_r * (1.0 + g - g * c_x * c_x) / k2;
    let b = 2.0 * p_r * (1.0 + g) / k2;
    let c = (1.0 + g) / k2;
    // 4AC - B² in factored form, exactly zero at C_x = 0.
    let disc = -4.0 * p_r * p_r * (1.0 + g) * g * c_x * c_x / (k2 * k2);
    let q = (a * g_rr + b) * g_rr + c;
    disc / (4.0 * q * q.sqrt())
}

/// The exponent function itself, exposed for finite-difference checks.
pub fn convexity_exponent(sys: &SystemParams, sig: &SignalParams, target: &RateTarget, g_rr: f64) -> f64 {
    sr_root(sys, sig, target, g_rr) / sys.sr().pi()
}

/// Exact R–D outage in closed form.
pub fn p_rd_exact(sys: &SystemParams, sig: &SignalParams, target: &RateTarget) -> Result<EvalResult, OutageError> {
    let pbar = rd_complement(sys, sig, target)?;
    Ok(EvalResult::analytic(1.0 - pbar, Method::ClosedFormExact))
}

fn rd_complement(sys: &SystemParams, sig: &SignalParams, target: &RateTarget) -> Result<f64, OutageError> {
    let v = target.psi_ratio(sig.c_x()) / (sig.p_r() * sys.rd().theta());
    gamma_mixture_complement(sys.rd().m(), v, sys.p_s() * sys.sd().theta(), sys.sd().m())
}

/// Exact end-to-end outage, composed from the exact hop outages.
pub fn p_e2e_exact(
    sys: &SystemParams,
    sig: &SignalParams,
    target: &RateTarget,
    quad: &QuadratureConfig,
) -> Result<EvalResult, OutageError> {
    let p_sr = p_sr_exact(sys, sig, target, quad)?.value;
    let pbar_rd = rd_complement(sys, sig, target)?;
    Ok(EvalResult::analytic(p_sr + (1.0 - p_sr) * (1.0 - pbar_rd), Method::ExactIntegral))
}

/// End-to-end lower bound as the expanded quadruple sum over `(m, k, m', k')`.
pub fn p_e2e_lb(sys: &SystemParams, sig: &SignalParams, target: &RateTarget) -> Result<EvalResult, OutageError> {
    Ok(EvalResult::analytic(1.0 - e2e_lb_complement(sys, sig, target)?, Method::LowerBound))
}

pub(crate) fn e2e_lb_complement(sys: &SystemParams, sig: &SignalParams, target: &RateTarget) -> Result<f64, OutageError> {
    let (sr, rd, rr, sd) = (sys.sr(), sys.rd(), sys.rr(), sys.sd());
    let (p_s, p_r, c_x) = (sys.p_s(), sig.p_r(), sig.c_x());
    let psi = target.psi(c_x);
    let ratio = target.psi_ratio(c_x);
    let u = psi / (p_s * sr.theta());
    let v = ratio / (p_r * rd.theta());
    let w_sr = p_r * rr.theta() * u + 1.0;
    let w_rd = p_s * sd.theta() * v + 1.0;
    let g_rr = gamma_int(rr.m())?;
    let g_sd = gamma_int(sd.m())?;
    let mut sum = 0.0;
    for m in 0..sr.m() {
        for k in 0..=m {
            for mp in 0..rd.m() {
                for kp in 0..=mp {
                    let comb = binomial(m, k) * binomial(mp, kp);
                    let gammas = gamma_int(k + rr.m())? * gamma_int(kp + sd.m())? / (g_rr * g_sd);
                    let powers = p_r.powi(k as i32 - mp as i32) * p_s.powi(kp as i32 - m as i32);
                    let thetas = rr.theta().powi(k as i32) * sd.theta().powi(kp as i32)
                        / (sr.theta().powi(m as i32) * rd.theta().powi(mp as i32));
                    let psis = psi.powi(m as i32) * ratio.powi(mp as i32) / (factorial(m) * factorial(mp));
                    let denoms = w_sr.powi((k + rr.m()) as i32) * w_rd.powi((kp + sd.m()) as i32);
                    sum += comb * gammas * powers * thetas * psis / denoms;
                }
            }
        }
    }
    Ok((-(u + v)).exp() * sum)
}

/// Rayleigh end-to-end upper bound: Jensen bound on S–R times exact R–D.
pub fn p_e2e_rayleigh_ub(sys: &SystemParams, sig: &SignalParams, target: &RateTarget) -> Result<EvalResult, OutageError> {
    require_rayleigh(sys.is_rayleigh(), "p_e2e_rayleigh_ub")?;
    Ok(EvalResult::analytic(
        e2e_rayleigh_ub_value(sys, target, sig.p_r(), sig.c_x()),
        Method::UpperBound,
    ))
}

/// Value of the Rayleigh upper bound at `(p_r, c_x)` without validation.
pub(crate) fn e2e_rayleigh_ub_value(sys: &SystemParams, target: &RateTarget, p_r: f64, c_x: f64) -> f64 {
    let h = target.psi_ratio(c_x) / (p_r * sys.rd().pi());
    let e = h + sr_ub_exponent(sys, p_r, c_x, target);
    let d = sys.p_s() * sys.sd().pi() * h + 1.0;
    // 1 - e^{-E}/D = (D - 1 + (1 - e^{-E}))/D
    (d - 1.0 - (-e).exp_m1()) / d
}

/// Limit of the Rayleigh upper bound at `C_x = 1` as `π_rr → ∞`.
pub fn asymptotic_k(sys: &SystemParams, target: &RateTarget, p_r: f64) -> Result<f64, OutageError> {
    require_rayleigh(sys.is_rayleigh(), "asymptotic_k")?;
    if !(p_r > 0.0 && p_r.is_finite()) {
        return Err(ModelError::NonPositive {
            name: "relay power",
            value: p_r,
        }
        .into());
    }
    let g = target.gamma();
    let a = 2.0 * p_r * sys.rd().pi();
    let e = g / a + g / (sys.p_s() * sys.sr().pi());
    let d = a + g * sys.p_s() * sys.sd().pi();
    Ok((d - a - a * (-e).exp_m1()) / d)
}

/// Throughput `T = r (1 - P_out)`.
pub fn throughput(target: &RateTarget, p_out: f64) -> Result<f64, OutageError> {
    if !(0.0..=1.0).contains(&p_out) {
        return Err(ModelError::Domain {
            function: "throughput",
            x: p_out,
        }
        .into());
    }
    Ok(target.r() * (1.0 - p_out))
}
