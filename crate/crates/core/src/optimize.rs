//! Relay signal design: choose `(P_r, C_x)` to minimize outage or
//! maximize ergodic rate.
//!
//! Under Rayleigh fading the end-to-end outage upper bound is unimodal in
//! each coordinate, so each 1D problem is solved by bisection on the sign of
//! its analytic derivative and the joint problem by coordinate descent. The
//! grid search works for every metric and every shape and serves as the
//! reference solver.

use rayon::prelude::*;
use thiserror::Error;

use crate::ergodic::{r_e2e_exact, r_e2e_rayleigh_lb, r_e2e_ub, ErgodicError};
use crate::model::{alpha, ModelError, RateTarget, SignalParams, SystemParams};
use crate::outage::{e2e_rayleigh_ub_value, p_e2e_exact, p_e2e_lb, p_e2e_rayleigh_ub, EvalResult, Method, OutageError};
use crate::quad::QuadratureConfig;

/// Distance kept from the ends of `[0, 1]` when bracketing the circularity.
pub const CX_BRACKET_EPS: f64 = 1e-7;

/// Smallest relay power searched, as a fraction of `P_max`.
pub const PR_BRACKET_EPS: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OptError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Outage(#[from] OutageError),
    #[error(transparent)]
    Ergodic(#[from] ErgodicError),
    #[error("{0} requires Rayleigh fading on every link")]
    NotRayleigh(&'static str),
    #[error("invalid search configuration: {0}")]
    InvalidConfig(String),
    #[error("coordinate descent trace increased at iteration {iteration}: {before} -> {after}")]
    NonMonotone { iteration: usize, before: f64, after: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchConfig {
    pub x_tol: f64,
    pub f_tol: f64,
    pub max_iters: usize,
    pub grid_n: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            x_tol: 1e-9,
            f_tol: 1e-12,
            max_iters: 200,
            grid_n: 1001,
        }
    }
}

impl SearchConfig {
    pub fn new(x_tol: f64, f_tol: f64, max_iters: usize, grid_n: usize) -> Result<Self, OptError> {
        let cfg = Self {
            x_tol,
            f_tol,
            max_iters,
            grid_n,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), OptError> {
        if !(1e-10..=1e-3).contains(&self.x_tol) {
            return Err(OptError::InvalidConfig(format!("x_tol {} outside [1e-10, 1e-3]", self.x_tol)));
        }
        if !(self.f_tol >= 0.0 && self.f_tol.is_finite()) {
            return Err(OptError::InvalidConfig(format!("f_tol {} must be >= 0", self.f_tol)));
        }
        if self.max_iters == 0 {
            return Err(OptError::InvalidConfig("max_iters must be positive".into()));
        }
        if self.grid_n < 101 {
            return Err(OptError::InvalidConfig(format!("grid_n {} must be >= 101", self.grid_n)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub p_r: f64,
    pub c_x: f64,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptResult {
    pub p_r_star: f64,
    pub c_x_star: f64,
    pub objective: f64,
    pub method: Method,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<TracePoint>,
}

/// Objective selector for grid search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Metric {
    OutageExact,
    OutageLowerBound,
    OutageUpperBound,
    ErgodicExact,
    ErgodicUpperBound,
    ErgodicLowerBound,
}

impl Metric {
    pub fn is_outage(&self) -> bool {
        matches!(self, Metric::OutageExact | Metric::OutageLowerBound | Metric::OutageUpperBound)
    }

    pub fn sense(&self) -> Sense {
        if self.is_outage() {
            Sense::Minimize
        } else {
            Sense::Maximize
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

/// Evaluates a metric at one design point.
pub fn evaluate_metric(
    sys: &SystemParams,
    target: &RateTarget,
    metric: Metric,
    p_r: f64,
    c_x: f64,
    quad: &QuadratureConfig,
) -> Result<EvalResult, OptError> {
    let sig = SignalParams::new(sys, p_r, c_x)?;
    Ok(match metric {
        Metric::OutageExact => p_e2e_exact(sys, &sig, target, quad)?,
        Metric::OutageLowerBound => p_e2e_lb(sys, &sig, target)?,
        Metric::OutageUpperBound => p_e2e_rayleigh_ub(sys, &sig, target)?,
        Metric::ErgodicExact => r_e2e_exact(sys, &sig, quad)?,
        Metric::ErgodicUpperBound => r_e2e_ub(sys, &sig, quad)?,
        Metric::ErgodicLowerBound => r_e2e_rayleigh_lb(sys, &sig)?,
    })
}

fn require_rayleigh(sys: &SystemParams, what: &'static str) -> Result<(), OptError> {
    if sys.is_rayleigh() {
        Ok(())
    } else {
        Err(OptError::NotRayleigh(what))
    }
}

/// Pieces of the Rayleigh upper bound `1 - e^{-E}/D` at one point.
struct UbParts {
    psi: f64,
    psi_a: f64,
    h: f64,
    alpha: f64,
    e: f64,
    d: f64,
}

fn ub_parts(sys: &SystemParams, target: &RateTarget, p_r: f64, c_x: f64) -> UbParts {
    let a = alpha(sys, p_r);
    let psi = target.psi(c_x);
    let psi_a = target.psi_attenuated(c_x, p_r * sys.rr().pi());
    let h = target.psi_ratio(c_x);
    let e = h / (p_r * sys.rd().pi()) + (p_r * sys.rr().pi() + 1.0) * psi_a / (sys.p_s() * sys.sr().pi());
    let d = sys.p_s() * sys.sd().pi() * h / (p_r * sys.rd().pi()) + 1.0;
    UbParts {
        psi,
        psi_a,
        h,
        alpha: a,
        e,
        d,
    }
}

/// `S(x)`: the factor of `d(1 - UB)/dC_x` that carries its sign.
fn cx_slope_factor(sys: &SystemParams, target: &RateTarget, p_r: f64, c_x: f64) -> (f64, UbParts) {
    let g = target.gamma();
    let u = ub_parts(sys, target, p_r, c_x);
    let a = 1.0 / (p_r * sys.rd().pi());
    let b = (p_r * sys.rr().pi() + 1.0) / (sys.p_s() * sys.sr().pi());
    let c = sys.p_s() * sys.sd().pi() / (p_r * sys.rd().pi());
    let dh = g * g / ((u.psi + 1.0) * (u.psi + 2.0).powi(2));
    let s = (c * u.h + 1.0) * (-a * dh + b * g * u.alpha * u.alpha / (u.psi_a + 1.0)) - c * dh;
    (s, u)
}

/// `d(1 - UB)/dC_x` in the form `x e^{-E}/D² · S(x)`.
pub fn ub_derivative_cx(sys: &SystemParams, target: &RateTarget, p_r: f64, c_x: f64) -> Result<f64, OptError> {
    require_rayleigh(sys, "ub_derivative_cx")?;
    SignalParams::new(sys, p_r, c_x)?;
    let (s, u) = cx_slope_factor(sys, target, p_r, c_x);
    Ok(c_x * (-u.e).exp() / (u.d * u.d) * s)
}

/// Bracketed factor of `d(1 - UB)/dP_r`, whose sign is the sign of the derivative.
fn pr_slope_factor(sys: &SystemParams, target: &RateTarget, p_r: f64, c_x: f64) -> (f64, UbParts) {
    let u = ub_parts(sys, target, p_r, c_x);
    let pi_rr = sys.rr().pi();
    let ps_sr = sys.p_s() * sys.sr().pi();
    let a = u.h / sys.rd().pi();
    let b = pi_rr * u.psi_a / ps_sr;
    let d = sys.p_s() * sys.sd().pi() * u.h / sys.rd().pi();
    let p = p_r;
    let cubic = ((-b * p - b * d) * p + a + d) * p + a * d;
    let chain = target.gamma() * u.alpha * c_x * c_x * pi_rr / (ps_sr * (u.psi_a + 1.0) * (p * pi_rr + 1.0));
    (cubic / (p * p * (p + d)) + chain, u)
}

/// `d(1 - UB)/dP_r`, including the dependence of `α` on `P_r`.
pub fn ub_derivative_pr(sys: &SystemParams, target: &RateTarget, p_r: f64, c_x: f64) -> Result<f64, OptError> {
    require_rayleigh(sys, "ub_derivative_pr")?;
    SignalParams::new(sys, p_r, c_x)?;
    let (s, u) = pr_slope_factor(sys, target, p_r, c_x);
    Ok((-u.e).exp() / u.d * s)
}

/// `d ln(1 - P_PGS)/dP_r` for the exact Rayleigh PGS outage.
fn pgs_log_slope(sys: &SystemParams, target: &RateTarget, p_r: f64) -> f64 {
    let eta = target.eta();
    let (pi_rr, pi_rd) = (sys.rr().pi(), sys.rd().pi());
    let ps_sr = sys.p_s() * sys.sr().pi();
    let ps_sd = sys.p_s() * sys.sd().pi();
    1.0 / p_r + eta / (p_r * p_r * pi_rd) - pi_rr * eta / (ps_sr + p_r * pi_rr * eta) - pi_rd / (p_r * pi_rd + ps_sd * eta)
}

/// Exact Rayleigh PGS outage in closed form.
fn pgs_outage(sys: &SystemParams, target: &RateTarget, p_r: f64) -> f64 {
    let eta = target.eta();
    let u = eta / (sys.p_s() * sys.sr().pi());
    let v = eta / (p_r * sys.rd().pi());
    let w = (1.0 + p_r * sys.rr().pi() * u) * (1.0 + sys.p_s() * sys.sd().pi() * v);
    // 1 - e^{-(u+v)}/w = (w - 1 + (1 - e^{-(u+v)}))/w
    (w - 1.0 - (-(u + v)).exp_m1()) / w
}

fn check_objective(v: f64) -> f64 {
    debug_assert!(v.is_finite());
    v
}

/// Bisection on a derivative sign over `[lo, hi]`, assuming at most one
/// sign change from negative to positive. Returns the root estimate and the
/// number of iterations, or `None` if the bracket holds no such change.
fn bisect_sign<F: Fn(f64) -> f64>(slope: F, lo: f64, hi: f64, tol: f64, max_iters: usize) -> Option<(f64, usize, bool)> {
    let s_lo = slope(lo);
    let s_hi = slope(hi);
    if !(s_lo < 0.0 && s_hi > 0.0) {
        return None;
    }
    let (mut a, mut b) = (lo, hi);
    let mut iters = 0;
    while b - a > tol {
        if iters >= max_iters {
            return Some((0.5 * (a + b), iters, false));
        }
        let mid = 0.5 * (a + b);
        if slope(mid) < 0.0 {
            a = mid;
        } else {
            b = mid;
        }
        iters += 1;
    }
    Some((0.5 * (a + b), iters, true))
}

/// Picks the best of the candidate points, earliest first on ties.
fn best_of(candidates: &[(f64, f64)]) -> (f64, f64) {
    let mut best = candidates[0];
    for &c in &candidates[1..] {
        if c.1 < best.1 {
            best = c;
        }
    }
    best
}

/// Optimal circularity at fixed relay power for the Rayleigh upper bound.
pub fn bisect_circularity(sys: &SystemParams, target: &RateTarget, p_r: f64, cfg: &SearchConfig) -> Result<OptResult, OptError> {
    require_rayleigh(sys, "bisect_circularity")?;
    cfg.validate()?;
    SignalParams::new(sys, p_r, 0.0)?;
    let obj = |c: f64| check_objective(e2e_rayleigh_ub_value(sys, target, p_r, c));
    // d UB/dC has the sign of -S.
    let slope = |c: f64| -cx_slope_factor(sys, target, p_r, c).0;
    let mut candidates = vec![(0.0, obj(0.0)), (1.0, obj(1.0))];
    let mut iterations = 0;
    let mut converged = true;
    if let Some((root, it, ok)) = bisect_sign(slope, CX_BRACKET_EPS, 1.0 - CX_BRACKET_EPS, cfg.x_tol, cfg.max_iters) {
        candidates.push((root, obj(root)));
        iterations = it;
        converged = ok;
    }
    let (c_star, f_star) = best_of(&candidates);
    Ok(OptResult {
        p_r_star: p_r,
        c_x_star: c_star,
        objective: f_star,
        method: Method::UpperBound,
        iterations,
        converged,
        trace: vec![TracePoint {
            p_r,
            c_x: c_star,
            objective: f_star,
        }],
    })
}

/// Optimal relay power at fixed circularity. At `C_x = 0` the objective is
/// the exact PGS outage; otherwise it is the Rayleigh upper bound.
pub fn bisect_power(sys: &SystemParams, target: &RateTarget, c_x: f64, cfg: &SearchConfig) -> Result<OptResult, OptError> {
    require_rayleigh(sys, "bisect_power")?;
    if c_x == 0.0 {
        bisect_power_with(sys, target, c_x, cfg, Method::ClosedFormExact)
    } else {
        bisect_power_with(sys, target, c_x, cfg, Method::UpperBound)
    }
}

fn bisect_power_with(sys: &SystemParams, target: &RateTarget, c_x: f64, cfg: &SearchConfig, method: Method) -> Result<OptResult, OptError> {
    cfg.validate()?;
    SignalParams::new(sys, sys.p_max(), c_x)?;
    let exact_pgs = method == Method::ClosedFormExact;
    let obj = |p: f64| {
        check_objective(if exact_pgs {
            pgs_outage(sys, target, p)
        } else {
            e2e_rayleigh_ub_value(sys, target, p, c_x)
        })
    };
    // Objective slopes: minus the slope of the complement.
    let slope = |p: f64| {
        if exact_pgs {
            -pgs_log_slope(sys, target, p)
        } else {
            -pr_slope_factor(sys, target, p, c_x).0
        }
    };
    let p_max = sys.p_max();
    let lo = PR_BRACKET_EPS * p_max;
    let mut candidates = vec![(p_max, obj(p_max))];
    let mut iterations = 0;
    let mut converged = true;
    if let Some((root, it, ok)) = bisect_sign(slope, lo, p_max, cfg.x_tol * p_max, cfg.max_iters) {
        candidates.push((root, obj(root)));
        iterations = it;
        converged = ok;
    }
    candidates.push((lo, obj(lo)));
    let (p_star, f_star) = best_of(&candidates);
    Ok(OptResult {
        p_r_star: p_star,
        c_x_star: c_x,
        objective: f_star,
        method,
        iterations,
        converged,
        trace: vec![TracePoint {
            p_r: p_star,
            c_x,
            objective: f_star,
        }],
    })
}

/// Joint `(P_r, C_x)` minimization of the Rayleigh upper bound by
/// alternating the two bisections from `(P_max, 0)`.
pub fn coordinate_descent(sys: &SystemParams, target: &RateTarget, cfg: &SearchConfig) -> Result<OptResult, OptError> {
    require_rayleigh(sys, "coordinate_descent")?;
    cfg.validate()?;
    let mut p = sys.p_max();
    let mut c = 0.0;
    let mut f = e2e_rayleigh_ub_value(sys, target, p, c);
    let mut trace = vec![TracePoint {
        p_r: p,
        c_x: c,
        objective: f,
    }];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iters {
        iterations += 1;
        let before = f;
        let step = bisect_circularity(sys, target, p, cfg)?;
        if step.objective <= f {
            c = step.c_x_star;
            f = step.objective;
        }
        let step = bisect_power_with(sys, target, c, cfg, Method::UpperBound)?;
        if step.objective <= f {
            p = step.p_r_star;
            f = step.objective;
        }
        trace.push(TracePoint {
            p_r: p,
            c_x: c,
            objective: f,
        });
        if before - f < cfg.f_tol {
            converged = true;
            break;
        }
    }
    for (i, w) in trace.windows(2).enumerate() {
        if w[1].objective > w[0].objective {
            return Err(OptError::NonMonotone {
                iteration: i + 1,
                before: w[0].objective,
                after: w[1].objective,
            });
        }
    }
    Ok(OptResult {
        p_r_star: p,
        c_x_star: c,
        objective: f,
        method: Method::UpperBound,
        iterations,
        converged,
        trace,
    })
}

/// Relay-power grid `P_max·i/n`, `i = 1..=n`, covering `(0, P_max]`.
pub fn power_axis(p_max: f64, n: usize) -> Vec<f64> {
    (1..=n).map(|i| (p_max * i as f64 / n as f64).min(p_max)).collect()
}

/// Circularity grid `j/(n-1)`, `j = 0..n`, covering `[0, 1]`.
pub fn circularity_axis(n: usize) -> Vec<f64> {
    (0..n).map(|j| j as f64 / (n - 1) as f64).collect()
}

/// Exhaustive search of `f` over `p_axis × c_axis`. Ties go to the smallest
/// `p_r`, then the smallest `c_x`, independent of thread scheduling.
pub fn grid_search_fn<F>(p_axis: &[f64], c_axis: &[f64], sense: Sense, method: Method, f: F) -> Result<OptResult, OptError>
where
    F: Fn(f64, f64) -> Result<f64, OptError> + Sync,
{
    if p_axis.is_empty() || c_axis.is_empty() {
        return Err(OptError::InvalidConfig("empty grid axis".into()));
    }
    let key = |v: f64| match sense {
        Sense::Minimize => v,
        Sense::Maximize => -v,
    };
    let rows: Vec<(f64, usize, usize, f64)> = p_axis
        .par_iter()
        .enumerate()
        .map(|(i, &p)| {
            let mut best: Option<(f64, usize, usize, f64)> = None;
            for (j, &c) in c_axis.iter().enumerate() {
                let v = f(p, c)?;
                let k = key(v);
                if best.is_none_or(|b| k < b.0) {
                    best = Some((k, i, j, v));
                }
            }
            Ok(best.expect("nonempty axis"))
        })
        .collect::<Result<_, OptError>>()?;
    let mut best = rows[0];
    for r in &rows[1..] {
        if r.0 < best.0 {
            best = *r;
        }
    }
    Ok(OptResult {
        p_r_star: p_axis[best.1],
        c_x_star: c_axis[best.2],
        objective: best.3,
        method,
        iterations: p_axis.len() * c_axis.len(),
        converged: true,
        trace: Vec::new(),
    })
}

fn metric_method(metric: Metric) -> Method {
    match metric {
        Metric::OutageExact | Metric::ErgodicExact => Method::ExactIntegral,
        Metric::OutageLowerBound | Metric::ErgodicLowerBound => Method::LowerBound,
        Metric::OutageUpperBound | Metric::ErgodicUpperBound => Method::UpperBound,
    }
}

/// 2D grid search of a metric over `(0, P_max] × [0, 1]`.
pub fn grid_search(
    sys: &SystemParams,
    target: &RateTarget,
    metric: Metric,
    cfg: &SearchConfig,
    quad: &QuadratureConfig,
) -> Result<OptResult, OptError> {
    cfg.validate()?;
    let p_axis = power_axis(sys.p_max(), cfg.grid_n);
    let c_axis = circularity_axis(cfg.grid_n);
    grid_search_fn(&p_axis, &c_axis, metric.sense(), metric_method(metric), |p, c| {
        Ok(evaluate_metric(sys, target, metric, p, c, quad)?.value)
    })
}

/// 1D grid search over `C_x` at fixed relay power.
pub fn grid_search_cx(
    sys: &SystemParams,
    target: &RateTarget,
    metric: Metric,
    p_r: f64,
    cfg: &SearchConfig,
    quad: &QuadratureConfig,
) -> Result<OptResult, OptError> {
    cfg.validate()?;
    let c_axis = circularity_axis(cfg.grid_n);
    grid_search_fn(&[p_r], &c_axis, metric.sense(), metric_method(metric), |p, c| {
        Ok(evaluate_metric(sys, target, metric, p, c, quad)?.value)
    })
}

/// 1D grid search over `P_r` at fixed circularity.
pub fn grid_search_pr(
    sys: &SystemParams,
    target: &RateTarget,
    metric: Metric,
    c_x: f64,
    cfg: &SearchConfig,
    quad: &QuadratureConfig,
) -> Result<OptResult, OptError> {
    cfg.validate()?;
    let p_axis = power_axis(sys.p_max(), cfg.grid_n);
    grid_search_fn(&p_axis, &[c_x], metric.sense(), metric_method(metric), |p, c| {
        Ok(evaluate_metric(sys, target, metric, p, c, quad)?.value)
    })
}
