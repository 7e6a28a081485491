//! The acceptance suite as library code, shared by the `validate` command
//! and the acceptance test target.
//!
//! Each criterion returns an [`Outcome`] carrying the measured statistic,
//! its threshold, and the wall time spent.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::ergodic::{r_e2e_exact, r_e2e_rayleigh_lb, r_e2e_ub, r_e2e_ub_closed_form, r_e2e_ub_quadrature, ErgodicError};
use crate::model::{LinkStat, ModelError, RateTarget, SignalParams, SystemParams};
use crate::montecarlo::{estimate_ergodic, estimate_hdr_outage, estimate_outage, McConfig, McError, McEstimate};
use crate::optimize::{
    bisect_circularity, bisect_power, circularity_axis, coordinate_descent, grid_search, grid_search_cx, grid_search_fn,
    grid_search_pr, power_axis, ub_derivative_cx, ub_derivative_pr, Metric, OptError, SearchConfig, Sense,
};
use crate::outage::{
    asymptotic_k, convexity_witness, p_e2e_exact, p_e2e_lb, p_e2e_rayleigh_ub, Method, OutageError,
};
use crate::quad::{integrate, integrate_semi_infinite, QuadError, QuadratureConfig};
use crate::specfun::{
    exp_integral_en, gamma_int, ln_upper_incomplete_gamma_int, tricomi_u, upper_incomplete_gamma_int, xi_n, SpecFunError,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValidationError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Outage(#[from] OutageError),
    #[error(transparent)]
    Ergodic(#[from] ErgodicError),
    #[error(transparent)]
    Opt(#[from] OptError),
    #[error(transparent)]
    Mc(#[from] McError),
    #[error(transparent)]
    SpecFun(#[from] SpecFunError),
    #[error(transparent)]
    Quad(#[from] QuadError),
    #[error("unknown criterion {0}")]
    UnknownCriterion(String),
}

/// Knobs for the stochastic parts of the suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ValidationOptions {
    pub seed: u64,
    pub mc_samples: u64,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        Self {
            seed: 2017,
            mc_samples: 1_000_000,
        }
    }
}

impl ValidationOptions {
    fn mc(&self, stream: u64) -> Result<McConfig, McError> {
        McConfig::new(self.mc_samples, self.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(stream))
    }

    fn rng(&self, salt: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(salt);
        rng
    }
}

/// Result of one criterion. `measured <= threshold` is the numeric test;
/// `passed` also folds in any runtime budget and secondary conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub id: &'static str,
    pub title: &'static str,
    pub passed: bool,
    pub measured: f64,
    pub threshold: f64,
    pub elapsed: Duration,
    pub budget: Option<Duration>,
    pub detail: String,
}

impl Outcome {
    pub fn line(&self) -> String {
        let budget = self.budget.map_or(String::new(), |b| format!(" / budget {:.0}s", b.as_secs_f64()));
        format!(
            "[{}] {:<4} {:<34} measured={:.6e} threshold={:.3e} time={:.2}s{} {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.measured,
            self.threshold,
            self.elapsed.as_secs_f64(),
            budget,
            self.detail
        )
    }
}

struct Builder {
    id: &'static str,
    title: &'static str,
    start: Instant,
    budget: Option<Duration>,
}

impl Builder {
    fn new(id: &'static str, title: &'static str, budget_s: Option<u64>) -> Self {
        Self {
            id,
            title,
            start: Instant::now(),
            budget: budget_s.map(Duration::from_secs),
        }
    }

    fn finish(self, ok: bool, measured: f64, threshold: f64, detail: String) -> Outcome {
        let elapsed = self.start.elapsed();
        let in_budget = self.budget.is_none_or(|b| elapsed <= b);
        Outcome {
            id: self.id,
            title: self.title,
            passed: ok && in_budget,
            measured,
            threshold,
            elapsed,
            budget: self.budget,
            detail,
        }
    }
}

pub const CRITERIA: [&str; 15] = ["1", "2", "3", "4", "5", "6", "7", "8", "9", "10a", "10b", "10c", "10d", "11", "12"];

/// Runs one criterion by id.
pub fn run_criterion(id: &str, opts: &ValidationOptions) -> Result<Outcome, ValidationError> {
    match id {
        "1" => closed_form_anchor(opts),
        "2" => oracle_agreement(opts),
        "3" => bound_ordering(),
        "4" => ergodic_ub_consistency(),
        "5" => ergodic_sandwich(opts),
        "6" => pgs_exactness(),
        "7" => rsi_immunity(),
        "8" => unimodality(opts),
        "9" => solver_agreement(opts),
        "10a" => fig_rsi_trend(),
        "10b" => fig_power_budget(),
        "10c" => fig_throughput_regions(opts),
        "10d" => one_d_vs_two_d(),
        "11" => special_functions(),
        "12" => convexity(opts),
        other => Err(ValidationError::UnknownCriterion(other.to_string())),
    }
}

/// Runs every criterion in order. Errors inside a criterion become a failed
/// outcome so the report is always complete.
pub fn run_all(opts: &ValidationOptions) -> Vec<Outcome> {
    CRITERIA
        .iter()
        .map(|id| {
            run_criterion(id, opts).unwrap_or_else(|e| Outcome {
                id: CRITERIA.iter().find(|c| *c == id).copied().unwrap_or("?"),
                title: "error",
                passed: false,
                measured: f64::NAN,
                threshold: f64::NAN,
                elapsed: Duration::ZERO,
                budget: None,
                detail: e.to_string(),
            })
        })
        .collect()
}

fn db(x: f64) -> f64 {
    10f64.powf(x / 10.0)
}

/// Reference scenario with a unit-free `π_sd = 2` (the value the pinned
/// references use) and the given `π_rr` in dB.
fn reference_scenario_sd2(m: u32, pi_rr_db: f64) -> Result<SystemParams, ModelError> {
    Ok(SystemParams::reference_scenario(m)?
        .with_sd(LinkStat::rayleigh(2.0)?)
        .with_rr(LinkStat::rayleigh(db(pi_rr_db))?))
}

fn reference_scenario_rr(m: u32, pi_rr_db: f64) -> Result<SystemParams, ModelError> {
    Ok(SystemParams::reference_scenario(m)?.with_rr(LinkStat::rayleigh(db(pi_rr_db))?))
}

/// Exact PGS Rayleigh outage written out term by term.
pub fn pgs_rayleigh_direct(sys: &SystemParams, target: &RateTarget, p_r: f64) -> f64 {
    let eta = target.eta();
    let sr = (-eta / (sys.p_s() * sys.sr().pi())).exp() / (1.0 + p_r * sys.rr().pi() * eta / (sys.p_s() * sys.sr().pi()));
    let rd = (-eta / (p_r * sys.rd().pi())).exp() / (1.0 + sys.p_s() * sys.sd().pi() * eta / (p_r * sys.rd().pi()));
    1.0 - sr * rd
}

pub const PGS_EXACT_REFERENCE: f64 = 0.126_382_644_11;
pub const PGS_EXACT_REFERENCE_ROUNDED: f64 = 0.126_382;

fn closed_form_anchor(opts: &ValidationOptions) -> Result<Outcome, ValidationError> {
    let b = Builder::new("1", "closed-form anchor (PGS Rayleigh)", Some(5));
    let sys = reference_scenario_sd2(1, 10.0)?;
    let t = RateTarget::new(1.0)?;
    let sig = SignalParams::new(&sys, 1.0, 0.0)?;
    let lb = p_e2e_lb(&sys, &sig, &t)?.value;
    let direct = pgs_rayleigh_direct(&sys, &t, 1.0);
    let mc = estimate_outage(&sys, &sig, &t, &opts.mc(1)?)?;
    let err = (lb - direct).abs().max((lb - PGS_EXACT_REFERENCE).abs());
    let z = mc.z_score(lb);
    // The stated reference carries six truncated decimals.
    let rounded_ok = (lb - PGS_EXACT_REFERENCE_ROUNDED).abs() < 1e-6;
    Ok(b.finish(
        err <= 1e-9 && z <= 3.0 && rounded_ok,
        err,
        1e-9,
        format!("lb={lb:.11} direct={direct:.11} mc={:.6}±{:.1e} z={z:.2}", mc.mean, mc.stderr),
    ))
}

fn oracle_agreement(opts: &ValidationOptions) -> Result<Outcome, ValidationError> {
    let b = Builder::new("2", "exact outage vs Monte Carlo", Some(600));
    let t = RateTarget::new(1.0)?;
    let quad = QuadratureConfig::default();
    let mut worst: (f64, String) = (0.0, String::new());
    let mut stream = 100;
    for m in [1u32, 2] {
        let sys = SystemParams::reference_scenario(m)?;
        for p_r in [0.2, 0.4, 0.6, 0.8, 1.0] {
            for c_x in [0.0, 0.25, 0.5, 0.75, 1.0] {
                let sig = SignalParams::new(&sys, p_r, c_x)?;
                let exact = p_e2e_exact(&sys, &sig, &t, &quad)?.value;
                let mc = estimate_outage(&sys, &sig, &t, &opts.mc(stream)?)?;
                stream += 1;
                let z = mc.z_score(exact);
                if z > worst.0 {
                    worst = (z, format!("worst at m={m} P_r={p_r} C_x={c_x}: exact={exact:.6} mc={:.6}", mc.mean));
                }
            }
        }
    }
    Ok(b.finish(worst.0 <= 3.0, worst.0, 3.0, worst.1))
}

fn bound_ordering() -> Result<Outcome, ValidationError> {
    let b = Builder::new("3", "outage bound ordering", Some(120));
    let sys = SystemParams::reference_scenario(1)?;
    let t = RateTarget::new(1.0)?;
    let quad = QuadratureConfig::default();
    let mut min_slack = f64::INFINITY;
    let mut at = String::new();
    for i in 1..=21 {
        let p_r = i as f64 / 21.0;
        for j in 0..=20 {
            let c_x = j as f64 / 20.0;
            let sig = SignalParams::new(&sys, p_r, c_x)?;
            let lb = p_e2e_lb(&sys, &sig, &t)?.value;
            let ex = p_e2e_exact(&sys, &sig, &t, &quad)?.value;
            let ub = p_e2e_rayleigh_ub(&sys, &sig, &t)?.value;
            let s = (ex - lb).min(ub - ex);
            if s < min_slack {
                min_slack = s;
                at = format!("min slack at P_r={p_r:.3} C_x={c_x:.2}");
            }
        }
    }
    Ok(b.finish(min_slack >= -1e-9, -min_slack, 1e-9, at))
}

fn ergodic_ub_consistency() -> Result<Outcome, ValidationError> {
    let b = Builder::new("4", "ergodic UB closed form vs integral", Some(120));
    let quad = QuadratureConfig::default();
    let mut worst = 0.0f64;
    for m in 1..=3 {
        let sys = SystemParams::reference_scenario(m)?;
        for c_x in [0.0, 0.5, 0.9] {
            let sig = SignalParams::new(&sys, 1.0, c_x)?;
            let cf = r_e2e_ub_closed_form(&sys, &sig)?;
            let q = r_e2e_ub_quadrature(&sys, &sig, &quad)?;
            worst = worst.max((cf - q).abs());
        }
    }
    Ok(b.finish(worst <= 1e-6, worst, 1e-6, String::new()))
}

fn ergodic_sandwich(opts: &ValidationOptions) -> Result<Outcome, ValidationError> {
    let b = Builder::new("5", "ergodic LB <= MC <= UB", Some(300));
    let sys = SystemParams::reference_scenario(1)?;
    let quad = QuadratureConfig::default();
    let mut worst = f64::INFINITY;
    let mut detail = String::new();
    for (k, c_x) in [0.0, 0.3, 0.6, 0.9].into_iter().enumerate() {
        let sig = SignalParams::new(&sys, 1.0, c_x)?;
        let lb = r_e2e_rayleigh_lb(&sys, &sig)?.value;
        let ub = r_e2e_ub(&sys, &sig, &quad)?.value;
        let mc = estimate_ergodic(&sys, &sig, &opts.mc(200 + k as u64)?)?;
        let margin = (mc.mean + 3.0 * mc.stderr - lb).min(ub - (mc.mean - 3.0 * mc.stderr));
        if margin < worst {
            worst = margin;
            detail = format!("tightest at C_x={c_x}: lb={lb:.5} mc={:.5} ub={ub:.5}", mc.mean);
        }
    }
    Ok(b.finish(worst >= 0.0, -worst, 0.0, detail))
}

fn pgs_exactness() -> Result<Outcome, ValidationError> {
    let b = Builder::new("6", "bounds exact at C_x = 0", None);
    let t = RateTarget::new(1.0)?;
    let quad = QuadratureConfig::default();
    let mut worst = 0.0f64;
    for m in 1..=3 {
        let sys = SystemParams::reference_scenario(m)?;
        for p_r in [0.3, 1.0] {
            let sig = SignalParams::new(&sys, p_r, 0.0)?;
            let lb = p_e2e_lb(&sys, &sig, &t)?.value;
            let ex = p_e2e_exact(&sys, &sig, &t, &quad)?.value;
            let ub = r_e2e_ub(&sys, &sig, &quad)?.value;
            let er = r_e2e_exact(&sys, &sig, &quad)?.value;
            worst = worst.max((lb - ex).abs()).max((ub - er).abs());
        }
    }
    Ok(b.finish(worst <= 1e-8, worst, 1e-8, String::new()))
}

pub const K_REFERENCE: f64 = 0.070_918;

fn rsi_immunity() -> Result<Outcome, ValidationError> {
    let b = Builder::new("7", "asymptotic RSI immunity", None);
    let sys = reference_scenario_sd2(1, 60.0)?;
    let t = RateTarget::new(1.0)?;
    let k = asymptotic_k(&sys, &t, 1.0)?;
    let ub = p_e2e_rayleigh_ub(&sys, &SignalParams::new(&sys, 1.0, 1.0)?, &t)?.value;
    let pgs = p_e2e_exact(&sys, &SignalParams::new(&sys, 1.0, 0.0)?, &t, &QuadratureConfig::default())?.value;
    let gap = (ub - k).abs();
    Ok(b.finish(
        gap <= 1e-3 && pgs >= 0.99,
        gap,
        1e-3,
        format!("K={k:.7} (stated {K_REFERENCE}) ub={ub:.7} pgs_exact={pgs:.5}"),
    ))
}

/// A random Rayleigh configuration for the property sweeps.
pub fn random_rayleigh<R: Rng>(rng: &mut R) -> Result<(SystemParams, RateTarget), ModelError> {
    let sr = LinkStat::rayleigh(db(rng.random_range(10.0..30.0)))?;
    let rd = LinkStat::rayleigh(db(rng.random_range(10.0..30.0)))?;
    let rr = LinkStat::rayleigh(db(rng.random_range(0.0..30.0)))?;
    let sd = LinkStat::rayleigh(db(rng.random_range(-5.0..10.0)))?;
    let p_max = rng.random_range(0.5..2.0);
    let p_s = p_max * rng.random_range(0.2..1.0);
    let sys = SystemParams::new(sr, rd, rr, sd, p_s, p_max)?;
    Ok((sys, RateTarget::new(rng.random_range(0.25..3.0))?))
}

fn sign_changes(xs: &[f64]) -> usize {
    let signs: Vec<bool> = xs.iter().filter(|v| **v != 0.0).map(|v| *v > 0.0).collect();
    signs.windows(2).filter(|w| w[0] != w[1]).count()
}

/// Central difference of `f` at `x` with the rounding floor of the
/// difference quotient for `f` valued in `[0, 1]`.
fn central_difference<F: Fn(f64) -> Result<f64, ValidationError>>(f: F, x: f64, h: f64) -> Result<(f64, f64), ValidationError> {
    let (hi, lo) = (f(x + h)?, f(x - h)?);
    // `1 - UB` carries an absolute rounding error of order ε for any UB in [0, 1].
    let floor = 10.0 * f64::EPSILON / h;
    Ok(((hi - lo) / (2.0 * h), floor))
}

/// Analytic-vs-difference mismatch in units of `1e-3·|fd|` plus the
/// rounding floor; at most 1 when they agree to relative `1e-3`.
fn fd_ratio(analytic: f64, fd: f64, floor: f64) -> f64 {
    (analytic - fd).abs() / (1e-3 * fd.abs() + floor)
}

fn ub_complement(sys: &SystemParams, t: &RateTarget, p_r: f64, c_x: f64) -> Result<f64, ValidationError> {
    Ok(1.0 - p_e2e_rayleigh_ub(sys, &SignalParams::new(sys, p_r, c_x)?, t)?.value)
}

fn unimodality(opts: &ValidationOptions) -> Result<Outcome, ValidationError> {
    let b = Builder::new("8", "unimodality certificate", None);
    let mut rng = opts.rng(8);
    let mut max_changes = 0usize;
    let mut worst_fd = 0.0f64;
    let mut detail = String::new();
    for draw in 0..200 {
        let (sys, t) = random_rayleigh(&mut rng)?;
        let p_fix = (sys.p_max() * rng.random_range(0.05..1.0)).min(sys.p_max());
        let c_fix = rng.random_range(0.0..1.0);
        let c_axis: Vec<f64> = (0..=2000).map(|j| j as f64 / 2000.0).collect();
        let p_axis = power_axis(sys.p_max(), 2001);
        let dc: Vec<f64> = c_axis.iter().map(|&c| ub_derivative_cx(&sys, &t, p_fix, c)).collect::<Result<_, _>>()?;
        let dp: Vec<f64> = p_axis.iter().map(|&p| ub_derivative_pr(&sys, &t, p, c_fix)).collect::<Result<_, _>>()?;
        let changes = sign_changes(&dc).max(sign_changes(&dp));
        if changes > max_changes {
            max_changes = changes;
            detail = format!("draw {draw}: {changes} sign changes");
        }
        for j in (50..2000).step_by(50) {
            let (fd, floor) = central_difference(|c| ub_complement(&sys, &t, p_fix, c), c_axis[j], 1e-5)?;
            worst_fd = worst_fd.max(fd_ratio(dc[j], fd, floor));
            let (fd, floor) = central_difference(|p| ub_complement(&sys, &t, p, c_fix), p_axis[j], 1e-5 * p_axis[j])?;
            worst_fd = worst_fd.max(fd_ratio(dp[j], fd, floor));
        }
    }
    Ok(b.finish(
        max_changes <= 1 && worst_fd <= 1.0,
        worst_fd,
        1.0,
        format!("max sign changes={max_changes} {detail}"),
    ))
}

fn solver_agreement(opts: &ValidationOptions) -> Result<Outcome, ValidationError> {
    let b = Builder::new("9", "solver agreement vs grid", Some(300));
    let mut rng = opts.rng(9);
    let cfg = SearchConfig::default();
    let quad = QuadratureConfig::default();
    let mut worst = 0.0f64;
    let mut below_grid = 0.0f64;
    let mut monotone = true;
    let mut detail = String::new();
    for draw in 0..25 {
        let (sys, t) = random_rayleigh(&mut rng)?;
        let p_fix = sys.p_max();
        let c_fix = rng.random_range(0.05..1.0);

        let bc = bisect_circularity(&sys, &t, p_fix, &cfg)?;
        let gc = grid_search_cx(&sys, &t, Metric::OutageUpperBound, p_fix, &cfg, &quad)?;
        let bp = bisect_power(&sys, &t, c_fix, &cfg)?;
        let gp = grid_search_pr(&sys, &t, Metric::OutageUpperBound, c_fix, &cfg, &quad)?;
        let b0 = bisect_power(&sys, &t, 0.0, &cfg)?;
        let g0 = grid_search_fn(&power_axis(sys.p_max(), cfg.grid_n), &[0.0], Sense::Minimize, Method::ClosedFormExact, |p, _| {
            Ok(pgs_rayleigh_direct(&sys, &t, p))
        })?;
        let cd = coordinate_descent(&sys, &t, &cfg)?;
        let g2 = grid_search(&sys, &t, Metric::OutageUpperBound, &cfg, &quad)?;
        monotone &= cd.trace.windows(2).all(|w| w[1].objective <= w[0].objective);
        for (name, gap) in [
            ("1d-cx", bc.objective - gc.objective),
            ("1d-pr", bp.objective - gp.objective),
            ("1d-pr pgs", b0.objective - g0.objective),
            ("2d-cd", cd.objective - g2.objective),
        ] {
            below_grid = below_grid.max(-gap);
            if gap > worst {
                worst = gap;
                detail = format!("worst: draw {draw} {name} gap={gap:.3e}");
            }
        }
    }
    // A solver landing below the grid optimum is a grid-resolution effect,
    // reported but not counted against the solver.
    Ok(b.finish(
        worst <= 1e-4 && monotone,
        worst,
        1e-4,
        format!("{detail} max solver advantage={below_grid:.3e} traces monotone={monotone}"),
    ))
}

fn fig_rsi_trend() -> Result<Outcome, ValidationError> {
    let b = Builder::new("10a", "RSI trend: IGS flat, PGS rising", None);
    let t = RateTarget::new(1.0)?;
    let cfg = SearchConfig::default();
    let mut igs = Vec::new();
    let mut pgs = Vec::new();
    for k in 0..=10 {
        let sys = reference_scenario_rr(1, 25.0 + k as f64)?;
        igs.push(coordinate_descent(&sys, &t, &cfg)?.objective);
        pgs.push(bisect_power(&sys, &t, 0.0, &cfg)?.objective);
    }
    let lo = igs.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = igs.iter().cloned().fold(0.0, f64::max);
    let variation = (hi - lo) / lo;
    let increasing = pgs.windows(2).all(|w| w[1] > w[0]);
    Ok(b.finish(
        variation < 0.05 && increasing,
        variation,
        0.05,
        format!("igs {lo:.5}..{hi:.5}, pgs {:.4}->{:.4} strictly increasing={increasing}", pgs[0], pgs[10]),
    ))
}

/// Relay budgets for the power-budget trend, with `P_s = 1` W, `π_rr = 0` dB.
pub fn power_budget_axis() -> Vec<f64> {
    (0..=20).map(|k| 10f64.powf(k as f64 / 10.0)).collect()
}

fn fig_power_budget() -> Result<Outcome, ValidationError> {
    let b = Builder::new("10b", "power budget: PGS-MPA dip, IGS monotone", None);
    let t = RateTarget::new(1.0)?;
    let cfg = SearchConfig::default();
    let mut mpa = Vec::new();
    let mut igs = Vec::new();
    for p_max in power_budget_axis() {
        let sys = reference_scenario_rr(1, 0.0)?.with_powers(1.0, p_max)?;
        mpa.push(pgs_rayleigh_direct(&sys, &t, p_max));
        igs.push(coordinate_descent(&sys, &t, &cfg)?.objective);
    }
    let argmin = mpa
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let interior = argmin > 0 && argmin + 1 < mpa.len();
    let max_rise = igs.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    Ok(b.finish(
        interior && max_rise <= 1e-9,
        max_rise.max(0.0),
        1e-9,
        format!("PGS-MPA minimum at P_max={:.3} W (interior={interior})", power_budget_axis()[argmin]),
    ))
}

/// Optimized throughputs at one target rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThroughputRow {
    pub r: f64,
    pub fdr_pgs: f64,
    pub fdr_igs: f64,
    pub igs_p_r: f64,
    pub igs_c_x: f64,
    pub hdr_mhdf: McEstimate,
    pub hdr_mrc: McEstimate,
}

/// FDR throughputs from the exact outage (PGS by bisection on relay power,
/// IGS by an `n × n` grid that also admits the PGS optimum) and HDR
/// throughputs by Monte Carlo. HDR estimates are returned as throughput.
pub fn throughput_row(sys: &SystemParams, target: &RateTarget, grid_n: usize, mc: &McConfig) -> Result<ThroughputRow, ValidationError> {
    let cfg = SearchConfig::default();
    let quad = QuadratureConfig::default();
    let r = target.r();
    let (pgs_p, pgs_out) = if sys.is_rayleigh() {
        let o = bisect_power(sys, target, 0.0, &cfg)?;
        (o.p_r_star, o.objective)
    } else {
        let o = grid_search_fn(&power_axis(sys.p_max(), cfg.grid_n.min(201)), &[0.0], Sense::Minimize, Method::ExactIntegral, |p, c| {
            Ok(p_e2e_exact(sys, &SignalParams::new(sys, p, c)?, target, &quad)?.value)
        })?;
        (o.p_r_star, o.objective)
    };
    let grid = grid_search_fn(&power_axis(sys.p_max(), grid_n), &circularity_axis(grid_n + 1), Sense::Minimize, Method::ExactIntegral, |p, c| {
        Ok(p_e2e_exact(sys, &SignalParams::new(sys, p, c)?, target, &quad)?.value)
    })?;
    let (igs_out, igs_p, igs_c) = if grid.objective < pgs_out {
        (grid.objective, grid.p_r_star, grid.c_x_star)
    } else {
        (pgs_out, pgs_p, 0.0)
    };
    let as_throughput = |e: McEstimate| McEstimate {
        mean: r * (1.0 - e.mean),
        stderr: r * e.stderr,
        n: e.n,
    };
    Ok(ThroughputRow {
        r,
        fdr_pgs: r * (1.0 - pgs_out),
        fdr_igs: r * (1.0 - igs_out),
        igs_p_r: igs_p,
        igs_c_x: igs_c,
        hdr_mhdf: as_throughput(estimate_hdr_outage(sys, target, false, mc)?),
        hdr_mrc: as_throughput(estimate_hdr_outage(sys, target, true, mc)?),
    })
}

/// Target rates for the throughput comparison.
pub fn throughput_rates() -> Vec<f64> {
    (1..=24).map(|k| 0.25 * k as f64).collect()
}

fn fig_throughput_regions(opts: &ValidationOptions) -> Result<Outcome, ValidationError> {
    let b = Builder::new("10c", "throughput three-region order", None);
    let sys = reference_scenario_rr(1, 15.0)?;
    let mut rows = Vec::new();
    for (k, r) in throughput_rates().into_iter().enumerate() {
        rows.push(throughput_row(&sys, &RateTarget::new(r)?, 50, &opts.mc(300 + k as u64)?)?);
    }
    // Region labels: P = PGS best (IGS gives no gain), I = IGS strictly best,
    // H = HDR-MRC strictly best, '-' = none of these.
    let label = |row: &ThroughputRow| {
        let hdr = row.hdr_mrc.mean.max(row.hdr_mhdf.mean);
        let se = row.hdr_mrc.stderr.hypot(row.hdr_mhdf.stderr);
        let igs_gain = row.fdr_igs - row.fdr_pgs;
        if igs_gain <= 1e-6 && row.fdr_pgs - hdr > se {
            'P'
        } else if igs_gain > 1e-6 && row.fdr_igs - hdr > se {
            'I'
        } else if row.hdr_mrc.mean - row.fdr_igs > row.hdr_mrc.stderr && row.hdr_mrc.mean >= row.hdr_mhdf.mean {
            'H'
        } else {
            '-'
        }
    };
    let labels: String = rows.iter().map(label).collect();
    let ordered = labels.find('P').is_some_and(|p| {
        labels[p..].find('I').is_some_and(|i| labels[p + i..].contains('H'))
    });
    Ok(b.finish(
        ordered,
        if ordered { 0.0 } else { 1.0 },
        0.0,
        format!("regions over r=0.25..6 step 0.25: {labels}"),
    ))
}

fn one_d_vs_two_d() -> Result<Outcome, ValidationError> {
    let b = Builder::new("10d", "1D C_x vs 2D optimum", None);
    let t = RateTarget::new(1.0)?;
    let cfg = SearchConfig::default();
    let mut worst = 0.0f64;
    let mut at = 0.0;
    for k in 0..=16 {
        let rr_db = 2.5 * k as f64;
        let sys = reference_scenario_rr(1, rr_db)?;
        let one = bisect_circularity(&sys, &t, sys.p_max(), &cfg)?.objective;
        let two = coordinate_descent(&sys, &t, &cfg)?.objective;
        if (one - two).abs() > worst {
            worst = (one - two).abs();
            at = rr_db;
        }
    }
    Ok(b.finish(worst < 5e-3, worst, 5e-3, format!("pi_rr sweep 0..40 dB, worst at {at} dB")))
}

fn special_functions() -> Result<Outcome, ValidationError> {
    let b = Builder::new("11", "special-function suite", Some(30));
    let tight = QuadratureConfig::new(1e-13, 1e-300, 2000)?;
    // Each check: (name, error, tolerance).
    let mut checks: Vec<(String, f64, f64)> = Vec::new();
    let rel = |a: f64, b: f64| ((a - b) / b).abs();

    for (a, v) in [(1u32, 1.0), (3, 2.0), (6, 120.0)] {
        checks.push((format!("gamma_int({a})"), (gamma_int(a)? - v).abs(), 0.0));
    }
    checks.push(("Gamma(3,0)".into(), (upper_incomplete_gamma_int(3, 0.0)? - 2.0).abs(), 1e-15));
    checks.push(("Gamma(1,2)".into(), rel(upper_incomplete_gamma_int(1, 2.0)?, (-2.0f64).exp()), 1e-14));
    for a in 1..=20u32 {
        for x in [0.01, 0.1, 1.0, 10.0, 100.0] {
            let af = f64::from(a);
            let oracle = integrate(|t: f64| ((af - 1.0) * t.ln() - t).exp(), x, x + 60.0 + 4.0 * af, &tight)?.value;
            checks.push((format!("Gamma({a},{x}) vs quadrature"), rel(upper_incomplete_gamma_int(a, x)?, oracle), 1e-10));
            let log = ln_upper_incomplete_gamma_int(a, x)?;
            checks.push((format!("log Gamma({a},{x})"), rel(log.exp(), upper_incomplete_gamma_int(a, x)?), 1e-12));
        }
    }
    let e1_oracle = integrate_semi_infinite(|s: f64| (-(1.0 + s)).exp() / (1.0 + s), 1.0, &tight)?.value;
    checks.push(("E1(1) vs quadrature".into(), rel(exp_integral_en(1, 1.0)?, e1_oracle), 1e-10));
    checks.push(("E1(1) = 0.2193839".into(), (exp_integral_en(1, 1.0)? - 0.219_383_9).abs(), 5e-8));
    let x = 0.7f64;
    checks.push(("E2 recurrence at 0.7".into(), rel((-x).exp() - x * exp_integral_en(1, x)?, exp_integral_en(2, x)?), 1e-10));
    for n in 1..=10u32 {
        for x in [0.1, 0.5, 1.0, 3.0, 10.0, 30.0, 50.0] {
            let res = f64::from(n) * exp_integral_en(n + 1, x)? - (-x).exp() + x * exp_integral_en(n, x)?;
            checks.push((format!("E recurrence n={n} x={x}"), res.abs() / (-x).exp(), 1e-12));
        }
    }
    checks.push(("E2(50) asymptote".into(), rel(exp_integral_en(2, 50.0)?, (-50.0f64).exp() / 50.0), 0.05));
    checks.push(("Xi1(1) = 0.596347".into(), (xi_n(1, 1.0)? - 0.596_347).abs(), 5e-7));
    checks.push(("Xi1(1000) ~ 1/1000".into(), rel(xi_n(1, 1000.0)?, 1e-3), 2e-3));
    checks.push(("Xi3(2) vs e^2 E3(2)".into(), rel(xi_n(3, 2.0)?, 2f64.exp() * exp_integral_en(3, 2.0)?), 1e-10));
    for n in 1..=5u32 {
        let mut prev = f64::INFINITY;
        let mut worst = 0.0f64;
        let mut x = 0.01;
        while x < 2e3 {
            let v = xi_n(n, x)?;
            if v >= prev {
                worst = 1.0;
            }
            prev = v;
            x *= 1.1;
        }
        checks.push((format!("Xi{n} decreasing"), worst, 0.0));
    }
    for z in [0.05, 1.0, 5.0, 45.0] {
        checks.push((format!("U(1,1,{z}) = Xi1"), rel(tricomi_u(1.0, 1.0, z)?, xi_n(1, z)?), 1e-9));
    }
    let u_direct = |a: f64, b_: f64, z: f64| -> Result<f64, ValidationError> {
        let ga = statrs::function::gamma::gamma(a);
        let v = integrate(|t: f64| t.powf(a - 1.0) * (1.0 + t).powf(b_ - a - 1.0) * (-z * t).exp(), 0.0, 60.0 / z + 50.0, &tight)?.value;
        Ok(v / ga)
    };
    checks.push(("U(1,0,2) vs quadrature".into(), rel(tricomi_u(1.0, 0.0, 2.0)?, u_direct(1.0, 0.0, 2.0)?), 1e-9));
    checks.push(("U(2,-1,0.5) vs quadrature".into(), rel(tricomi_u(2.0, -1.0, 0.5)?, u_direct(2.0, -1.0, 0.5)?), 1e-9));
    let (a, bb, z) = (2.0, -1.0, 0.5);
    let (um, u0, up) = (tricomi_u(a - 1.0, bb, z)?, tricomi_u(a, bb, z)?, tricomi_u(a + 1.0, bb, z)?);
    let res = um + (bb - 2.0 * a - z) * u0 + a * (a - bb + 1.0) * up;
    checks.push(("Kummer recurrence at (2,-1,0.5)".into(), res.abs() / (um.abs() + ((bb - 2.0 * a - z) * u0).abs()), 1e-9));

    let failures: Vec<&(String, f64, f64)> = checks.iter().filter(|c| !(c.1 <= c.2)).collect();
    let worst_ratio = checks
        .iter()
        .map(|c| if c.2 == 0.0 { if c.1 == 0.0 { 0.0 } else { f64::INFINITY } } else { c.1 / c.2 })
        .fold(0.0, f64::max);
    let detail = match failures.first() {
        Some(f) => format!("{} of {} failed, first: {} err={:.3e} tol={:.1e}", failures.len(), checks.len(), f.0, f.1, f.2),
        None => format!("{} checks", checks.len()),
    };
    Ok(b.finish(failures.is_empty(), worst_ratio, 1.0, detail))
}

fn convexity(opts: &ValidationOptions) -> Result<Outcome, ValidationError> {
    let b = Builder::new("12", "S-R exponent concavity witness", None);
    let mut rng = opts.rng(12);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..20 {
        let (sys, t) = random_rayleigh(&mut rng)?;
        let p_r = sys.p_max() * rng.random_range(0.05..1.0);
        let g_max = 10.0 * sys.rr().pi();
        for i in 0..100 {
            let g_rr = g_max * i as f64 / 99.0;
            for j in 0..100 {
                let sig = SignalParams::new(&sys, p_r, j as f64 / 99.0)?;
                worst = worst.max(convexity_witness(&sys, &sig, &t, g_rr));
            }
        }
    }
    Ok(b.finish(worst <= 1e-9, worst, 1e-9, String::new()))
}
