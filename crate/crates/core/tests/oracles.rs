//! Cross-checks against oracles written independently of the library paths:
//! root finding on the rate functions plus composite Simpson quadrature.

use igsfdr::model::{LinkStat, RateTarget, SignalParams, SystemParams};
use igsfdr::outage::{asymptotic_k, p_e2e_lb, p_e2e_rayleigh_ub, p_rd_exact, p_sr_exact, p_sr_lb};
use igsfdr::quad::QuadratureConfig;
use igsfdr::rates::{rate_rd, rate_sr, ChannelRealization};
use igsfdr::specfun::tricomi_u;
use statrs::distribution::{ContinuousCDF, Gamma};

fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// Smallest `g` with `rate(g) >= r`, for a rate increasing in `g`.
fn rate_root<F: Fn(f64) -> f64>(rate: F, r: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 1.0);
    while rate(hi) < r {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if rate(mid) < r {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn gamma_of(l: LinkStat) -> Gamma {
    Gamma::new(f64::from(l.m()), 1.0 / l.theta()).unwrap()
}

fn gamma_pdf(l: LinkStat, x: f64) -> f64 {
    use statrs::distribution::Continuous;
    gamma_of(l).pdf(x)
}

fn nakagami_sys(m: u32) -> SystemParams {
    SystemParams::new(
        LinkStat::new(m, 100.0).unwrap(),
        LinkStat::new(m, 100.0).unwrap(),
        LinkStat::new(2, 10.0).unwrap(),
        LinkStat::new(2, 2.0).unwrap(),
        1.0,
        1.0,
    )
    .unwrap()
}

#[test]
fn pgs_rayleigh_closed_form() {
    let sys = SystemParams::reference_scenario(1).unwrap().with_sd(LinkStat::rayleigh(2.0).unwrap());
    let t = RateTarget::new(1.0).unwrap();
    let sig = SignalParams::new(&sys, 1.0, 0.0).unwrap();
    // Product of the two hop success probabilities, PGS, η = 1.
    let sr = (-0.01f64).exp() / (1.0 + 10.0 / 100.0);
    let rd = (-0.01f64).exp() / (1.0 + 2.0 / 100.0);
    let expected = 1.0 - sr * rd;
    assert!((p_e2e_lb(&sys, &sig, &t).unwrap().value - expected).abs() < 1e-12);
    assert!((expected - 0.126_382_644_11).abs() < 1e-10);
}

#[test]
fn sr_lower_bound_value() {
    let sys = SystemParams::reference_scenario(1).unwrap();
    let t = RateTarget::new(1.0).unwrap();
    let sig = SignalParams::new(&sys, 1.0, 0.0).unwrap();
    let expected = 1.0 - 100.0 * (-0.01f64).exp() / 110.0;
    assert!((p_sr_lb(&sys, &sig, &t).unwrap().value - expected).abs() < 1e-12);
}

#[test]
fn rd_exact_matches_root_and_simpson() {
    let t = RateTarget::new(1.0).unwrap();
    for m in [1, 2, 3] {
        let sys = nakagami_sys(m);
        for (p_r, c) in [(1.0, 0.0), (0.5, 0.6), (0.8, 1.0)] {
            let sig = SignalParams::new(&sys, p_r, c).unwrap();
            let g_rd = gamma_of(sys.rd());
            let integrand = |g_sd: f64| {
                let root = rate_root(|g| rate_rd(&sys, &sig, &ChannelRealization::new(0.0, g, 0.0, g_sd).unwrap()), t.r());
                gamma_pdf(sys.sd(), g_sd) * g_rd.cdf(root)
            };
            let oracle = simpson(integrand, 0.0, 60.0 * sys.sd().theta(), 4000);
            let got = p_rd_exact(&sys, &sig, &t).unwrap().value;
            assert!((got - oracle).abs() < 1e-8, "m={m} p_r={p_r} c={c}: {got} vs {oracle}");
        }
    }
}

#[test]
fn sr_exact_matches_root_and_simpson() {
    let t = RateTarget::new(1.0).unwrap();
    let q = QuadratureConfig::default();
    for m in [1, 2, 3] {
        let sys = nakagami_sys(m);
        for (p_r, c) in [(1.0, 0.0), (0.5, 0.6), (0.8, 0.95)] {
            let sig = SignalParams::new(&sys, p_r, c).unwrap();
            let g_sr = gamma_of(sys.sr());
            let integrand = |g_rr: f64| {
                let root = rate_root(|g| rate_sr(&sys, &sig, &ChannelRealization::new(g, 0.0, g_rr, 0.0).unwrap()), t.r());
                gamma_pdf(sys.rr(), g_rr) * g_sr.cdf(root)
            };
            let oracle = simpson(integrand, 0.0, 60.0 * sys.rr().theta(), 4000);
            let got = p_sr_exact(&sys, &sig, &t, &q).unwrap().value;
            assert!((got - oracle).abs() < 1e-8, "m={m} p_r={p_r} c={c}: {got} vs {oracle}");
        }
    }
}

#[test]
fn asymptote_is_limit_of_upper_bound() {
    let t = RateTarget::new(1.0).unwrap();
    let base = SystemParams::reference_scenario(1).unwrap().with_sd(LinkStat::rayleigh(2.0).unwrap());
    let k = asymptotic_k(&base, &t, 1.0).unwrap();
    // K = 1 - e^{-(γ/(2P_rπ_rd) + γ/(P_sπ_sr))} · 2P_rπ_rd/(2P_rπ_rd + γP_sπ_sd), γ = 3.
    let expected = 1.0 - (-(3.0 / 200.0 + 3.0 / 100.0f64)).exp() * 200.0 / 206.0;
    assert!((k - expected).abs() < 1e-14);
    assert!((k - 0.071_847_105).abs() < 1e-9);
    let far = base.with_rr(LinkStat::rayleigh(1e12).unwrap());
    let ub = p_e2e_rayleigh_ub(&far, &SignalParams::new(&far, 1.0, 1.0).unwrap(), &t).unwrap().value;
    assert!((ub - k).abs() < 1e-9);
}

#[test]
fn tricomi_matches_simpson() {
    let u = |a: f64, b: f64, z: f64| {
        let g = statrs::function::gamma::gamma(a);
        simpson(|t: f64| t.powf(a - 1.0) * (1.0 + t).powf(b - a - 1.0) * (-z * t).exp(), 0.0, 80.0 / z, 200_000) / g
    };
    for (a, b, z) in [(1.0, 0.0, 2.0), (2.0, -1.0, 0.5), (3.0, -2.0, 1.5), (1.0, 1.0, 1.0)] {
        let got = tricomi_u(a, b, z).unwrap();
        let oracle = u(a, b, z);
        assert!(((got - oracle) / oracle).abs() < 1e-9, "U({a},{b},{z}) = {got} vs {oracle}");
    }
}
