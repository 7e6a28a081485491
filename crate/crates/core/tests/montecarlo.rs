//! Monte Carlo agreement with the analytic expressions.

use igsfdr::ergodic::{r_e2e_rayleigh_lb, r_e2e_ub};
use igsfdr::model::{LinkStat, RateTarget, SignalParams, SystemParams};
use igsfdr::montecarlo::{estimate_ergodic, estimate_hdr_outage, estimate_hop_outages, estimate_outage, McConfig};
use igsfdr::outage::{p_e2e_exact, p_rd_exact, p_sr_exact};
use igsfdr::quad::QuadratureConfig;
use igsfdr::validation::throughput_row;

fn mc(seed: u64) -> McConfig {
    McConfig::new(1_000_000, seed).unwrap()
}

#[test]
fn outage_matches_exact() {
    let t = RateTarget::new(1.0).unwrap();
    let q = QuadratureConfig::default();
    for (m, c, seed) in [(1, 0.0, 11), (2, 0.9, 12), (3, 0.5, 13)] {
        let sys = SystemParams::reference_scenario(m).unwrap();
        let sig = SignalParams::new(&sys, 1.0, c).unwrap();
        let exact = p_e2e_exact(&sys, &sig, &t, &q).unwrap().value;
        let est = estimate_outage(&sys, &sig, &t, &mc(seed)).unwrap();
        assert!(est.z_score(exact) <= 3.0, "m={m} c={c}: exact={exact} mc={}±{}", est.mean, est.stderr);
    }
}

#[test]
fn hop_outages_factorize() {
    let sys = SystemParams::reference_scenario(2).unwrap();
    let t = RateTarget::new(1.5).unwrap();
    let q = QuadratureConfig::default();
    let sig = SignalParams::new(&sys, 0.6, 0.7).unwrap();
    let [sr, rd, joint] = estimate_hop_outages(&sys, &sig, &t, &mc(21)).unwrap();
    let product = 1.0 - (1.0 - sr.mean) * (1.0 - rd.mean);
    let se = joint.stderr.hypot((1.0 - rd.mean) * sr.stderr).hypot((1.0 - sr.mean) * rd.stderr);
    assert!((product - joint.mean).abs() <= 3.0 * se);
    assert!(sr.z_score(p_sr_exact(&sys, &sig, &t, &q).unwrap().value) <= 3.0);
    assert!(rd.z_score(p_rd_exact(&sys, &sig, &t).unwrap().value) <= 3.0);
}

#[test]
fn ergodic_matches_exact_bound_at_pgs() {
    let sys = SystemParams::reference_scenario(1).unwrap();
    let q = QuadratureConfig::default();
    let sig = SignalParams::new(&sys, 1.0, 0.0).unwrap();
    let ub = r_e2e_ub(&sys, &sig, &q).unwrap().value;
    let est = estimate_ergodic(&sys, &sig, &mc(31)).unwrap();
    assert!(est.z_score(ub) <= 3.0, "ub={ub} mc={}±{}", est.mean, est.stderr);
}

#[test]
fn ergodic_sandwich_on_grid() {
    let sys = SystemParams::reference_scenario(1).unwrap();
    let q = QuadratureConfig::default();
    let mut seed = 40;
    for p_r in [0.3, 1.0] {
        for c in [0.2, 0.6, 0.95] {
            let sig = SignalParams::new(&sys, p_r, c).unwrap();
            let lb = r_e2e_rayleigh_lb(&sys, &sig).unwrap().value;
            let ub = r_e2e_ub(&sys, &sig, &q).unwrap().value;
            let est = estimate_ergodic(&sys, &sig, &mc(seed)).unwrap();
            seed += 1;
            assert!(lb <= est.mean + 3.0 * est.stderr && est.mean - 3.0 * est.stderr <= ub);
        }
    }
}

#[test]
fn vanishing_source_link_kills_ergodic_rate() {
    let sys = SystemParams::reference_scenario(1).unwrap().with_sr(LinkStat::rayleigh(1e-9).unwrap());
    let sig = SignalParams::new(&sys, 1.0, 0.5).unwrap();
    let est = estimate_ergodic(&sys, &sig, &McConfig::new(20_000, 1).unwrap()).unwrap();
    assert!(est.mean < 1e-6);
}

#[test]
fn mrc_never_worse_than_mhdf() {
    let sys = SystemParams::reference_scenario(1).unwrap();
    for r in [0.5, 1.5, 2.5] {
        let t = RateTarget::new(r).unwrap();
        let plain = estimate_hdr_outage(&sys, &t, false, &mc(51)).unwrap();
        let mrc = estimate_hdr_outage(&sys, &t, true, &mc(51)).unwrap();
        assert!(mrc.mean <= plain.mean, "r={r}");
    }
}

#[test]
fn hdr_beats_fdr_somewhere_at_strong_rsi() {
    let sys = SystemParams::reference_scenario(1).unwrap().with_rr(LinkStat::rayleigh(10f64.powf(1.5)).unwrap());
    let found = [0.5, 1.0, 2.0, 3.0].into_iter().any(|r| {
        let row = throughput_row(&sys, &RateTarget::new(r).unwrap(), 20, &mc(61)).unwrap();
        row.hdr_mrc.mean - row.fdr_igs > 3.0 * row.hdr_mrc.stderr
    });
    assert!(found);
}
