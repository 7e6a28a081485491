//! Optimizer behaviour on the reference scenario.

use igsfdr::model::{LinkStat, RateTarget, SystemParams};
use igsfdr::optimize::{bisect_circularity, coordinate_descent, grid_search, Metric, SearchConfig};
use igsfdr::quad::QuadratureConfig;

fn with_rr_db(db: f64) -> SystemParams {
    SystemParams::reference_scenario(1).unwrap().with_rr(LinkStat::rayleigh(10f64.powf(db / 10.0)).unwrap())
}

#[test]
fn weak_rsi_prefers_proper_signalling() {
    let sys = with_rr_db(0.0);
    let t = RateTarget::new(1.0).unwrap();
    let cd = coordinate_descent(&sys, &t, &SearchConfig::default()).unwrap();
    assert!(cd.c_x_star < 1e-6, "c*={}", cd.c_x_star);
}

#[test]
fn strong_rsi_descent_matches_grid() {
    let sys = with_rr_db(15.0);
    let t = RateTarget::new(1.0).unwrap();
    let cfg = SearchConfig::default();
    let cd = coordinate_descent(&sys, &t, &cfg).unwrap();
    let grid = grid_search(&sys, &t, Metric::OutageUpperBound, &cfg, &QuadratureConfig::default()).unwrap();
    assert!((cd.objective - grid.objective).abs() < 1e-4);
    assert!(cd.converged);
    assert!(cd.trace.windows(2).all(|w| w[1].objective <= w[0].objective));
    assert!(cd.c_x_star > 0.5);
}

#[test]
fn one_dimensional_circularity_is_near_joint_optimum() {
    let t = RateTarget::new(1.0).unwrap();
    let cfg = SearchConfig::default();
    for db in [0.0, 10.0, 15.0, 25.0] {
        let sys = with_rr_db(db);
        let one = bisect_circularity(&sys, &t, sys.p_max(), &cfg).unwrap();
        let two = coordinate_descent(&sys, &t, &cfg).unwrap();
        assert!(one.objective - two.objective < 5e-3, "pi_rr={db} dB");
        assert!(two.objective <= one.objective + 1e-12);
    }
}
