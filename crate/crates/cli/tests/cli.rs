//! End-to-end runs of the `igsfdr` binary.

use std::path::Path;
use std::process::{Command, Output};

fn igsfdr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_igsfdr")).args(args).output().expect("spawn igsfdr")
}

fn scenario(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
        .display()
        .to_string()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut rd = csv::Reader::from_path(path).unwrap();
    let header = rd.headers().unwrap().iter().map(String::from).collect();
    let rows = rd.records().map(|r| r.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

fn col(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name} in {header:?}"))
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn sweep_is_byte_identical_across_runs_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let common = [
        "sweep",
        "--config",
        &scenario("circularity_sweep.conf"),
        "--set",
        "sweep_points=6",
        "--set",
        "metrics=outage,ergodic",
        "--samples",
        "200000",
        "--seed",
        "7",
    ];
    let mut args_a = common.to_vec();
    args_a.extend(["--threads", "1", "--out", a.to_str().unwrap()]);
    let mut args_b = common.to_vec();
    args_b.extend(["--threads", "3", "--out", b.to_str().unwrap()]);
    assert!(igsfdr(&args_a).status.success());
    assert!(igsfdr(&args_b).status.success());
    let (ba, bb) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert!(!ba.is_empty());
    assert_eq!(ba, bb);

    let c = dir.path().join("c.csv");
    let mut args_c = common.to_vec();
    let last = args_c.len() - 1;
    args_c[last] = "8";
    args_c.extend(["--out", c.to_str().unwrap()]);
    assert!(igsfdr(&args_c).status.success());
    assert_ne!(ba, std::fs::read(&c).unwrap(), "seed must change the Monte Carlo columns");
}

#[test]
fn config_errors_name_line_and_key() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.conf");
    std::fs::write(&path, "# scenario\npi_sr = 20 dB\nwidth = 3\n").unwrap();
    let o = igsfdr(&["sweep", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    assert!(e.contains("line 3") && e.contains("width"), "{e}");

    std::fs::write(&path, "c_x = 3 dB\n").unwrap();
    let o = igsfdr(&["sweep", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 1: key `c_x` is not a power quantity"), "{}", stderr(&o));

    let o = igsfdr(&["optimize", "--set", "r=2dB"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--set: key `r`"), "{}", stderr(&o));

    let o = igsfdr(&["optimize", "--set", "c_x=1.2"]);
    assert_eq!(o.status.code(), Some(2));

    let o = igsfdr(&["optimize", "--set", "p_s=2"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn flags_override_the_file() {
    let o = igsfdr(&["optimize", "--config", &scenario("defaults.conf"), "--set", "pi_rr=0dB", "--set", "optimizer=1d-cx"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("optimizer,objective,method,"), "{text}");
    assert!(text.contains("1d-cx,outage-ub,upper-bound,"), "{text}");
}

#[test]
fn circularity_sweep_keeps_bound_order_on_every_row() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cx.csv");
    let o = igsfdr(&["sweep", "--config", &scenario("circularity_sweep.conf"), "--samples", "400000", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (h, rows) = read_csv(&out);
    assert_eq!(h[0], "c_x");
    assert_eq!(rows.len(), 21);
    let (ex, lb, ub) = (col(&h, "outage[exact-integral]"), col(&h, "outage[lower-bound]"), col(&h, "outage[upper-bound]"));
    let (mc, se) = (col(&h, "outage[monte-carlo]"), col(&h, "outage[monte-carlo].stderr"));
    for row in &rows {
        let v = |i: usize| row[i].parse::<f64>().unwrap();
        assert!(v(lb) <= v(ex) + 1e-12, "{row:?}");
        assert!(v(ex) <= v(ub) + 1e-12, "{row:?}");
        assert!((v(mc) - v(ex)).abs() <= 4.0 * v(se), "{row:?}");
    }
    assert!(!dir.path().join("cx.diag.csv").exists());
}

#[test]
fn proper_signaling_power_sweep_has_interior_minimum() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("pr.csv");
    let o = igsfdr(&["sweep", "--config", &scenario("pgs_power_sweep.conf"), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (h, rows) = read_csv(&out);
    let ex = col(&h, "outage[exact-integral]");
    let v: Vec<f64> = rows.iter().map(|r| r[ex].parse().unwrap()).collect();
    let argmin = (0..v.len()).min_by(|&a, &b| v[a].total_cmp(&v[b])).unwrap();
    assert!(argmin > 0 && argmin < v.len() - 1, "argmin {argmin}");
    assert!(v[0] > v[argmin] && v[v.len() - 1] > v[argmin]);
}

#[test]
fn optimized_igs_flattens_while_pgs_degrades_with_loop_gain() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("rsi.csv");
    let o = igsfdr(&["sweep", "--config", &scenario("rsi_sweep.conf"), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (h, rows) = read_csv(&out);
    assert_eq!(h[0], "pi_rr[dB]");
    let igs = col(&h, "optimized_igs[2d-cd:outage-ub]");
    let pgs = col(&h, "optimized_pgs[grid:outage-ub]");
    let at = |i: usize, c: usize| rows[i][c].parse::<f64>().unwrap();
    let last = rows.len() - 1;
    for i in 0..rows.len() {
        assert!(at(i, igs) <= at(i, pgs) + 1e-12);
    }
    assert!(at(last, pgs) > 0.9);
    assert!(at(last, igs) < 0.1);
    assert!((at(last, igs) - at(last - 4, igs)).abs() < 0.05 * at(last, igs));
}

#[test]
fn failed_cells_are_empty_and_logged_in_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("nak.csv");
    let o = igsfdr(&[
        "sweep",
        "--set",
        "m_sr=2",
        "--set",
        "m_rd=2",
        "--set",
        "sweep=c_x",
        "--set",
        "sweep_start=0",
        "--set",
        "sweep_stop=1",
        "--set",
        "sweep_points=3",
        "--set",
        "methods=exact,ub",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (h, rows) = read_csv(&out);
    let (ex, ub) = (col(&h, "outage[exact-integral]"), col(&h, "outage[upper-bound]"));
    for row in &rows {
        assert!(row[ex].parse::<f64>().is_ok());
        assert_eq!(row[ub], "");
    }
    let (dh, diags) = read_csv(&dir.path().join("nak.diag.csv"));
    assert_eq!(dh, ["point", "c_x", "column", "error"]);
    assert_eq!(diags.len(), 3);
    assert!(diags.iter().all(|d| d[2] == "outage[upper-bound]"));
}

#[test]
fn optimizers_agree_and_report_traces() {
    let dir = tempfile::tempdir().unwrap();
    let run = |optimizer: &str, name: &str| {
        let out = dir.path().join(name);
        let o = igsfdr(&["optimize", "--set", "pi_rr=15dB", "--set", &format!("optimizer={optimizer}"), "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
        let (h, rows) = read_csv(&out);
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0][col(&h, "converged")], "true");
        rows[0][col(&h, "objective_value")].parse::<f64>().unwrap()
    };
    let cd = run("2d-cd", "cd.csv");
    let grid = run("grid", "grid.csv");
    let one = run("1d-cx", "cx.csv");
    assert!((cd - grid).abs() < 1e-4, "{cd} vs {grid}");
    assert!((one - cd).abs() < 5e-3, "{one} vs {cd}");

    let (th, trace) = read_csv(&dir.path().join("cd.trace.csv"));
    assert_eq!(th, ["iteration", "p_r", "c_x", "objective"]);
    let obj: Vec<f64> = trace.iter().map(|r| r[3].parse().unwrap()).collect();
    assert!(obj.windows(2).all(|w| w[1] <= w[0]));
    assert!(!dir.path().join("grid.trace.csv").exists());
}

#[test]
fn weak_loop_makes_proper_signaling_optimal() {
    let o = igsfdr(&["optimize", "--set", "pi_rr=0dB", "--set", "optimizer=1d-cx"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    let h: Vec<String> = rd.headers().unwrap().iter().map(String::from).collect();
    let row = rd.records().next().unwrap().unwrap();
    assert!(row[col(&h, "c_x_star")].parse::<f64>().unwrap() < 1e-3);
}

#[test]
fn coordinate_descent_rejects_nakagami_as_config_error() {
    let o = igsfdr(&["optimize", "--set", "m_sr=2"]);
    assert_eq!(o.status.code(), Some(2));
    let o = igsfdr(&["optimize", "--set", "m_sr=2", "--set", "optimizer=grid", "--set", "grid_n=101", "--set", "objective=outage-lb"]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn throughput_table_has_tagged_columns() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("tp.csv");
    let o = igsfdr(&[
        "throughput",
        "--config",
        &scenario("throughput.conf"),
        "--set",
        "sweep_start=1",
        "--set",
        "sweep_stop=5",
        "--set",
        "sweep_points=3",
        "--set",
        "igs_grid_n=20",
        "--samples",
        "200000",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (h, rows) = read_csv(&out);
    assert_eq!(rows.len(), 3);
    assert!(h.iter().skip(1).filter(|c| !c.contains('.')).all(|c| c.contains('[')), "{h:?}");
    let g = |r: &Vec<String>, c: &str| r[col(&h, c)].parse::<f64>().unwrap();
    for r in &rows {
        assert!(g(r, "fdr_igs[exact-integral:grid]") >= g(r, "fdr_pgs[exact-integral:opt-pr]") - 1e-12);
        let (mrc, mhdf) = (g(r, "hdr_mrc[monte-carlo]"), g(r, "hdr_mhdf[monte-carlo]"));
        let se = g(r, "hdr_mrc[monte-carlo].stderr") + g(r, "hdr_mhdf[monte-carlo].stderr");
        assert!(mrc >= mhdf - 3.0 * se);
    }

    let o = igsfdr(&["throughput", "--set", "sweep=c_x", "--set", "sweep_start=0", "--set", "sweep_stop=1", "--set", "sweep_points=2"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn validate_exit_code_reflects_outcomes() {
    let o = igsfdr(&["validate"]);
    let text = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = text.lines().filter(|l| l.starts_with("[PASS]") || l.starts_with("[FAIL]")).collect();
    assert_eq!(lines.len(), 15, "{text}");
    let any_fail = lines.iter().any(|l| l.starts_with("[FAIL]"));
    assert_eq!(o.status.code(), Some(if any_fail { 1 } else { 0 }));
}
