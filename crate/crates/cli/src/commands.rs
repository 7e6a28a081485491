//! Subcommand implementations.

use std::path::Path;

use igsfdr::ergodic::{r_e2e_exact, r_e2e_rayleigh_lb, r_e2e_ub};
use igsfdr::model::{RateTarget, SystemParams};
use igsfdr::montecarlo::{estimate_ergodic, estimate_outage, McConfig};
use igsfdr::optimize::{
    bisect_circularity, bisect_power, coordinate_descent, grid_search, grid_search_cx, grid_search_pr, Metric, OptResult,
    SearchConfig,
};
use igsfdr::outage::{p_e2e_exact, p_e2e_lb, p_e2e_rayleigh_ub};
use igsfdr::quad::QuadratureConfig;
use igsfdr::validation::{run_all, throughput_rates, throughput_row, ValidationOptions};
use rayon::prelude::*;
use thiserror::Error;

use crate::config::{ConfigError, MethodKind, MetricKind, Optimizer, RunConfig, Scale, Var};
use crate::output::{num, sidecar, OutputError, Table};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Output(#[from] OutputError),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("solver did not converge")]
    NotConverged,
    #[error("{0} of {1} acceptance criteria failed")]
    Validation(usize, usize),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(..) => 1,
            CliError::Config(_) | CliError::Output(_) => 2,
            CliError::Numerical(_) | CliError::NotConverged => 3,
        }
    }
}

fn numerical<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Numerical(e.to_string())
}

pub fn objective_name(m: Metric) -> &'static str {
    match m {
        Metric::OutageExact => "outage-exact",
        Metric::OutageLowerBound => "outage-lb",
        Metric::OutageUpperBound => "outage-ub",
        Metric::ErgodicExact => "ergodic-exact",
        Metric::ErgodicLowerBound => "ergodic-lb",
        Metric::ErgodicUpperBound => "ergodic-ub",
    }
}

fn method_tag(k: MethodKind) -> &'static str {
    match k {
        MethodKind::Exact => "exact-integral",
        MethodKind::Lb => "lower-bound",
        MethodKind::Ub => "upper-bound",
        MethodKind::Mc => "monte-carlo",
    }
}

fn metric_name(k: MetricKind) -> &'static str {
    match k {
        MetricKind::Outage => "outage",
        MetricKind::Ergodic => "ergodic",
        MetricKind::Optimized => "optimized",
    }
}

/// Bisection solvers minimize the Rayleigh upper bound only.
fn bisection_applies(cfg: &RunConfig, sys: &SystemParams) -> bool {
    sys.is_rayleigh() && cfg.objective == Metric::OutageUpperBound
}

fn check_optimizer(cfg: &RunConfig) -> Result<(), CliError> {
    let sys = cfg.system().map_err(ConfigError::from)?;
    if cfg.optimizer == Optimizer::TwoDCd && !bisection_applies(cfg, &sys) {
        return Err(ConfigError::Invalid("optimizer 2d-cd needs Rayleigh fading (all m = 1) and objective outage-ub".into()).into());
    }
    Ok(())
}

fn search_config(cfg: &RunConfig) -> SearchConfig {
    SearchConfig {
        grid_n: cfg.grid_n,
        ..SearchConfig::default()
    }
}

/// Joint or single-variable optimization of the configured objective.
fn optimize_igs(cfg: &RunConfig) -> Result<OptResult, CliError> {
    let sys = cfg.system().map_err(ConfigError::from)?;
    let target = cfg.target().map_err(ConfigError::from)?;
    let sc = search_config(cfg);
    let quad = QuadratureConfig::default();
    let bis = bisection_applies(cfg, &sys);
    let res = match cfg.optimizer {
        Optimizer::OneDCx if bis => bisect_circularity(&sys, &target, cfg.relay_power(), &sc),
        Optimizer::OneDCx => grid_search_cx(&sys, &target, cfg.objective, cfg.relay_power(), &sc, &quad),
        Optimizer::OneDPr if bis && cfg.c_x > 0.0 => bisect_power(&sys, &target, cfg.c_x, &sc),
        Optimizer::OneDPr => grid_search_pr(&sys, &target, cfg.objective, cfg.c_x, &sc, &quad),
        Optimizer::TwoDCd => coordinate_descent(&sys, &target, &sc),
        Optimizer::Grid => grid_search(&sys, &target, cfg.objective, &sc, &quad),
    };
    res.map_err(numerical)
}

/// Best relay power with proper signaling, by grid search.
fn optimize_pgs(cfg: &RunConfig) -> Result<OptResult, CliError> {
    let sys = cfg.system().map_err(ConfigError::from)?;
    let target = cfg.target().map_err(ConfigError::from)?;
    grid_search_pr(&sys, &target, cfg.objective, 0.0, &search_config(cfg), &QuadratureConfig::default()).map_err(numerical)
}

/// One output column group of a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Probe {
    Value(MetricKind, MethodKind),
    OptIgs,
    OptPgs,
}

impl Probe {
    fn headers(&self, cfg: &RunConfig) -> Vec<String> {
        match *self {
            Probe::Value(m, k) => {
                let h = format!("{}[{}]", metric_name(m), method_tag(k));
                if k == MethodKind::Mc {
                    vec![h.clone(), format!("{h}.stderr")]
                } else {
                    vec![h]
                }
            }
            Probe::OptIgs => {
                let h = format!("optimized_igs[{}:{}]", cfg.optimizer.name(), objective_name(cfg.objective));
                vec![h, "optimized_igs.p_r".into(), "optimized_igs.c_x".into()]
            }
            Probe::OptPgs => {
                let h = format!("optimized_pgs[grid:{}]", objective_name(cfg.objective));
                vec![h, "optimized_pgs.p_r".into()]
            }
        }
    }

    fn eval(&self, cfg: &RunConfig, mc_seed: u64) -> Result<Vec<f64>, CliError> {
        let sys = cfg.system().map_err(ConfigError::from)?;
        let sig = cfg.signal(&sys).map_err(ConfigError::from)?;
        let target = cfg.target().map_err(ConfigError::from)?;
        let quad = QuadratureConfig::default();
        let mc = || McConfig::new(cfg.samples, mc_seed).map_err(numerical);
        let v = match *self {
            Probe::Value(MetricKind::Outage, k) => match k {
                MethodKind::Exact => p_e2e_exact(&sys, &sig, &target, &quad).map_err(numerical)?.value,
                MethodKind::Lb => p_e2e_lb(&sys, &sig, &target).map_err(numerical)?.value,
                MethodKind::Ub => p_e2e_rayleigh_ub(&sys, &sig, &target).map_err(numerical)?.value,
                MethodKind::Mc => {
                    let e = estimate_outage(&sys, &sig, &target, &mc()?).map_err(numerical)?;
                    return Ok(vec![e.mean, e.stderr]);
                }
            },
            Probe::Value(MetricKind::Ergodic, k) => match k {
                MethodKind::Exact => r_e2e_exact(&sys, &sig, &quad).map_err(numerical)?.value,
                MethodKind::Lb => r_e2e_rayleigh_lb(&sys, &sig).map_err(numerical)?.value,
                MethodKind::Ub => r_e2e_ub(&sys, &sig, &quad).map_err(numerical)?.value,
                MethodKind::Mc => {
                    let e = estimate_ergodic(&sys, &sig, &mc()?).map_err(numerical)?;
                    return Ok(vec![e.mean, e.stderr]);
                }
            },
            Probe::Value(MetricKind::Optimized, _) => unreachable!("optimized metrics map to OptIgs/OptPgs"),
            Probe::OptIgs => {
                let o = optimize_igs(cfg)?;
                return Ok(vec![o.objective, o.p_r_star, o.c_x_star]);
            }
            Probe::OptPgs => {
                let o = optimize_pgs(cfg)?;
                return Ok(vec![o.objective, o.p_r_star]);
            }
        };
        Ok(vec![v])
    }
}

fn probes(cfg: &RunConfig) -> Vec<Probe> {
    let mut out = Vec::new();
    for &m in &cfg.metrics {
        match m {
            MetricKind::Optimized => {
                out.push(Probe::OptIgs);
                out.push(Probe::OptPgs);
            }
            _ => out.extend(cfg.methods.iter().map(|&k| Probe::Value(m, k))),
        }
    }
    out.dedup();
    out
}

/// A failed cell, reported in the diagnostics sidecar.
struct Diagnostic {
    point: usize,
    axis: f64,
    column: String,
    message: String,
}

fn diagnostics_table(diags: &[Diagnostic], axis_header: &str) -> Table {
    let mut t = Table::new(vec!["point".into(), axis_header.into(), "column".into(), "error".into()]);
    for d in diags {
        t.rows.push(vec![d.point.to_string(), num(d.axis), d.column.clone(), d.message.clone()]);
    }
    t
}

/// Writes the diagnostics sidecar, or stderr when output goes to stdout.
/// A stale sidecar from an earlier run is removed when there is nothing to report.
fn emit_diagnostics(out: Option<&Path>, diags: &[Diagnostic], axis_header: &str) -> Result<(), CliError> {
    match out {
        Some(p) => {
            let path = sidecar(p, "diag");
            if diags.is_empty() {
                if path.exists() {
                    std::fs::remove_file(&path).map_err(|source| OutputError::Io {
                        path: path.display().to_string(),
                        source,
                    })?;
                }
            } else {
                diagnostics_table(diags, axis_header).write(Some(&path))?;
                eprintln!("{} cell(s) failed; see {}", diags.len(), path.display());
            }
        }
        None => {
            for d in diags {
                eprintln!("point {} ({}={}): {}: {}", d.point, axis_header, num(d.axis), d.column, d.message);
            }
        }
    }
    Ok(())
}

fn axis_header(var: Var, scale: Scale) -> String {
    match scale {
        Scale::Linear => var.name().to_string(),
        Scale::Db => format!("{}[dB]", var.name()),
    }
}

pub fn cmd_sweep(cfg: &RunConfig, out: Option<&Path>) -> Result<(), CliError> {
    let sweep = cfg
        .sweep
        .ok_or_else(|| ConfigError::Invalid("sweep needs the `sweep`, `sweep_start`, `sweep_stop` and `sweep_points` keys".into()))?;
    let probes = probes(cfg);
    if probes.iter().any(|p| matches!(p, Probe::OptIgs)) {
        check_optimizer(cfg)?;
    }
    let axis = axis_header(sweep.var, sweep.scale);
    let mut header = vec![axis.clone()];
    for p in &probes {
        header.extend(p.headers(cfg));
    }
    let labels = sweep.labels();
    let rows: Vec<(Vec<String>, Vec<Diagnostic>)> = sweep
        .values()
        .into_par_iter()
        .enumerate()
        .map(|(i, v)| {
            let point = cfg.at(sweep.var, v);
            let mut cells = vec![num(labels[i])];
            let mut diags = Vec::new();
            for (j, p) in probes.iter().enumerate() {
                let seed = cfg.seed.wrapping_add((i * probes.len() + j) as u64);
                let names = p.headers(cfg);
                match p.eval(&point, seed) {
                    Ok(vals) => cells.extend(vals.into_iter().map(num)),
                    Err(e) => {
                        cells.extend(names.iter().map(|_| String::new()));
                        diags.push(Diagnostic {
                            point: i,
                            axis: labels[i],
                            column: names[0].clone(),
                            message: e.to_string(),
                        });
                    }
                }
            }
            (cells, diags)
        })
        .collect();
    let mut table = Table::new(header);
    let mut diags = Vec::new();
    for (cells, d) in rows {
        table.rows.push(cells);
        diags.extend(d);
    }
    table.write(out)?;
    emit_diagnostics(out, &diags, &axis)
}

pub fn cmd_optimize(cfg: &RunConfig, out: Option<&Path>) -> Result<(), CliError> {
    if cfg.sweep.is_some() {
        return Err(ConfigError::Invalid("optimize runs at a single point; remove the `sweep` keys".into()).into());
    }
    check_optimizer(cfg)?;
    let objective = if cfg.optimizer == Optimizer::TwoDCd
        || (bisection_applies(cfg, &cfg.system().map_err(ConfigError::from)?)
            && (cfg.optimizer == Optimizer::OneDCx || (cfg.optimizer == Optimizer::OneDPr && cfg.c_x > 0.0)))
    {
        Metric::OutageUpperBound
    } else {
        cfg.objective
    };
    let res = optimize_igs(cfg)?;
    let mut table = Table::new(
        ["optimizer", "objective", "method", "p_r_star", "c_x_star", "objective_value", "iterations", "converged"]
            .map(String::from)
            .to_vec(),
    );
    table.rows.push(vec![
        cfg.optimizer.name().into(),
        objective_name(objective).into(),
        res.method.tag().into(),
        num(res.p_r_star),
        num(res.c_x_star),
        num(res.objective),
        res.iterations.to_string(),
        res.converged.to_string(),
    ]);
    table.write(out)?;

    let mut report = format!(
        "optimizer {} on {} ({})\n  p_r*      = {}\n  c_x*      = {}\n  objective = {}\n  iterations = {}\n  converged  = {}\n",
        cfg.optimizer.name(),
        objective_name(objective),
        res.method.tag(),
        res.p_r_star,
        res.c_x_star,
        res.objective,
        res.iterations,
        res.converged
    );
    if cfg.optimizer == Optimizer::TwoDCd {
        let mut trace = Table::new(["iteration", "p_r", "c_x", "objective"].map(String::from).to_vec());
        for (k, t) in res.trace.iter().enumerate() {
            trace.rows.push(vec![k.to_string(), num(t.p_r), num(t.c_x), num(t.objective)]);
        }
        match out {
            Some(p) => {
                let path = sidecar(p, "trace");
                trace.write(Some(&path))?;
                report.push_str(&format!("  trace      -> {}\n", path.display()));
            }
            None => {
                for r in &trace.rows {
                    report.push_str(&format!("  trace {}\n", r.join(" ")));
                }
            }
        }
    }
    if out.is_some() {
        print!("{report}");
    } else {
        eprint!("{report}");
    }
    if res.converged {
        Ok(())
    } else {
        Err(CliError::NotConverged)
    }
}

pub fn cmd_throughput(cfg: &RunConfig, out: Option<&Path>) -> Result<(), CliError> {
    let rates = match cfg.sweep {
        None => throughput_rates(),
        Some(s) if s.var == Var::R => s.values(),
        Some(s) => {
            return Err(ConfigError::Invalid(format!("throughput sweeps the target rate `r`, not `{}`", s.var.name())).into())
        }
    };
    let sys = cfg.system().map_err(ConfigError::from)?;
    for &r in &rates {
        RateTarget::new(r).map_err(ConfigError::from)?;
    }
    let header: Vec<String> = [
        "r",
        "fdr_pgs[exact-integral:opt-pr]",
        "fdr_igs[exact-integral:grid]",
        "fdr_igs.p_r",
        "fdr_igs.c_x",
        "hdr_mhdf[monte-carlo]",
        "hdr_mhdf[monte-carlo].stderr",
        "hdr_mrc[monte-carlo]",
        "hdr_mrc[monte-carlo].stderr",
    ]
    .map(String::from)
    .to_vec();
    let width = header.len();
    let rows: Vec<(Vec<String>, Option<Diagnostic>)> = rates
        .par_iter()
        .enumerate()
        .map(|(i, &r)| {
            let row = McConfig::new(cfg.samples, cfg.seed.wrapping_add(i as u64))
                .map_err(numerical)
                .and_then(|mc| {
                    throughput_row(&sys, &RateTarget::new(r).expect("checked above"), cfg.igs_grid_n, &mc).map_err(numerical)
                });
            match row {
                Ok(t) => (
                    vec![
                        num(r),
                        num(t.fdr_pgs),
                        num(t.fdr_igs),
                        num(t.igs_p_r),
                        num(t.igs_c_x),
                        num(t.hdr_mhdf.mean),
                        num(t.hdr_mhdf.stderr),
                        num(t.hdr_mrc.mean),
                        num(t.hdr_mrc.stderr),
                    ],
                    None,
                ),
                Err(e) => {
                    let mut cells = vec![num(r)];
                    cells.resize(width, String::new());
                    let d = Diagnostic {
                        point: i,
                        axis: r,
                        column: "row".into(),
                        message: e.to_string(),
                    };
                    (cells, Some(d))
                }
            }
        })
        .collect();
    let mut table = Table::new(header);
    let mut diags = Vec::new();
    for (cells, d) in rows {
        table.rows.push(cells);
        diags.extend(d);
    }
    table.write(out)?;
    emit_diagnostics(out, &diags, "r")
}

pub fn cmd_validate(opts: &ValidationOptions) -> Result<(), CliError> {
    let outcomes = run_all(opts);
    for o in &outcomes {
        println!("{}", o.line());
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    println!("{} passed, {} failed", outcomes.len() - failed, failed);
    if failed == 0 {
        Ok(())
    } else {
        Err(CliError::Validation(failed, outcomes.len()))
    }
}
