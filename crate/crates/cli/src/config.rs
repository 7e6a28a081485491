//! Scenario files: `key = value` lines with `#` comments, plus `--set`
//! overrides. Power-like values accept a `dB` suffix; everything is stored
//! linear.

use std::fmt;
use std::path::Path;

use igsfdr::montecarlo::MIN_SAMPLES;
use igsfdr::model::{LinkStat, ModelError, RateTarget, SignalParams, SystemParams};
use igsfdr::optimize::Metric;
use thiserror::Error;

/// Where a setting came from, for error messages.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Origin {
    Line(usize),
    Flag,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Line(n) => write!(f, "line {n}"),
            Origin::Flag => f.write_str("--set"),
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{origin}: expected `key = value`, got `{text}`")]
    Syntax { origin: Origin, text: String },
    #[error("{origin}: unknown key `{key}`")]
    UnknownKey { origin: Origin, key: String },
    #[error("{origin}: key `{key}`: {detail}")]
    Value { origin: Origin, key: String, detail: String },
    #[error("{origin}: key `{key}` is not a power quantity; dB is not allowed")]
    DbNotAllowed { origin: Origin, key: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("invalid system parameters: {0}")]
    Model(#[from] ModelError),
}

/// A scalar parameter that can be swept.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    PiSr,
    PiRd,
    PiRr,
    PiSd,
    Ps,
    Pr,
    Pmax,
    Cx,
    R,
}

impl Var {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "pi_sr" => Var::PiSr,
            "pi_rd" => Var::PiRd,
            "pi_rr" => Var::PiRr,
            "pi_sd" => Var::PiSd,
            "p_s" => Var::Ps,
            "p_r" => Var::Pr,
            "p_max" => Var::Pmax,
            "c_x" => Var::Cx,
            "r" => Var::R,
            _ => return None,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Var::PiSr => "pi_sr",
            Var::PiRd => "pi_rd",
            Var::PiRr => "pi_rr",
            Var::PiSd => "pi_sd",
            Var::Ps => "p_s",
            Var::Pr => "p_r",
            Var::Pmax => "p_max",
            Var::Cx => "c_x",
            Var::R => "r",
        }
    }

    pub fn is_power(&self) -> bool {
        !matches!(self, Var::Cx | Var::R)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Linear,
    Db,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sweep {
    pub var: Var,
    pub start: f64,
    pub stop: f64,
    pub points: usize,
    pub scale: Scale,
}

impl Sweep {
    /// Sweep values in linear units.
    pub fn values(&self) -> Vec<f64> {
        self.labels()
            .into_iter()
            .map(|v| match self.scale {
                Scale::Linear => v,
                Scale::Db => db_to_linear(v),
            })
            .collect()
    }

    /// Sweep values as written in the axis column (dB for dB sweeps).
    pub fn labels(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.start];
        }
        let n = (self.points - 1) as f64;
        (0..self.points)
            .map(|i| {
                let k = i as f64;
                (self.start * (n - k) + self.stop * k) / n
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricKind {
    Outage,
    Ergodic,
    Optimized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodKind {
    Exact,
    Lb,
    Ub,
    Mc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Optimizer {
    OneDCx,
    OneDPr,
    TwoDCd,
    Grid,
}

impl Optimizer {
    pub fn name(&self) -> &'static str {
        match self {
            Optimizer::OneDCx => "1d-cx",
            Optimizer::OneDPr => "1d-pr",
            Optimizer::TwoDCd => "2d-cd",
            Optimizer::Grid => "grid",
        }
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub m_sr: u32,
    pub m_rd: u32,
    pub m_rr: u32,
    pub m_sd: u32,
    pub allow_large_m: bool,
    pub pi_sr: f64,
    pub pi_rd: f64,
    pub pi_rr: f64,
    pub pi_sd: f64,
    pub p_s: f64,
    pub p_r: Option<f64>,
    pub p_max: f64,
    pub c_x: f64,
    pub r: f64,
    pub sweep: Option<Sweep>,
    pub metrics: Vec<MetricKind>,
    pub methods: Vec<MethodKind>,
    pub optimizer: Optimizer,
    pub objective: Metric,
    pub grid_n: usize,
    pub igs_grid_n: usize,
    pub seed: u64,
    pub samples: u64,
}

impl Default for RunConfig {
    /// The reference scenario.
    fn default() -> Self {
        Self {
            m_sr: 1,
            m_rd: 1,
            m_rr: 1,
            m_sd: 1,
            allow_large_m: false,
            pi_sr: db_to_linear(20.0),
            pi_rd: db_to_linear(20.0),
            pi_rr: db_to_linear(10.0),
            pi_sd: db_to_linear(3.0),
            p_s: 1.0,
            p_r: None,
            p_max: 1.0,
            c_x: 0.9,
            r: 1.0,
            sweep: None,
            metrics: vec![MetricKind::Outage],
            methods: vec![MethodKind::Exact, MethodKind::Lb, MethodKind::Ub, MethodKind::Mc],
            optimizer: Optimizer::TwoDCd,
            objective: Metric::OutageUpperBound,
            grid_n: 1001,
            igs_grid_n: 50,
            seed: 1,
            samples: 1_000_000,
        }
    }
}

/// Raw sweep keys, resolved once all settings are applied.
#[derive(Debug, Clone, Default)]
struct SweepDraft {
    var: Option<(Var, Origin)>,
    start: Option<f64>,
    stop: Option<f64>,
    points: Option<usize>,
    scale: Option<Scale>,
}

/// Accumulates settings from a file and overrides, then validates.
#[derive(Debug, Clone, Default)]
pub struct ConfigBuilder {
    cfg: RunConfig,
    sweep: SweepDraft,
}

const POWER_KEYS: [&str; 7] = ["pi_sr", "pi_rd", "pi_rr", "pi_sd", "p_s", "p_r", "p_max"];

fn split_db(value: &str) -> (&str, bool) {
    let v = value.trim();
    let lower = v.to_ascii_lowercase();
    let head = v.get(..v.len().saturating_sub(2)).unwrap_or("").trim_end();
    if lower.ends_with("db") && head.parse::<f64>().is_ok() {
        (head, true)
    } else {
        (v, false)
    }
}

fn list<T>(origin: &Origin, key: &str, value: &str, f: impl Fn(&str) -> Option<T>) -> Result<Vec<T>, ConfigError> {
    let items: Vec<T> = value
        .split(',')
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| {
            f(s).ok_or_else(|| ConfigError::Value {
                origin: origin.clone(),
                key: key.to_string(),
                detail: format!("unrecognized item `{s}`"),
            })
        })
        .collect::<Result<_, _>>()?;
    if items.is_empty() {
        return Err(ConfigError::Value {
            origin: origin.clone(),
            key: key.to_string(),
            detail: "empty list".into(),
        });
    }
    Ok(items)
}

impl ConfigBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Applies every `key = value` line of a scenario file.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let origin = Origin::Line(i + 1);
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                origin: origin.clone(),
                text: raw.trim().to_string(),
            })?;
            self.set(key.trim(), value.trim(), origin)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        self.apply_text(&text)
    }

    /// Applies one `KEY=VALUE` override.
    pub fn apply_override(&mut self, kv: &str) -> Result<(), ConfigError> {
        let (key, value) = kv.split_once('=').ok_or_else(|| ConfigError::Syntax {
            origin: Origin::Flag,
            text: kv.to_string(),
        })?;
        self.set(key.trim(), value.trim(), Origin::Flag)
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.cfg.seed = seed;
    }

    pub fn set_samples(&mut self, samples: u64) {
        self.cfg.samples = samples;
    }

    fn set(&mut self, key: &str, value: &str, origin: Origin) -> Result<(), ConfigError> {
        let (num_text, is_db) = split_db(value);
        if is_db && !POWER_KEYS.contains(&key) {
            return Err(ConfigError::DbNotAllowed {
                origin,
                key: key.to_string(),
            });
        }
        let bad = |detail: String| ConfigError::Value {
            origin: origin.clone(),
            key: key.to_string(),
            detail,
        };
        let real = || -> Result<f64, ConfigError> {
            let v: f64 = num_text.parse().map_err(|_| bad(format!("`{value}` is not a number")))?;
            if !v.is_finite() {
                return Err(bad(format!("`{value}` is not finite")));
            }
            Ok(if is_db { db_to_linear(v) } else { v })
        };
        let plain = || -> Result<f64, ConfigError> {
            let v: f64 = value.parse().map_err(|_| bad(format!("`{value}` is not a number")))?;
            if !v.is_finite() {
                return Err(bad(format!("`{value}` is not finite")));
            }
            Ok(v)
        };
        let int = || -> Result<u64, ConfigError> { value.parse().map_err(|_| bad(format!("`{value}` is not a nonnegative integer"))) };
        let c = &mut self.cfg;
        match key {
            "m_sr" => c.m_sr = int()? as u32,
            "m_rd" => c.m_rd = int()? as u32,
            "m_rr" => c.m_rr = int()? as u32,
            "m_sd" => c.m_sd = int()? as u32,
            "m" => {
                let m = int()? as u32;
                c.m_sr = m;
                c.m_rd = m;
            }
            "allow_large_m" => {
                c.allow_large_m = value.parse().map_err(|_| bad(format!("`{value}` is not true/false")))?;
            }
            "pi_sr" => c.pi_sr = real()?,
            "pi_rd" => c.pi_rd = real()?,
            "pi_rr" => c.pi_rr = real()?,
            "pi_sd" => c.pi_sd = real()?,
            "p_s" => c.p_s = real()?,
            "p_r" => c.p_r = Some(real()?),
            "p_max" => c.p_max = real()?,
            "c_x" => c.c_x = plain()?,
            "r" => c.r = plain()?,
            "sweep" => {
                let var = Var::parse(value).ok_or_else(|| bad(format!("unknown sweep variable `{value}`")))?;
                self.sweep.var = Some((var, origin));
            }
            "sweep_start" => self.sweep.start = Some(plain()?),
            "sweep_stop" => self.sweep.stop = Some(plain()?),
            "sweep_points" => {
                let n = int()? as usize;
                if n == 0 {
                    return Err(bad("must be at least 1".into()));
                }
                self.sweep.points = Some(n);
            }
            "sweep_scale" => {
                self.sweep.scale = Some(match value.to_ascii_lowercase().as_str() {
                    "linear" => Scale::Linear,
                    "db" => Scale::Db,
                    _ => return Err(bad(format!("`{value}` is not linear|db"))),
                });
            }
            "metrics" => {
                c.metrics = list(&origin, key, value, |s| match s {
                    "outage" => Some(MetricKind::Outage),
                    "ergodic" => Some(MetricKind::Ergodic),
                    "optimized" => Some(MetricKind::Optimized),
                    _ => None,
                })?
            }
            "methods" => {
                c.methods = list(&origin, key, value, |s| match s {
                    "exact" => Some(MethodKind::Exact),
                    "lb" => Some(MethodKind::Lb),
                    "ub" => Some(MethodKind::Ub),
                    "mc" => Some(MethodKind::Mc),
                    _ => None,
                })?
            }
            "optimizer" => {
                c.optimizer = match value {
                    "1d-cx" => Optimizer::OneDCx,
                    "1d-pr" => Optimizer::OneDPr,
                    "2d-cd" => Optimizer::TwoDCd,
                    "grid" => Optimizer::Grid,
                    _ => return Err(bad(format!("`{value}` is not 1d-cx|1d-pr|2d-cd|grid"))),
                }
            }
            "objective" => {
                c.objective = match value {
                    "outage-exact" => Metric::OutageExact,
                    "outage-lb" => Metric::OutageLowerBound,
                    "outage-ub" => Metric::OutageUpperBound,
                    "ergodic-exact" => Metric::ErgodicExact,
                    "ergodic-lb" => Metric::ErgodicLowerBound,
                    "ergodic-ub" => Metric::ErgodicUpperBound,
                    _ => return Err(bad(format!("unknown objective `{value}`"))),
                }
            }
            "grid_n" => c.grid_n = int()? as usize,
            "igs_grid_n" => c.igs_grid_n = int()? as usize,
            "seed" => c.seed = int()?,
            "samples" => c.samples = int()?,
            _ => {
                return Err(ConfigError::UnknownKey {
                    origin,
                    key: key.to_string(),
                })
            }
        }
        Ok(())
    }

    /// Resolves the sweep and checks every model invariant.
    pub fn build(self) -> Result<RunConfig, ConfigError> {
        let mut cfg = self.cfg;
        let d = self.sweep;
        cfg.sweep = match d.var {
            None => {
                if d.start.is_some() || d.stop.is_some() || d.points.is_some() || d.scale.is_some() {
                    return Err(ConfigError::Invalid("sweep_* keys given without `sweep`".into()));
                }
                None
            }
            Some((var, origin)) => {
                let scale = d.scale.unwrap_or(Scale::Linear);
                if scale == Scale::Db && !var.is_power() {
                    return Err(ConfigError::DbNotAllowed {
                        origin,
                        key: format!("sweep = {}", var.name()),
                    });
                }
                let need = |v: Option<f64>, k: &str| v.ok_or_else(|| ConfigError::Invalid(format!("`sweep` needs `{k}`")));
                Some(Sweep {
                    var,
                    start: need(d.start, "sweep_start")?,
                    stop: need(d.stop, "sweep_stop")?,
                    points: d.points.ok_or_else(|| ConfigError::Invalid("`sweep` needs `sweep_points`".into()))?,
                    scale,
                })
            }
        };
        if cfg.grid_n < 101 {
            return Err(ConfigError::Invalid(format!("grid_n must be at least 101, got {}", cfg.grid_n)));
        }
        if cfg.igs_grid_n < 2 {
            return Err(ConfigError::Invalid(format!("igs_grid_n must be at least 2, got {}", cfg.igs_grid_n)));
        }
        if cfg.samples < MIN_SAMPLES {
            return Err(ConfigError::Invalid(format!("samples must be at least {MIN_SAMPLES}, got {}", cfg.samples)));
        }
        cfg.system()?;
        cfg.signal(&cfg.system()?)?;
        cfg.target()?;
        if let Some(s) = cfg.sweep {
            for v in [s.values()[0], s.values()[s.points - 1]] {
                let p = cfg.at(s.var, v);
                let sys = p.system()?;
                p.signal(&sys)?;
                p.target()?;
            }
        }
        Ok(cfg)
    }
}

impl RunConfig {
    fn link(&self, m: u32, pi: f64) -> Result<LinkStat, ModelError> {
        if self.allow_large_m {
            LinkStat::new_unchecked_shape(m, pi)
        } else {
            LinkStat::new(m, pi)
        }
    }

    pub fn system(&self) -> Result<SystemParams, ModelError> {
        SystemParams::new(
            self.link(self.m_sr, self.pi_sr)?,
            self.link(self.m_rd, self.pi_rd)?,
            self.link(self.m_rr, self.pi_rr)?,
            self.link(self.m_sd, self.pi_sd)?,
            self.p_s,
            self.p_max,
        )
    }

    /// Relay power, defaulting to the cap.
    pub fn relay_power(&self) -> f64 {
        self.p_r.unwrap_or(self.p_max)
    }

    pub fn signal(&self, sys: &SystemParams) -> Result<SignalParams, ModelError> {
        SignalParams::new(sys, self.relay_power(), self.c_x)
    }

    pub fn target(&self) -> Result<RateTarget, ModelError> {
        RateTarget::new(self.r)
    }

    /// Copy with one variable replaced by a linear value.
    pub fn at(&self, var: Var, v: f64) -> RunConfig {
        let mut c = self.clone();
        match var {
            Var::PiSr => c.pi_sr = v,
            Var::PiRd => c.pi_rd = v,
            Var::PiRr => c.pi_rr = v,
            Var::PiSd => c.pi_sd = v,
            Var::Ps => c.p_s = v,
            Var::Pr => c.p_r = Some(v),
            Var::Pmax => c.p_max = v,
            Var::Cx => c.c_x = v,
            Var::R => c.r = v,
        }
        c
    }
}
