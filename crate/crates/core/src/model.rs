//! System parameters, relay design point and target-rate constants.
//!
//! All powers and mean channel gains are linear and normalized to unit
//! noise variance at relay and destination.

use thiserror::Error;

/// Largest Nakagami shape accepted without the explicit override.
pub const MAX_SHAPE: u32 = 4;

/// Largest shape accepted even with the override.
pub const MAX_SHAPE_OVERRIDE: u32 = 32;

/// Circularity values at or above this use the `C_x → 1` limit of `Ψ_r(C)/(1-C²)`.
pub const CIRCULARITY_LIMIT_SWITCH: f64 = 1.0 - 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("Nakagami shape m = {m} outside [1, {max}]")]
    InvalidShape { m: u32, max: u32 },
    #[error("{name} must be finite and > 0, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("source power {p_s} exceeds power cap {p_max}")]
    SourceAboveCap { p_s: f64, p_max: f64 },
    #[error("relay power {p_r} outside (0, {p_max}]")]
    RelayPower { p_r: f64, p_max: f64 },
    #[error("circularity coefficient {0} outside [0, 1]")]
    Circularity(f64),
    #[error("{function}: argument {x} outside [0, 1]")]
    Domain { function: &'static str, x: f64 },
}

fn positive(name: &'static str, value: f64) -> Result<f64, ModelError> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(ModelError::NonPositive { name, value })
    }
}

/// Statistics of one fading link: gamma-distributed power gain with
/// integer shape `m` and scale `θ = π/m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkStat {
    m: u32,
    pi: f64,
    theta: f64,
}

impl LinkStat {
    pub fn new(m: u32, pi: f64) -> Result<Self, ModelError> {
        Self::build(m, pi, MAX_SHAPE)
    }

    /// Accepts shapes up to [`MAX_SHAPE_OVERRIDE`] for experimentation.
    pub fn new_unchecked_shape(m: u32, pi: f64) -> Result<Self, ModelError> {
        Self::build(m, pi, MAX_SHAPE_OVERRIDE)
    }

    pub fn rayleigh(pi: f64) -> Result<Self, ModelError> {
        Self::new(1, pi)
    }

    fn build(m: u32, pi: f64, max: u32) -> Result<Self, ModelError> {
        if m == 0 || m > max {
            return Err(ModelError::InvalidShape { m, max });
        }
        let pi = positive("mean channel power", pi)?;
        Ok(Self {
            m,
            pi,
            theta: pi / f64::from(m),
        })
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn pi(&self) -> f64 {
        self.pi
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn is_rayleigh(&self) -> bool {
        self.m == 1
    }
}

/// Statistics of the four links plus the source power and the shared cap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    sr: LinkStat,
    rd: LinkStat,
    rr: LinkStat,
    sd: LinkStat,
    p_s: f64,
    p_max: f64,
}

impl SystemParams {
    pub fn new(
        sr: LinkStat,
        rd: LinkStat,
        rr: LinkStat,
        sd: LinkStat,
        p_s: f64,
        p_max: f64,
    ) -> Result<Self, ModelError> {
        let p_s = positive("source power", p_s)?;
        let p_max = positive("power cap", p_max)?;
        if p_s > p_max {
            return Err(ModelError::SourceAboveCap { p_s, p_max });
        }
        Ok(Self {
            sr,
            rd,
            rr,
            sd,
            p_s,
            p_max,
        })
    }

    /// Reference scenario: `π_sr = π_rd = 20 dB`, `π_rr = 10 dB`,
    /// `π_sd = 3 dB`, `P_s = P_max = 1`, `m_rr = m_sd = 1`, `m_sr = m_rd = m`.
    pub fn reference_scenario(m: u32) -> Result<Self, ModelError> {
        Self::new(
            LinkStat::new(m, 100.0)?,
            LinkStat::new(m, 100.0)?,
            LinkStat::new(1, 10.0)?,
            LinkStat::new(1, 10f64.powf(0.3))?,
            1.0,
            1.0,
        )
    }

    pub fn sr(&self) -> LinkStat {
        self.sr
    }

    pub fn rd(&self) -> LinkStat {
        self.rd
    }

    pub fn rr(&self) -> LinkStat {
        self.rr
    }

    pub fn sd(&self) -> LinkStat {
        self.sd
    }

    pub fn p_s(&self) -> f64 {
        self.p_s
    }

    pub fn p_max(&self) -> f64 {
        self.p_max
    }

    pub fn with_sr(self, sr: LinkStat) -> Self {
        Self { sr, ..self }
    }

    pub fn with_rd(self, rd: LinkStat) -> Self {
        Self { rd, ..self }
    }

    pub fn with_rr(self, rr: LinkStat) -> Self {
        Self { rr, ..self }
    }

    pub fn with_sd(self, sd: LinkStat) -> Self {
        Self { sd, ..self }
    }

    pub fn with_powers(self, p_s: f64, p_max: f64) -> Result<Self, ModelError> {
        Self::new(self.sr, self.rd, self.rr, self.sd, p_s, p_max)
    }

    pub fn is_rayleigh(&self) -> bool {
        [self.sr, self.rd, self.rr, self.sd]
            .iter()
            .all(LinkStat::is_rayleigh)
    }
}

/// Relay design point: transmit power and circularity coefficient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalParams {
    p_r: f64,
    c_x: f64,
}

impl SignalParams {
    pub fn new(sys: &SystemParams, p_r: f64, c_x: f64) -> Result<Self, ModelError> {
        if !(p_r > 0.0 && p_r <= sys.p_max) {
            return Err(ModelError::RelayPower {
                p_r,
                p_max: sys.p_max,
            });
        }
        if !(0.0..=1.0).contains(&c_x) {
            return Err(ModelError::Circularity(c_x));
        }
        Ok(Self { p_r, c_x })
    }

    pub fn p_r(&self) -> f64 {
        self.p_r
    }

    pub fn c_x(&self) -> f64 {
        self.c_x
    }
}

/// Target rate `r` in bits/s/Hz with `γ = 2^{2r} - 1` and `η = 2^r - 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateTarget {
    r: f64,
    gamma: f64,
    eta: f64,
}

impl RateTarget {
    pub fn new(r: f64) -> Result<Self, ModelError> {
        let r = positive("target rate", r)?;
        let eta = (r * std::f64::consts::LN_2).exp_m1();
        Ok(Self {
            r,
            gamma: eta * (eta + 2.0),
            eta,
        })
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// `Ψ_r(x)` without domain checks; callers guarantee `x ∈ [0, 1]`.
    pub(crate) fn psi(&self, x: f64) -> f64 {
        let t = self.gamma * (1.0 - x) * (1.0 + x);
        t / ((1.0 + t).sqrt() + 1.0)
    }

    /// `Ψ_r(c·i/(i + 1))` with `1 - x` formed as `(1 - c) + c/(i + 1)`, so
    /// large `i` keeps full relative precision.
    pub(crate) fn psi_attenuated(&self, c: f64, i: f64) -> f64 {
        let w = 1.0 / (i + 1.0);
        let t = self.gamma * ((1.0 - c) + c * w) * (1.0 + c * (1.0 - w));
        t / ((1.0 + t).sqrt() + 1.0)
    }

    /// `Ψ_r(c)/(1 - c²)`, written as `γ/(Ψ_r(c) + 2)`.
    pub(crate) fn psi_ratio(&self, c: f64) -> f64 {
        if c >= CIRCULARITY_LIMIT_SWITCH {
            0.5 * self.gamma
        } else {
            self.gamma / (self.psi(c) + 2.0)
        }
    }
}

/// `Ψ_r(x) = √(1 + γ(1 - x²)) - 1` for `x ∈ [0, 1]`.
pub fn psi_r(target: &RateTarget, x: f64) -> Result<f64, ModelError> {
    if !(0.0..=1.0).contains(&x) {
        return Err(ModelError::Domain {
            function: "psi_r",
            x,
        });
    }
    Ok(target.psi(x))
}

/// `Ψ_r(c)/(1 - c²)`, replaced by its limit `γ/2` once `c ≥ 1 - 1e-9`.
pub fn psi_ratio_limit(target: &RateTarget, c_x: f64) -> Result<f64, ModelError> {
    if !(0.0..=1.0).contains(&c_x) {
        return Err(ModelError::Domain {
            function: "psi_ratio_limit",
            x: c_x,
        });
    }
    Ok(target.psi_ratio(c_x))
}

/// `α = P_r π_rr / (P_r π_rr + 1)`.
pub fn alpha(sys: &SystemParams, p_r: f64) -> f64 {
    let x = p_r * sys.rr.pi;
    x / (x + 1.0)
}
