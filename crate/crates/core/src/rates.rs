//! Instantaneous achievable rates with an improper relay signal.
//!
//! Each hop rate is a ratio of quadratic forms `(A² - B²)/(C² - D²)`; the
//! factors `(A ± B)` are kept separate so nothing cancels when `C_x → 1`.

use thiserror::Error;

use crate::model::{SignalParams, SystemParams};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RateError {
    #[error("gain {name} = {value} must be finite and >= 0")]
    NegativeGain { name: &'static str, value: f64 },
    #[error("second-order statistics violate {0}")]
    InvalidStatistics(&'static str),
    #[error("noise is maximally improper (σ⁴ = |σ̃²|²); rate undefined")]
    DegenerateNoise,
}

/// Link power gains `g_ij = |h_ij|²` of one block-fading realization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelRealization {
    pub g_sr: f64,
    pub g_rd: f64,
    pub g_rr: f64,
    pub g_sd: f64,
}

impl ChannelRealization {
    pub fn new(g_sr: f64, g_rd: f64, g_rr: f64, g_sd: f64) -> Result<Self, RateError> {
        for (name, value) in [("g_sr", g_sr), ("g_rd", g_rd), ("g_rr", g_rr), ("g_sd", g_sd)] {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(RateError::NegativeGain { name, value });
            }
        }
        Ok(Self {
            g_sr,
            g_rd,
            g_rr,
            g_sd,
        })
    }
}

/// `½ log₂((σ_y⁴ - |σ̃_y²|²)/(σ_z⁴ - |σ̃_z²|²))` for received signal `y`
/// and interference-plus-noise `z`.
pub fn single_link_improper_rate(
    sigma4_y: f64,
    pseudo2_y: f64,
    sigma4_z: f64,
    pseudo2_z: f64,
) -> Result<f64, RateError> {
    if !(pseudo2_y >= 0.0 && sigma4_y >= pseudo2_y) {
        return Err(RateError::InvalidStatistics("σ_y⁴ ≥ |σ̃_y²|² ≥ 0"));
    }
    if !(pseudo2_z >= 0.0 && sigma4_z >= pseudo2_z) {
        return Err(RateError::InvalidStatistics("σ_z⁴ ≥ |σ̃_z²|² ≥ 0"));
    }
    if sigma4_y < sigma4_z {
        return Err(RateError::InvalidStatistics("σ_y⁴ ≥ σ_z⁴"));
    }
    let den = sigma4_z - pseudo2_z;
    if den <= 0.0 {
        return Err(RateError::DegenerateNoise);
    }
    Ok((0.5 * ((sigma4_y - pseudo2_y) / den).log2()).max(0.0))
}

/// Source-to-relay rate with improper residual self-interference.
pub fn rate_sr(sys: &SystemParams, sig: &SignalParams, ch: &ChannelRealization) -> f64 {
    let s = sys.p_s() * ch.g_sr;
    let i = sig.p_r() * ch.g_rr;
    let c = sig.c_x();
    let lo = 1.0 + i * (1.0 - c);
    let hi = 1.0 + i * (1.0 + c);
    0.5 * ((s / lo).ln_1p() + (s / hi).ln_1p()) / std::f64::consts::LN_2
}

/// Relay-to-destination rate with the direct source signal as proper interference.
pub fn rate_rd(sys: &SystemParams, sig: &SignalParams, ch: &ChannelRealization) -> f64 {
    let d = sig.p_r() * ch.g_rd;
    let q = sys.p_s() * ch.g_sd + 1.0;
    let c = sig.c_x();
    0.5 * ((d * (1.0 - c) / q).ln_1p() + (d * (1.0 + c) / q).ln_1p()) / std::f64::consts::LN_2
}

/// End-to-end decode-and-forward rate `min(R_sr, R_rd)`.
pub fn e2e_rate(sys: &SystemParams, sig: &SignalParams, ch: &ChannelRealization) -> f64 {
    rate_sr(sys, sig, ch).min(rate_rd(sys, sig, ch))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{LinkStat, RateTarget};

    fn unit_sys() -> SystemParams {
        let l = LinkStat::rayleigh(1.0).unwrap();
        SystemParams::new(l, l, l, l, 1.0, 1.0).unwrap()
    }

    fn ch(g_sr: f64, g_rd: f64, g_rr: f64, g_sd: f64) -> ChannelRealization {
        ChannelRealization::new(g_sr, g_rd, g_rr, g_sd).unwrap()
    }

    #[test]
    fn single_link_examples() {
        assert_eq!(single_link_improper_rate(4.0, 0.0, 1.0, 0.0).unwrap(), 1.0);
        assert_eq!(single_link_improper_rate(2.0, 0.5, 2.0, 0.5).unwrap(), 0.0);
        // σ_y² = 9, |σ̃_y²| = 4, σ_z² = 4, |σ̃_z²| = 1.
        let v = single_link_improper_rate(81.0, 16.0, 16.0, 1.0).unwrap();
        assert!((v - 0.5 * (65.0f64 / 15.0).log2()).abs() < 1e-15);
        assert!((v - 1.057_738_6).abs() < 1e-7);
        assert!(matches!(
            single_link_improper_rate(4.0, 1.0, 1.0, 1.0),
            Err(RateError::DegenerateNoise)
        ));
        assert!(single_link_improper_rate(1.0, 2.0, 1.0, 0.0).is_err());
        assert!(single_link_improper_rate(1.0, 0.0, 2.0, 0.0).is_err());
    }

    #[test]
    fn rate_sr_examples() {
        let sys = unit_sys();
        let pgs = SignalParams::new(&sys, 1.0, 0.0).unwrap();
        let igs = SignalParams::new(&sys, 1.0, 1.0).unwrap();
        assert!((rate_sr(&sys, &pgs, &ch(3.0, 0.0, 1.0, 0.0)) - 2.5f64.log2()).abs() < 1e-15);
        assert!((rate_sr(&sys, &igs, &ch(3.0, 0.0, 0.0, 0.0)) - 2.0).abs() < 1e-15);
        assert!((rate_sr(&sys, &igs, &ch(3.0, 0.0, 1.0, 0.0)) - 1.5).abs() < 1e-15);
    }

    #[test]
    fn rate_rd_examples() {
        let sys = unit_sys();
        let pgs = SignalParams::new(&sys, 1.0, 0.0).unwrap();
        let igs = SignalParams::new(&sys, 1.0, 1.0).unwrap();
        assert!((rate_rd(&sys, &pgs, &ch(0.0, 3.0, 0.0, 0.0)) - 2.0).abs() < 1e-15);
        assert!((rate_rd(&sys, &igs, &ch(0.0, 1.0, 0.0, 0.0)) - 0.5 * 3f64.log2()).abs() < 1e-15);
        assert_eq!(rate_rd(&sys, &igs, &ch(0.0, 0.0, 0.0, 5.0)), 0.0);
        let g = ch(3.0, 1.0, 1.0, 0.0);
        assert!((e2e_rate(&sys, &igs, &g) - 0.5 * 3f64.log2()).abs() < 1e-15);
    }

    #[test]
    fn gain_validation() {
        assert!(ChannelRealization::new(-1.0, 0.0, 0.0, 0.0).is_err());
        assert!(ChannelRealization::new(0.0, f64::INFINITY, 0.0, 0.0).is_err());
    }

    #[test]
    fn outage_root_separates_events() {
        let sys = SystemParams::reference_scenario(1).unwrap();
        let t = RateTarget::new(1.0).unwrap();
        for &(p_r, c, g_rr) in &[(1.0, 0.9, 0.7), (0.3, 0.2, 4.0), (0.8, 1.0, 0.05)] {
            let sig = SignalParams::new(&sys, p_r, c).unwrap();
            let i = p_r * g_rr;
            let root = (i + 1.0) / sys.p_s() * t.psi(i * c / (i + 1.0));
            let below = ch(root * (1.0 - 1e-6), 1.0, g_rr, 1.0);
            let above = ch(root * (1.0 + 1e-6), 1.0, g_rr, 1.0);
            assert!(rate_sr(&sys, &sig, &below) < 1.0);
            assert!(rate_sr(&sys, &sig, &above) > 1.0);
        }
    }
}
