//! Monte Carlo channel simulator used as the reference for every analytic
//! expression.
//!
//! Samples are drawn in fixed-size batches. Batch `b` uses its own ChaCha8
//! stream (`seed`, stream `b`), batches run in parallel, and their moments
//! are merged in batch order, so results are bit-identical for a given
//! configuration regardless of thread count.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use rayon::prelude::*;
use thiserror::Error;

use crate::model::{RateTarget, SignalParams, SystemParams};
use crate::rates::{rate_rd, rate_sr, ChannelRealization};

pub const MIN_SAMPLES: u64 = 10_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum McError {
    #[error("n_samples must be at least {MIN_SAMPLES}, got {0}")]
    TooFewSamples(u64),
    #[error("batch size must be positive")]
    EmptyBatch,
    #[error("circularity coefficient {0} outside [0, 1]")]
    Circularity(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McConfig {
    pub n_samples: u64,
    pub seed: u64,
    pub batch: u64,
}

impl McConfig {
    pub fn new(n_samples: u64, seed: u64) -> Result<Self, McError> {
        Self::with_batch(n_samples, seed, 1 << 16)
    }

    pub fn with_batch(n_samples: u64, seed: u64, batch: u64) -> Result<Self, McError> {
        let cfg = Self { n_samples, seed, batch };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), McError> {
        if self.n_samples < MIN_SAMPLES {
            return Err(McError::TooFewSamples(self.n_samples));
        }
        if self.batch == 0 {
            return Err(McError::EmptyBatch);
        }
        Ok(())
    }

    /// Generator for batch `b`.
    pub fn rng(&self, b: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(b);
        rng
    }
}

/// Sample mean with its standard error `σ̂/√n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: u64,
}

impl McEstimate {
    /// `|value - mean| / stderr`, infinite when the estimate has no spread
    /// and the value differs.
    pub fn z_score(&self, value: f64) -> f64 {
        let d = (value - self.mean).abs();
        if d == 0.0 {
            0.0
        } else {
            d / self.stderr
        }
    }
}

/// Running mean and sum of squared deviations.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    fn merge(self, other: Self) -> Self {
        if self.n == 0 {
            return other;
        }
        if other.n == 0 {
            return self;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        let w = other.n as f64 / n as f64;
        Self {
            n,
            mean: self.mean + d * w,
            m2: self.m2 + other.m2 + d * d * self.n as f64 * w,
        }
    }

    fn estimate(&self) -> McEstimate {
        let n = self.n as f64;
        McEstimate {
            mean: self.mean,
            stderr: (self.m2 / n).sqrt() / n.sqrt(),
            n: self.n,
        }
    }
}

fn gamma_gain<R: Rng + ?Sized>(m: u32, theta: f64, rng: &mut R) -> f64 {
    let s: f64 = (0..m).map(|_| rng.sample::<f64, _>(Exp1)).sum();
    theta * s
}

/// One block-fading realization: independent gamma gains on the four links.
pub fn sample_gains<R: Rng + ?Sized>(sys: &SystemParams, rng: &mut R) -> ChannelRealization {
    let (sr, rd, rr, sd) = (sys.sr(), sys.rd(), sys.rr(), sys.sd());
    ChannelRealization {
        g_sr: gamma_gain(sr.m(), sr.theta(), rng),
        g_rd: gamma_gain(rd.m(), rd.theta(), rng),
        g_rr: gamma_gain(rr.m(), rr.theta(), rng),
        g_sd: gamma_gain(sd.m(), sd.theta(), rng),
    }
}

/// Unit-power improper Gaussian symbol with real pseudo-variance `c_x`.
pub fn sample_improper_symbol<R: Rng + ?Sized>(c_x: f64, rng: &mut R) -> Result<Complex64, McError> {
    if !(0.0..=1.0).contains(&c_x) {
        return Err(McError::Circularity(c_x));
    }
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Ok(Complex64::new(re * (0.5 * (1.0 + c_x)).sqrt(), im * (0.5 * (1.0 - c_x)).sqrt()))
}

/// Runs `f` on `n_samples` channel draws and returns per-output estimates.
fn simulate<const N: usize, F>(sys: &SystemParams, mc: &McConfig, f: F) -> [McEstimate; N]
where
    F: Fn(&ChannelRealization) -> [f64; N] + Sync,
{
    let batches = mc.n_samples.div_ceil(mc.batch);
    let per_batch: Vec<[Moments; N]> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = mc.rng(b);
            let len = mc.batch.min(mc.n_samples - b * mc.batch);
            let mut acc = [Moments::default(); N];
            for _ in 0..len {
                let ch = sample_gains(sys, &mut rng);
                for (a, x) in acc.iter_mut().zip(f(&ch)) {
                    a.push(x);
                }
            }
            acc
        })
        .collect();
    let total = per_batch
        .into_iter()
        .fold([Moments::default(); N], |acc, b| std::array::from_fn(|i| acc[i].merge(b[i])));
    total.map(|m| m.estimate())
}

fn indicator(event: bool) -> f64 {
    if event {
        1.0
    } else {
        0.0
    }
}

/// Fraction of realizations with `min(R_sr, R_rd) < r`.
pub fn estimate_outage(sys: &SystemParams, sig: &SignalParams, target: &RateTarget, mc: &McConfig) -> Result<McEstimate, McError> {
    mc.validate()?;
    let r = target.r();
    let [e] = simulate(sys, mc, |ch| [indicator(rate_sr(sys, sig, ch).min(rate_rd(sys, sig, ch)) < r)]);
    Ok(e)
}

/// Hop-level and joint outage estimates from the same realizations:
/// `[S–R, R–D, end-to-end]`.
pub fn estimate_hop_outages(sys: &SystemParams, sig: &SignalParams, target: &RateTarget, mc: &McConfig) -> Result<[McEstimate; 3], McError> {
    mc.validate()?;
    let r = target.r();
    Ok(simulate(sys, mc, |ch| {
        let sr = rate_sr(sys, sig, ch) < r;
        let rd = rate_rd(sys, sig, ch) < r;
        [indicator(sr), indicator(rd), indicator(sr || rd)]
    }))
}

/// Sample mean of `min(R_sr, R_rd)`.
pub fn estimate_ergodic(sys: &SystemParams, sig: &SignalParams, mc: &McConfig) -> Result<McEstimate, McError> {
    mc.validate()?;
    let [e] = simulate(sys, mc, |ch| [rate_sr(sys, sig, ch).min(rate_rd(sys, sig, ch))]);
    Ok(e)
}

/// Half-duplex baselines with the relay at `P_max` and no self-interference.
/// Each hop must carry `2r` in its half slot; with `mrc` the destination
/// combines the direct and relayed copies.
pub fn estimate_hdr_outage(sys: &SystemParams, target: &RateTarget, mrc: bool, mc: &McConfig) -> Result<McEstimate, McError> {
    mc.validate()?;
    let two_r = 2.0 * target.r();
    let (p_s, p_r) = (sys.p_s(), sys.p_max());
    let [e] = simulate(sys, mc, |ch| {
        let first = (p_s * ch.g_sr).log2_1p();
        let snr2 = if mrc { p_r * ch.g_rd + p_s * ch.g_sd } else { p_r * ch.g_rd };
        [indicator(first.min(snr2.log2_1p()) < two_r)]
    });
    Ok(e)
}

trait Log2OnePlus {
    fn log2_1p(self) -> f64;
}

impl Log2OnePlus for f64 {
    fn log2_1p(self) -> f64 {
        self.ln_1p() / std::f64::consts::LN_2
    }
}
