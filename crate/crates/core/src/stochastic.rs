//! Purpose-keyed, counter-based random streams.
//!
//! Every draw is a pure function of `(global_seed, case_nr, purpose,
//! occurrence)`. There is no generator state that advances, so two
//! counterfactual branches of the same case see the same numbers for every
//! key they both touch, no matter in which order or how often other keys
//! were consumed.
//!
//! Each sampler in [`Samplers`] consumes exactly one uniform per draw (the
//! uniform at its key), using inverse-CDF transforms throughout.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::beta::beta_reg;

use crate::error::{Result, SimError};

/// What a draw is used for. Streams with different purposes never share
/// values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Purpose {
    CaseInit,
    LoopCount,
    CallRedraw,
    Duration,
    ClientDecision,
    Regime,
    PolicyNoise,
}

impl Purpose {
    pub const ALL: [Purpose; 7] = [
        Purpose::CaseInit,
        Purpose::LoopCount,
        Purpose::CallRedraw,
        Purpose::Duration,
        Purpose::ClientDecision,
        Purpose::Regime,
        Purpose::PolicyNoise,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Purpose::CaseInit => "case-init",
            Purpose::LoopCount => "loop-count",
            Purpose::CallRedraw => "call-redraw",
            Purpose::Duration => "duration",
            Purpose::ClientDecision => "client-decision",
            Purpose::Regime => "regime",
            Purpose::PolicyNoise => "policy-noise",
        }
    }

    fn tag(self) -> u64 {
        // Fixed numbering, never reorder: it is baked into every stream.
        match self {
            Purpose::CaseInit => 1,
            Purpose::LoopCount => 2,
            Purpose::CallRedraw => 3,
            Purpose::Duration => 4,
            Purpose::ClientDecision => 5,
            Purpose::Regime => 6,
            Purpose::PolicyNoise => 7,
        }
    }
}

impl fmt::Display for Purpose {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Purpose {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        Purpose::ALL
            .into_iter()
            .find(|p| p.label() == s)
            .ok_or_else(|| SimError::UnknownPurpose(s.to_string()))
    }
}

/// Identifies one position in one stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StreamKey {
    pub case_nr: u64,
    pub purpose: Purpose,
    pub occurrence: u64,
}

impl StreamKey {
    pub fn new(case_nr: u64, purpose: Purpose, occurrence: u64) -> Self {
        Self {
            case_nr,
            purpose,
            occurrence,
        }
    }

    /// Builds a key from a textual purpose label.
    pub fn parse(case_nr: u64, purpose: &str, occurrence: u64) -> Result<Self> {
        Ok(Self::new(case_nr, purpose.parse()?, occurrence))
    }
}

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stateless source of uniforms keyed by [`StreamKey`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StreamProvider {
    global_seed: u64,
}

impl StreamProvider {
    pub fn new(global_seed: u64) -> Self {
        Self { global_seed }
    }

    pub fn seed(&self) -> u64 {
        self.global_seed
    }

    /// Raw 64-bit hash of the key under this seed.
    pub fn bits(&self, key: StreamKey) -> u64 {
        let mut h = mix64(self.global_seed.wrapping_add(GOLDEN_GAMMA));
        h = mix64(h ^ key.case_nr.wrapping_mul(0xD6E8_FEB8_6659_FD93).wrapping_add(GOLDEN_GAMMA));
        h = mix64(h ^ key.purpose.tag().wrapping_mul(0xA076_1D64_78BD_642F));
        mix64(h ^ key.occurrence.wrapping_mul(0xE703_7ED1_A0B4_28DB).wrapping_add(GOLDEN_GAMMA))
    }

    /// Uniform in `[0, 1)`. The value is a midpoint of a 2^-53 grid cell, so
    /// it is never exactly 0, which keeps inverse-CDF transforms finite.
    pub fn draw_uniform(&self, key: StreamKey) -> f64 {
        let k = self.bits(key) >> 11;
        (k as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    pub fn samplers(&self, key: StreamKey) -> Samplers {
        Samplers { u: self.draw_uniform(key) }
    }

    /// Derives an independent seed for a named sub-experiment.
    pub fn derive_seed(&self, salt: u64) -> u64 {
        mix64(mix64(self.global_seed ^ 0x5EED) ^ salt.wrapping_mul(GOLDEN_GAMMA))
    }
}

/// Distribution transforms of the single uniform at one key.
#[derive(Debug, Clone, Copy)]
pub struct Samplers {
    u: f64,
}

impl Samplers {
    pub fn uniform(&self) -> f64 {
        self.u
    }

    pub fn uniform_range(&self, lo: f64, hi: f64) -> Result<f64> {
        if !(lo.is_finite() && hi.is_finite()) || hi < lo {
            return Err(SimError::InvalidDistribution(format!("uniform range [{lo}, {hi})")));
        }
        Ok(lo + (hi - lo) * self.u)
    }

    pub fn normal(&self, mean: f64, sd: f64) -> Result<f64> {
        if !mean.is_finite() || !sd.is_finite() || sd < 0.0 {
            return Err(SimError::InvalidDistribution(format!("normal({mean}, {sd})")));
        }
        if sd == 0.0 {
            return Ok(mean);
        }
        Ok(mean + sd * standard_normal_quantile(self.u))
    }

    pub fn lognormal(&self, mu: f64, sigma: f64) -> Result<f64> {
        Ok(self.normal(mu, sigma)?.exp())
    }

    pub fn beta(&self, a: f64, b: f64) -> Result<f64> {
        if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
            return Err(SimError::InvalidDistribution(format!("beta({a}, {b})")));
        }
        // Bisection on the regularized incomplete beta; 64 halvings reach
        // the f64 resolution of [0, 1].
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        for _ in 0..64 {
            let mid = 0.5 * (lo + hi);
            if beta_reg(a, b, mid) < self.u {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    pub fn bernoulli(&self, p: f64) -> Result<bool> {
        if !(0.0..=1.0).contains(&p) {
            return Err(SimError::InvalidDistribution(format!("bernoulli({p})")));
        }
        Ok(self.u < p)
    }

    /// Index drawn with probability proportional to `weights`.
    pub fn categorical(&self, weights: &[f64]) -> Result<usize> {
        let total: f64 = weights.iter().sum();
        if weights.is_empty() || weights.iter().any(|w| !w.is_finite() || *w < 0.0) || total <= 0.0 {
            return Err(SimError::InvalidDistribution(format!("categorical({weights:?})")));
        }
        let target = self.u * total;
        let mut acc = 0.0;
        for (i, w) in weights.iter().enumerate() {
            acc += w;
            if target < acc {
                return Ok(i);
            }
        }
        Ok(weights.len() - 1)
    }

    /// Uniform index in `0..n`.
    pub fn index(&self, n: usize) -> Result<usize> {
        if n == 0 {
            return Err(SimError::InvalidDistribution("index over empty set".into()));
        }
        Ok(((self.u * n as f64) as usize).min(n - 1))
    }
}

fn standard_normal_quantile(u: f64) -> f64 {
    // Normal::new(0, 1) cannot fail.
    Normal::new(0.0, 1.0).map(|n| n.inverse_cdf(u)).unwrap_or(0.0)
}
