//! Brownian and fractional Brownian drivers: covariances, samplers, the
//! Volterra kernel and exact covariance checks.

pub mod kernel;
pub mod lemmas;
pub mod sampling;
pub mod special;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use kernel::{kernel_covariance, kernel_dt, kernel_k};
pub use lemmas::{finallemma_check, increasing_lattice, FinalLemma, LatticeReport};
pub use sampling::{sample_bm, sample_fbm, FbmMethod, FbmSampler};
pub use special::hyp2f1;

pub(crate) fn check_hurst(h: f64) -> Result<()> {
    if !(h > 0.0 && h < 1.0) {
        return Err(Error::Domain(format!("Hurst parameter must lie in (0, 1), got {h}")));
    }
    Ok(())
}

/// `E(W_H(s) W_H(t)) = ½ (t^{2H} + s^{2H} − |t − s|^{2H})`.
pub fn fbm_covariance(s: f64, t: f64, h: f64) -> f64 {
    let e = 2.0 * h;
    0.5 * (t.powf(e) + s.powf(e) - (t - s).abs().powf(e))
}

/// `E(W(s,t) W(s′,t′))` for increments `W(s,t) = W_t − W_s`.
pub fn increment_covariance(s: f64, t: f64, s2: f64, t2: f64, h: f64) -> f64 {
    let e = 2.0 * h;
    let p = |x: f64| x.abs().powf(e);
    0.5 * (p(t - s2) + p(s - t2) - p(s - s2) - p(t - t2))
}

/// Fractional Brownian motion of Hurst index `h ∈ (0, 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HurstModel {
    h: f64,
}

impl HurstModel {
    pub fn new(h: f64) -> Result<HurstModel> {
        check_hurst(h)?;
        Ok(HurstModel { h })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn covariance(&self, s: f64, t: f64) -> f64 {
        fbm_covariance(s, t, self.h)
    }

    pub fn increment_covariance(&self, s: f64, t: f64, s2: f64, t2: f64) -> f64 {
        increment_covariance(s, t, s2, t2, self.h)
    }
}

/// Seed and stream of a random source. Distinct streams of one seed are
/// independent, so replica `k` can be sampled on any thread.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngSpec {
    pub seed: u64,
    pub stream: u64,
}

impl RngSpec {
    pub fn new(seed: u64, stream: u64) -> RngSpec {
        RngSpec { seed, stream }
    }

    pub fn with_stream(self, stream: u64) -> RngSpec {
        RngSpec { stream, ..self }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }

    /// `seed=…,stream=…`, the provenance line of sampled files.
    pub fn header(&self) -> String {
        format!("seed={},stream={}", self.seed, self.stream)
    }
}

/// `E(X₁X₂X₃X₄) = c₁₂c₃₄ + c₁₃c₂₄ + c₁₄c₂₃` for centred jointly Gaussian variables.
pub fn wick_fourth_moment(c12: f64, c13: f64, c14: f64, c23: f64, c24: f64, c34: f64) -> f64 {
    c12 * c34 + c13 * c24 + c14 * c23
}
