//! Reproducible random streams.
//!
//! Every draw comes from ChaCha20 keyed by a 64-bit seed, with the 64-bit
//! stream id set to `(rep << 16) | purpose`. Independent quantities therefore
//! never share a stream, and results do not depend on evaluation order.
//!
//! Uniforms take the top 53 bits of one `u64`. Normals use the Box-Muller
//! transform and consume both outputs of each pair.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

/// Stream purpose tags.
pub mod purpose {
    pub const LOWRANK_U: u64 = 1;
    pub const LOWRANK_V: u64 = 2;
    pub const SPARSE: u64 = 3;
    pub const NOISE: u64 = 4;
    pub const IMAGE_NOISE: u64 = 5;
}

pub struct Stream {
    inner: ChaCha20Rng,
    spare: Option<f64>,
}

impl Stream {
    pub fn new(seed: u64, rep: u64, purpose: u64) -> Self {
        assert!(purpose < (1 << 16), "purpose tag out of range");
        assert!(rep < (1 << 48), "rep index out of range");
        let mut inner = ChaCha20Rng::seed_from_u64(seed);
        inner.set_stream((rep << 16) | purpose);
        Stream { inner, spare: None }
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on `[lo, hi)`.
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// Standard normal.
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        // 1 - u lies in (0, 1], keeping the log finite
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = std::f64::consts::TAU * u2;
        self.spare = Some(radius * angle.sin());
        radius * angle.cos()
    }
}
