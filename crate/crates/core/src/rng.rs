//! Deterministic, seekable random streams.
//!
//! Every stream is a ChaCha20 keystream (the `rand_chacha` implementation of
//! the IETF/Bernstein cipher with a 64-bit block counter). The 256-bit key is
//! produced from the 64-bit master seed by `SeedableRng::seed_from_u64`
//! (PCG32 expansion, as documented in `rand_core`), and the 64-bit stream id
//! selects the ChaCha nonce, so `(master, stream)` pairs give independent
//! sequences. Outputs are consumed as:
//!
//! * uniform: `(next_u64() >> 11) * 2^-53`, a value in `[0, 1)`;
//! * normal: Box–Muller on two consecutive uniforms `u1, u2`,
//!   `r = sqrt(-2 ln(1 - u1))`, yielding `r cos(2π u2)` and then
//!   `r sin(2π u2)` on the following call.
//!
//! Experiments derive the stream id as `(delta_index << 32) | trial`.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

/// Standard-normal (and uniform) variates from a keyed ChaCha20 stream.
#[derive(Debug, Clone)]
pub struct NormalStream {
    rng: ChaCha20Rng,
    spare: Option<f64>,
}

impl NormalStream {
    pub fn new(master_seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(master_seed);
        rng.set_stream(stream);
        Self { rng, spare: None }
    }

    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * (1.0 - u1).ln()).sqrt();
        let phase = std::f64::consts::TAU * u2;
        self.spare = Some(r * phase.sin());
        r * phase.cos()
    }

    pub fn normals(&mut self, count: usize) -> Vec<f64> {
        (0..count).map(|_| self.normal()).collect()
    }
}

/// Stream id for trial `trial` of the `delta_index`-th noise level.
pub fn stream_id(delta_index: u32, trial: u32) -> u64 {
    (u64::from(delta_index) << 32) | u64::from(trial)
}
