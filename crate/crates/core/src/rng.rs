//! Random number streams.
//!
//! Every Monte-Carlo work unit draws from its own ChaCha8 stream, addressed by
//! a root seed and a 64-bit stream id. ChaCha is counter based, so streams are
//! non-overlapping and a unit's draws do not depend on scheduling order.
//!
//! Gaussian samples use Box–Muller on the stream's uniforms, and Rayleigh
//! fading amplitudes are `sqrt(-ln U)` so that `E[H^2] = 1`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

/// Deterministic uniform/Gaussian source for one work unit.
#[derive(Clone, Debug)]
pub struct Stream {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl Stream {
    pub fn new(root_seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(root_seed);
        rng.set_stream(stream_id);
        Self { rng, spare: None }
    }

    /// Stream for a unit addressed by two coordinates (e.g. experiment tag, block index).
    pub fn for_unit(root_seed: u64, tag: u64, index: u64) -> Self {
        Self::new(root_seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15), index)
    }

    /// Uniform in [0, 1).
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }

    /// Uniform in (0, 1].
    #[inline]
    fn uniform_open0(&mut self) -> f64 {
        1.0 - self.rng.gen::<f64>()
    }

    #[inline]
    pub fn bit(&mut self) -> u8 {
        (self.rng.gen::<u32>() & 1) as u8
    }

    pub fn bits(&mut self, len: usize) -> Vec<u8> {
        let mut out = Vec::with_capacity(len);
        while out.len() < len {
            let mut word = self.rng.gen::<u64>();
            for _ in 0..64.min(len - out.len()) {
                out.push((word & 1) as u8);
                word >>= 1;
            }
        }
        out
    }

    /// Standard normal via Box–Muller.
    #[inline]
    pub fn gaussian(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let r = (-2.0 * self.uniform_open0().ln()).sqrt();
        let theta = 2.0 * PI * self.uniform();
        self.spare = Some(r * theta.sin());
        r * theta.cos()
    }

    /// Rayleigh amplitude with unit second moment.
    #[inline]
    pub fn rayleigh(&mut self) -> f64 {
        (-self.uniform_open0().ln()).sqrt()
    }

    pub fn inner(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}

/// xorshift64* generator for frozen-bit streams.
///
/// State update `x ^= x >> 12; x ^= x << 25; x ^= x >> 27`, output
/// `x * 0x2545F4914F6CDD1D`; the emitted bit is the top bit of each output.
/// A zero seed is replaced by `0x9E3779B97F4A7C15` (xorshift has no zero state).
#[derive(Clone, Debug)]
pub struct FrozenBitStream {
    state: u64,
}

impl FrozenBitStream {
    pub fn new(seed: u64) -> Self {
        let state = if seed == 0 { 0x9E37_79B9_7F4A_7C15 } else { seed };
        Self { state }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.state;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        self.state = x;
        x.wrapping_mul(0x2545_F491_4F6C_DD1D)
    }

    #[inline]
    pub fn next_bit(&mut self) -> u8 {
        (self.next_u64() >> 63) as u8
    }
}
