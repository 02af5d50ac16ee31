//! Counter-based random streams.
//!
//! Every stream is a pure function of `(seed, epoch, iteration, purpose)`:
//! the key is folded into a 64-bit state with the SplitMix64 finalizer and
//! the stream emits `finalize(state + n * GAMMA)` for `n = 1, 2, ...`. No
//! state is shared between streams, so draws for different iterations or
//! ranks can be produced in any order, on any thread, and agree bit for bit.

use crate::error::{Error, Result};

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn finalize(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a over the UTF-8 bytes of a purpose tag.
fn tag_hash(tag: &str) -> u64 {
    tag.bytes().fold(0xCBF2_9CE4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

/// Identifies one independent stream under a seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey<'a> {
    pub epoch: u64,
    pub iteration: u64,
    pub purpose: &'a str,
}

impl<'a> StreamKey<'a> {
    pub const fn new(epoch: u64, iteration: u64, purpose: &'a str) -> Self {
        Self {
            epoch,
            iteration,
            purpose,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SeededRng {
    state: u64,
}

impl SeededRng {
    pub fn new(seed: u64, key: StreamKey<'_>) -> Self {
        let mut s = finalize(seed ^ GAMMA);
        s = finalize(s ^ key.epoch.wrapping_mul(0xD1B5_4A32_D192_ED03));
        s = finalize(s ^ key.iteration.wrapping_mul(0xAEF1_7502_108E_F2D9));
        s = finalize(s ^ tag_hash(key.purpose));
        Self { state: s }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GAMMA);
        finalize(self.state)
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Unbiased uniform integer in `[0, bound)` (Lemire's multiply-and-reject).
    pub fn below(&mut self, bound: u64) -> Result<u64> {
        if bound == 0 {
            return Err(Error::ZeroSetSize);
        }
        let threshold = bound.wrapping_neg() % bound;
        loop {
            let m = u128::from(self.next_u64()) * u128::from(bound);
            if (m as u64) >= threshold {
                return Ok((m >> 64) as u64);
            }
        }
    }

    /// Uniform index into a set of `set_size` entries.
    pub fn draw_choice(&mut self, set_size: usize) -> Result<usize> {
        self.below(set_size as u64).map(|i| i as usize)
    }

    /// Standard normal via Box-Muller (one value per call).
    pub fn standard_normal(&mut self) -> f64 {
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            // bound is i + 1 >= 2, never zero
            let j = self.below(i as u64 + 1).unwrap_or(0) as usize;
            items.swap(i, j);
        }
    }
}

/// One draw from a fresh stream: `rng_draw_choice(seed, key, set_size)`.
pub fn draw_choice(seed: u64, key: StreamKey<'_>, set_size: usize) -> Result<usize> {
    SeededRng::new(seed, key).draw_choice(set_size)
}
