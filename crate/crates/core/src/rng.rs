//! Deterministic random streams.
//!
//! Every chain draws from a ChaCha8 stream (a counter-based generator). The
//! stream for replica `r` of a run seeded with `master_seed` is
//! `ChaCha8Rng::seed_from_u64(master_seed)` with stream id `r`, so replicas
//! are independent and can be regenerated individually.
//!
//! Draws are always whole 64-bit words: a vertex index costs one word and a
//! uniform threshold costs one word, so the stream position after `t` Glauber
//! steps is exactly `2t` words of 64 bits regardless of which vertices were
//! selected.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Stream id reserved for auxiliary draws (graph seeds, random subsets) so
/// they never collide with replica streams `0, 1, …`.
pub const AUX_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamRng {
    inner: ChaCha8Rng,
}

impl StreamRng {
    pub fn new(master_seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(master_seed);
        inner.set_stream(stream);
        Self { inner }
    }

    /// Uniform index in `0..n` from one 64-bit word (multiply-shift, no
    /// rejection, so the draw count is fixed).
    #[inline]
    pub fn index(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        ((self.inner.next_u64() as u128 * n as u128) >> 64) as usize
    }

    /// Uniform in `[0, 1)` with 53 random bits from one 64-bit word.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Number of 64-bit words consumed so far.
    pub fn words_consumed(&self) -> u128 {
        self.inner.get_word_pos() / 2
    }

    pub fn inner_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.inner
    }
}

/// Derives a child seed for auxiliary purposes (graph generation, random
/// subsets) from a master seed and a label. Labels map to streams counting
/// down from [`AUX_STREAM`].
pub fn derive_seed(master_seed: u64, label: u64) -> u64 {
    StreamRng::new(master_seed, AUX_STREAM - label).next_u64()
}
