//! Counter-based random draws.
//!
//! Every uniform variate is addressed by a (stream, counter) pair on a ChaCha8
//! keystream keyed by the master seed, so the value a trajectory sees never
//! depends on how work is split across threads.

use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Member indices are packed into the low bits of the counter.
pub const MEMBER_BITS: u32 = 26;

#[derive(Debug, Clone)]
pub struct CounterRng {
    base: ChaCha8Rng,
}

impl CounterRng {
    pub fn new(seed: u64) -> Self {
        CounterRng { base: ChaCha8Rng::seed_from_u64(seed) }
    }

    /// Uniform variate in [0, 1) at position `counter` of stream `stream`.
    pub fn uniform(&self, stream: u64, counter: u64) -> f64 {
        let mut rng = self.base.clone();
        rng.set_stream(stream);
        rng.set_word_pos(u128::from(counter) * 2);
        (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Stream for one independent trajectory.
    pub fn trajectory_stream(trajectory: usize) -> u64 {
        trajectory as u64
    }

    /// Stream for class `class` of ensemble batch `batch`.
    pub fn class_stream(batch: usize, class: usize) -> u64 {
        ((batch as u64) << 32) | class as u64
    }

    /// Counter for ensemble member `member` at step `step`.
    pub fn member_counter(step: usize, member: usize) -> u64 {
        debug_assert!((member as u64) < (1 << MEMBER_BITS));
        ((step as u64) << MEMBER_BITS) | member as u64
    }
}
