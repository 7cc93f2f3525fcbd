//! Reproducible, splittable random-number streams.
//!
//! A [`RngStream`] is a value: a (master seed, stream id) pair. Forking
//! derives a child id through a splitmix64 avalanche, so any tree of forks
//! yields statistically independent ChaCha generators regardless of the
//! order, thread, or time at which they are instantiated. Replicate b of an
//! experiment always draws from `base.fork(b)`, which is what makes runs
//! byte-identical across worker counts.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Value-like handle for a reproducible random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngStream {
    master_seed: u64,
    stream_id: u64,
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl RngStream {
    /// Root stream for a master seed.
    pub fn new(master_seed: u64) -> Self {
        Self {
            master_seed,
            stream_id: 0,
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Child stream `child` of this stream. Forking is pure: the parent is
    /// unaffected and the same (parent, child) pair always yields the same
    /// stream.
    pub fn fork(&self, child: u64) -> Self {
        let mut state = self.stream_id ^ 0xa076_1d64_78bd_642f;
        let mixed = splitmix64(&mut state) ^ child.wrapping_mul(0xe703_7ed1_a0b4_28db);
        let mut state2 = mixed;
        Self {
            master_seed: self.master_seed,
            stream_id: splitmix64(&mut state2),
        }
    }

    /// Instantiate the generator for this stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut state = self.master_seed ^ self.stream_id.rotate_left(17);
        let mut seed = [0u8; 32];
        for chunk in seed.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(seed);
        rng.set_stream(self.stream_id);
        rng
    }
}
