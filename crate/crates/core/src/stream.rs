//! Reproducible random streams.
//!
//! A [`SeededStream`] names a ChaCha8 stream by `(base_seed, stream_id)`.
//! Stream ids are derived by hashing a path of labels (experiment, process
//! index, replicate batch, ...), so work items never share generator state
//! and results do not depend on scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeededStream {
    pub base_seed: u64,
    pub stream_id: u64,
}

// splitmix64 finalizer
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stable 64-bit hash of a text label.
pub fn label(name: &str) -> u64 {
    // FNV-1a, then mixed
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    mix(h)
}

impl SeededStream {
    pub fn new(base_seed: u64, stream_id: u64) -> Self {
        Self { base_seed, stream_id }
    }

    /// Stream for the given label path under `base_seed`.
    pub fn derive(base_seed: u64, path: &[u64]) -> Self {
        let id = path.iter().fold(0x5eed_u64, |acc, &p| mix(acc ^ mix(p)));
        Self::new(base_seed, id)
    }

    /// Child stream: same seed, id extended by `path`.
    pub fn child(&self, path: &[u64]) -> Self {
        let id = path.iter().fold(self.stream_id, |acc, &p| mix(acc ^ mix(p)));
        Self::new(self.base_seed, id)
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.base_seed);
        rng.set_stream(self.stream_id);
        rng
    }
}
