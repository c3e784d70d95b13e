//! Counter-keyed random streams.
//!
//! A [`Stream`] is a 64-bit key. Child streams are derived by mixing the key
//! with an index, so the stream for rollout `i` of step `k` never depends on
//! how many draws any other rollout consumed. Every consumer gets its own
//! ChaCha8 generator seeded from its key.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Stream {
    key: u64,
}

impl Stream {
    pub fn new(seed: u64) -> Self {
        Self { key: splitmix64(seed) }
    }

    pub fn key(self) -> u64 {
        self.key
    }

    /// Derive an independent sub-stream keyed by `index`.
    pub fn child(self, index: u64) -> Self {
        let mixed = splitmix64(index ^ 0xA076_1D64_78BD_642F);
        Self {
            key: splitmix64(self.key.rotate_left(17) ^ mixed),
        }
    }

    /// Sub-stream keyed by a string label, via FNV-1a.
    pub fn named(self, label: &str) -> Self {
        self.child(fnv1a(label.as_bytes()))
    }

    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.key)
    }
}

/// Zero-mean Gaussian draw scaled by `std`. Always consumes one normal
/// variate, so zero-noise configurations keep the same stream alignment.
pub fn gaussian<R: rand::Rng + ?Sized>(rng: &mut R, std: f64) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    std * z
}

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for b in bytes {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01B3);
    }
    hash
}
