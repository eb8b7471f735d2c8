//! Seeded random streams.
//!
//! Every stochastic routine takes a caller-owned [`Stream`]. Parallel work is
//! partitioned by stream id, so replication `r` of an experiment always draws
//! from `RngSeed { seed, stream: r }` regardless of scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator behind every stream.
pub type Stream = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct RngSeed {
    pub seed: u64,
    pub stream: u64,
}

impl RngSeed {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    pub fn with_stream(self, stream: u64) -> Self {
        Self { stream, ..self }
    }

    /// Derive a child seed; used to give sub-tasks of one replication
    /// their own independent streams.
    pub fn child(self, tag: u64) -> Self {
        // splitmix64 finalizer over (seed, tag)
        let mut z = self.seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
        Self { seed: z, stream: self.stream }
    }

    pub fn stream(self) -> Stream {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}
