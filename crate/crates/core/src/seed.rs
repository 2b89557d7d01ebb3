//! Deterministic per-replication random streams.
//!
//! A [`SeedSequence`] holds a master seed. Replication `k` of an experiment
//! draws from a ChaCha8 generator keyed by the master seed on stream `k`, so
//! any replication can be regenerated in isolation and the assignment does
//! not depend on how work is scheduled. Independent sub-experiments get their
//! own master through [`SeedSequence::derive`].

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSequence {
    pub master: u64,
}

impl SeedSequence {
    pub fn new(master: u64) -> Self {
        Self { master }
    }

    /// Generator for replication (stream) `index`.
    pub fn rng(&self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master);
        rng.set_stream(index);
        rng
    }

    /// A new sequence for an independent purpose, keyed by `label`.
    pub fn derive(&self, label: u64) -> SeedSequence {
        SeedSequence::new(splitmix64(
            self.master ^ splitmix64(label.wrapping_add(0x9E37_79B9_7F4A_7C15)),
        ))
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
