//! Seeded, independently streamed random number generators.
//!
//! Every worker, batch, or trial draws from a ChaCha8 stream identified by
//! `(seed, stream_id)`. ChaCha exposes 2^64 disjoint streams per key, each with
//! a 2^68-byte period, so batches never overlap and any batch can be replayed
//! without touching the others.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Generator type used throughout the workbench.
pub type WorkerRng = ChaCha8Rng;

/// Environment variable consulted for a default seed by the front end.
pub const SEED_ENV: &str = "GGRATIO_SEED";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        RngStream { seed, stream_id }
    }

    pub fn rng(&self) -> WorkerRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }

    /// Derived stream namespace, so separate experiments sharing a seed do not
    /// reuse the same keystream.
    pub fn child(&self, label: u64) -> RngStream {
        RngStream {
            seed: self
                .seed
                .wrapping_mul(0x9E37_79B9_7F4A_7C15)
                .rotate_left(17)
                ^ label.wrapping_mul(0xD1B5_4A32_D192_ED03),
            stream_id: self.stream_id,
        }
    }
}

/// Shorthand for `RngStream::new(seed, stream_id).rng()`.
pub fn stream_rng(seed: u64, stream_id: u64) -> WorkerRng {
    RngStream::new(seed, stream_id).rng()
}
