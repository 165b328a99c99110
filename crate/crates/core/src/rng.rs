//! Seed fan-out.
//!
//! Every randomized consumer draws from its own ChaCha stream derived from
//! the run seed and a fixed stream id, so adding a consumer never shifts the
//! numbers seen by an existing one.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Fixed stream ids for the consumers inside a training run.
pub mod stream {
    pub const ENCODER: u64 = 1;
    pub const DECODER: u64 = 2;
    pub const RFF: u64 = 3;
    pub const SHUFFLE: u64 = 4;
    pub const SPLIT: u64 = 5;
    pub const GENERATOR: u64 = 6;
    pub const PROBES: u64 = 7;
}

/// Deterministic generator for `(seed, stream_id)`.
pub fn stream_rng(seed: u64, stream_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}

/// Offsets a stream id by a per-layer index so each layer gets its own stream.
pub fn substream(stream_id: u64, index: usize) -> u64 {
    (stream_id << 32) | index as u64
}
