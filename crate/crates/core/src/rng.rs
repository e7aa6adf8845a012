//! Reproducible random streams.
//!
//! Every experiment is driven by one 64-bit seed. Independent tasks draw from
//! distinct ChaCha streams of that seed, so parallel batches produce the same
//! numbers regardless of scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Stream ids below this value are reserved for user-visible batches.
pub const INTERNAL_STREAM_BASE: u64 = 1 << 48;

pub fn stream(seed: u64, stream_id: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}

/// Batch size used when splitting sample counts into streams.
pub const BATCH: usize = 4096;

/// Splits `n` draws into `(stream_id, count)` batches.
pub fn batches(n: usize) -> impl Iterator<Item = (u64, usize)> {
    let full = n / BATCH;
    let rest = n % BATCH;
    (0..full)
        .map(|b| (b as u64, BATCH))
        .chain((rest > 0).then_some((full as u64, rest)))
}
