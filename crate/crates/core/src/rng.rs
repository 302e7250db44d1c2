//! Seeded random streams.
//!
//! Every randomized stage owns a ChaCha stream keyed by `(seed, purpose)`, so
//! results do not depend on thread scheduling or on how many other stages
//! drew numbers before it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub(crate) enum Stream {
    Undersample = 1,
    Split = 2,
    Folds = 3,
    Combine = 4,
    Init = 5,
    Shuffle = 6,
    Dropout = 7,
    Synth = 8,
}

pub(crate) fn seeded(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}
