//! Deterministic random streams. One master seed fans out into independent
//! ChaCha streams, one per purpose, so that e.g. changing the number of
//! dropout draws never shifts the shuffling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Init = 1,
    Dropout = 2,
    Shuffle = 3,
    Sampling = 4,
    Synthetic = 5,
}

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn stream(master: u64, purpose: Stream) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(purpose as u64);
    rng
}

/// A stream keyed by purpose plus a sub-index, e.g. one sampling stream per
/// nonce item.
pub fn substream(master: u64, purpose: Stream, index: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(((purpose as u64) << 48) | (index & 0xFFFF_FFFF_FFFF));
    rng
}
