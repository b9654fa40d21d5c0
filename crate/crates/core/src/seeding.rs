//! Independent generator streams derived from one master seed, so Monte-Carlo
//! trials can run in any order and still reproduce bit-for-bit.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Generator for trial `index` of the experiment seeded with `master`.
pub fn stream_rng(master: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng
}

/// First word of [`stream_rng`]; a compact per-trial seed.
pub fn stream_seed(master: u64, index: u64) -> u64 {
    stream_rng(master, index).next_u64()
}
