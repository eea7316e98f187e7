//! Seeded random streams. Every stochastic routine takes a `u64` seed and
//! derives independent ChaCha substreams from it, so results do not depend
//! on thread count or scheduling.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Stream `stream` of the generator keyed by `seed`.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// A child seed for the `index`-th independent task under `seed`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    substream(seed, index.wrapping_add(1)).next_u64()
}
