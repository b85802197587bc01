//! Deterministic random streams.
//!
//! Every chain owns a ChaCha8 stream selected by `(master_seed, stream)`, so
//! results do not depend on how chains are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Name recorded in run metadata.
pub const RNG_ALGORITHM: &str =
    "ChaCha8 (rand_chacha 0.9), seed_from_u64(master_seed), stream = chain index";

pub type ChainRng = ChaCha8Rng;

pub fn seeded(master_seed: u64, stream: u64) -> ChainRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream);
    rng
}
