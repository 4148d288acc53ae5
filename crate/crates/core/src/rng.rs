//! Seeded random streams.
//!
//! Every Monte Carlo path draws from ChaCha8, a counter-based generator. A
//! run is identified by a 64-bit `seed`; replica `r` of that run uses the
//! ChaCha stream number `r` under the same key, so ensembles give identical
//! results regardless of how replicas are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator for replica `replica` of the run keyed by `seed`.
pub fn stream(seed: u64, replica: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replica);
    rng
}
