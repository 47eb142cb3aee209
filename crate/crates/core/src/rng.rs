//! Counter-based random streams.
//!
//! Every random quantity in the crate is keyed by a master seed and a
//! 64-bit counter. The pair selects an independent ChaCha stream, so draw
//! `t` can be regenerated in isolation and in any order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator for stream `counter` under `seed`.
pub fn stream(seed: u64, counter: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(counter);
    rng
}

/// Child seed derived from `(seed, counter)`, for keying nested streams.
pub fn derive_seed(seed: u64, counter: u64) -> u64 {
    use rand::RngCore;
    stream(seed, counter).next_u64()
}
