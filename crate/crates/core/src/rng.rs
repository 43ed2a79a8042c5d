//! Deterministic stream derivation for sharded Monte Carlo.
//!
//! Shard `k` of a run with base seed `s` draws from
//! `ChaCha8Rng::seed_from_u64(shard_seed(s, k))`, where `shard_seed` applies
//! the splitmix64 finalizer to `s` and to `s ^ mix(k + 1)`. The mapping is a
//! pure function of `(s, k)`, so results never depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// The splitmix64 output function.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn shard_seed(base_seed: u64, shard: u64) -> u64 {
    splitmix64(splitmix64(base_seed) ^ splitmix64(shard.wrapping_add(1).wrapping_mul(GOLDEN)))
}

pub fn shard_rng(base_seed: u64, shard: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(shard_seed(base_seed, shard))
}
