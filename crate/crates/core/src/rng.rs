//! Seeded random streams.
//!
//! Every stochastic routine takes a 64-bit seed and builds its own
//! [`ChaCha8Rng`], so results never depend on how work is scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for replication `rep` of grid point `grid` under `master`.
pub fn mix_seed(master: u64, grid: u64, rep: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ grid) ^ rep.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}
