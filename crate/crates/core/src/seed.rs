//! Deterministic seed derivation.
//!
//! Every random draw in the crate is keyed by an explicit `u64` seed. Streams
//! that must not alias (topology vs. traffic vs. solver randomness, one slot
//! vs. the next) derive their own seed by mixing a stream tag and an index
//! into the base seed with the SplitMix64 finalizer.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags for [`derive`].
pub mod stream {
    pub const TOPOLOGY: u64 = 0x7470_6f6c;
    pub const CHANNELS: u64 = 0x6368_616e;
    pub const OCCUPANCY: u64 = 0x6f63_6375;
    pub const TRAFFIC: u64 = 0x7472_6166;
    pub const SOLVER: u64 = 0x736f_6c76;
    pub const GENERATE: u64 = 0x6765_6e65;
    pub const REWARD: u64 = 0x7277_6172;
    pub const POLICY: u64 = 0x706f_6c69;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes `(base, stream, index)` into an independent child seed.
pub fn derive(base: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(base) ^ stream) ^ index)
}

/// Portable, reproducible generator for a seed.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
