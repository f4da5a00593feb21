//! Reproducible random streams.
//!
//! Every replica gets its own ChaCha8 stream: the 256-bit key is expanded
//! from the master seed and the 64-bit stream id is the replica index. ChaCha
//! is counter based, so streams never overlap and a replica's draws do not
//! depend on which thread runs it or in what order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Generator for replica `index` under `master_seed`.
pub fn replica_rng(master_seed: u64, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// Derive an independent master seed for sub-campaign `label` (e.g. one point
/// of a time grid). SplitMix64 finalizer over the combined words.
pub fn derive_seed(master_seed: u64, label: u64) -> u64 {
    let mut z = master_seed
        .wrapping_add(label.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
