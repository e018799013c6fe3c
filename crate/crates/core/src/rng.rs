//! Seed derivation. Every random consumer gets its own ChaCha stream derived
//! from a root seed, so components stay reproducible independently of each other.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the `index`-th child stream of `seed`.
pub fn derive(seed: u64, index: u64) -> u64 {
    mix64(seed ^ mix64(index.wrapping_add(0x6A09_E667_F3BC_C909)))
}

/// Seed of a named substream (`"task-gen"`, `"rollout"`, `"shuffle"`, `"eval"`, ...).
pub fn substream(root: u64, name: &str) -> u64 {
    // FNV-1a over the name
    let mut h: u64 = 0xCBF2_9CE4_8422_2325;
    for b in name.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    derive(root, h)
}

pub fn from_seed(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}
