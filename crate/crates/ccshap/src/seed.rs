//! Deterministic seed derivation.
//!
//! A 64-bit master seed is combined with a purpose label and an index to
//! derive independent per-task streams. Subset-parallel work (row blocks,
//! sweep instances, per-context fits) derives its own seed so results do
//! not depend on scheduling or partitioning.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// FNV-1a over bytes, used as a stable label hash. Not exposed; only the
/// combination with splitmix below is part of the determinism contract.
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Derive a child seed from a master seed, a purpose label, and an index.
pub fn derive_seed(master: u64, label: &str, index: u64) -> u64 {
    splitmix(master ^ fnv1a(label.as_bytes()).rotate_left(17) ^ splitmix(index))
}

/// RNG for one derived stream.
pub fn stream_rng(master: u64, label: &str, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, label, index))
}
