//! Deterministic seed derivation.
//!
//! Every random choice in the toolkit (noise sampling, assessor splits,
//! coin flips when merging judgments, presentation order) draws from a
//! `ChaCha8Rng` seeded by hashing the global seed together with a scope
//! label and the ids the choice is about. Adding or removing unrelated
//! topics or documents therefore never perturbs other draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Derive a 64-bit seed from a global seed and a list of scope parts.
///
/// Parts are length-prefixed so that `["ab", "c"]` and `["a", "bc"]`
/// produce different seeds.
pub fn derive_seed(global: u64, parts: &[&str]) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(global.to_le_bytes());
    for part in parts {
        hasher.update((part.len() as u64).to_le_bytes());
        hasher.update(part.as_bytes());
    }
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

pub fn scoped_rng(global: u64, parts: &[&str]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(global, parts))
}
