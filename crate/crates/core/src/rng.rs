//! Deterministic random streams.
//!
//! Every note gets its own generator seeded from the run seed and a stable
//! hash of the note id, so results do not depend on processing order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type StreamRng = ChaCha8Rng;

/// First eight bytes of SHA-256 over `key`, little-endian.
pub fn stable_hash(key: &str) -> u64 {
    let digest = Sha256::digest(key.as_bytes());
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

pub fn stream(seed: u64, key: &str) -> StreamRng {
    StreamRng::seed_from_u64(seed ^ stable_hash(key))
}

pub fn seeded(seed: u64) -> StreamRng {
    StreamRng::seed_from_u64(seed)
}
