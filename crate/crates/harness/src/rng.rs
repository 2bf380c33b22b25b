//! Per-run random streams.
//!
//! Every stream is a ChaCha8 generator keyed by
//! `SHA-256(master_seed ‖ seed_index ‖ purpose)`, all integers little-endian.
//! ChaCha8 output is specified bit for bit, so streams agree across platforms,
//! and unrelated purposes never share state.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub fn stream_key(master_seed: u64, seed_index: u64, purpose: &str) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(master_seed.to_le_bytes());
    h.update(seed_index.to_le_bytes());
    h.update(purpose.as_bytes());
    h.finalize().into()
}

pub fn stream(master_seed: u64, seed_index: u64, purpose: &str) -> ChaCha8Rng {
    ChaCha8Rng::from_seed(stream_key(master_seed, seed_index, purpose))
}
