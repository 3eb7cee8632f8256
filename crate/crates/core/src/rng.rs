//! Seed derivation. Every random stream in the crate is a ChaCha8 generator
//! keyed on `(seed, stream, index)`, so streams with different coordinates
//! never overlap and reruns reproduce bit-for-bit across platforms.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

pub fn stream(seed: u64, stream: u64, index: u64) -> StreamRng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&stream.to_le_bytes());
    key[16..24].copy_from_slice(&index.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

pub fn seeded(seed: u64) -> StreamRng {
    stream(seed, 0, 0)
}
