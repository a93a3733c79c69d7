//! Keyed random substreams.
//!
//! A substream is a ChaCha8 generator whose 256-bit seed is the SHA-256 of
//! `(seed, key parts)`. Outputs therefore depend only on the key, never on the
//! order or thread in which substreams are created.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type Rng = ChaCha8Rng;

pub fn substream(seed: u64, image_id: &str, index: u64) -> Rng {
    let mut h = Sha256::new();
    h.update(b"paveval/substream/v1");
    h.update(seed.to_le_bytes());
    h.update((image_id.len() as u64).to_le_bytes());
    h.update(image_id.as_bytes());
    h.update(index.to_le_bytes());
    ChaCha8Rng::from_seed(h.finalize().into())
}

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
