//! Seed-deterministic random substreams.
//!
//! Every random draw in the crate comes from a ChaCha8 keystream. ChaCha is a
//! counter-based generator: the 256-bit key fully determines the output, and
//! the key here is the concatenation `(root seed, purpose tag, a, b)`. Two
//! streams with different `(purpose, a, b)` are therefore independent, and a
//! stream's output never depends on how many other streams were consumed or
//! in which order. That is what makes per-bin drawing and per-item
//! augmentation reproducible under any thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a stream is used for. The discriminant is part of the key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Purpose {
    Featurizer = 1,
    Synthetic = 2,
    DiscriminatorInit = 3,
    Augment = 4,
    Draw = 5,
}

/// Opens the substream `(seed, purpose, a, b)`.
pub fn substream(seed: u64, purpose: Purpose, a: u64, b: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(purpose as u64).to_le_bytes());
    key[16..24].copy_from_slice(&a.to_le_bytes());
    key[24..32].copy_from_slice(&b.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}
