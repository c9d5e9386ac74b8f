//! Reproducible random streams. Every parallel work item draws from its own
//! ChaCha8 stream derived from a root seed, so results do not depend on
//! thread scheduling.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream number `index` under `root`.
pub fn stream(root: u64, index: u64) -> Rng {
    let mut r = ChaCha8Rng::seed_from_u64(root);
    r.set_stream(index);
    r
}

/// A child seed for work item `index`.
pub fn derive_seed(root: u64, index: u64) -> u64 {
    stream(root, index).next_u64()
}
