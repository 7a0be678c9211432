//! Named random streams derived from one root seed.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn fnv1a(name: &str) -> u64 {
    name.bytes()
        .fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

/// Generator for the sub-stream `name` of `root`.
pub fn stream(root: u64, name: &str) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(root);
    rng.set_stream(fnv1a(name));
    rng
}

/// A 64-bit seed for components that take a plain seed.
pub fn derive_seed(root: u64, name: &str) -> u64 {
    stream(root, name).next_u64()
}
