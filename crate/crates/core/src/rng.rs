//! Seed derivation. Every random choice in the crate flows from one
//! experiment seed through named sub-streams, so each stage is reproducible
//! on its own.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type StreamRng = ChaCha8Rng;

/// Seed for the named sub-stream `name` of `seed`.
pub fn derive_seed(seed: u64, name: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(name.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

/// Generator for stream `stream` of `seed`; distinct streams are independent.
pub fn stream_rng(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn named_rng(seed: u64, name: &str) -> StreamRng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, name))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_differ_and_replay() {
        let a: u64 = stream_rng(5, 0).random();
        let b: u64 = stream_rng(5, 1).random();
        assert_ne!(a, b);
        assert_eq!(a, stream_rng(5, 0).random::<u64>());
        assert_ne!(derive_seed(5, "split"), derive_seed(5, "walks"));
        assert_eq!(derive_seed(5, "split"), derive_seed(5, "split"));
    }
}
