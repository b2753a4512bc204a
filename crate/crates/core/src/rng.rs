//! Keyed random streams.
//!
//! Every random decision draws from its own ChaCha8 stream whose key is a
//! SHA-256 of `(seed, purpose, step, image id)`. No state is shared between
//! samples, so results do not depend on which worker handles a sample or in
//! which order samples are processed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// What a stream is used for; part of the key.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Purpose {
    Branch,
    CutBlur,
    Shuffle,
    Epoch,
}

impl Purpose {
    fn tag(self) -> &'static str {
        match self {
            Purpose::Branch => "branch",
            Purpose::CutBlur => "cutblur",
            Purpose::Shuffle => "shuffle",
            Purpose::Epoch => "epoch",
        }
    }
}

pub fn stream(seed: u64, purpose: Purpose, counter: u64, image_id: &str) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    for part in [purpose.tag().as_bytes(), image_id.as_bytes()] {
        h.update((part.len() as u64).to_le_bytes());
        h.update(part);
    }
    h.update(counter.to_le_bytes());
    ChaCha8Rng::from_seed(h.finalize().into())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn keys_separate_streams() {
        let a: u64 = stream(1, Purpose::Branch, 5, "x").random();
        assert_eq!(a, stream(1, Purpose::Branch, 5, "x").random::<u64>());
        assert_ne!(a, stream(2, Purpose::Branch, 5, "x").random::<u64>());
        assert_ne!(a, stream(1, Purpose::CutBlur, 5, "x").random::<u64>());
        assert_ne!(a, stream(1, Purpose::Branch, 6, "x").random::<u64>());
        assert_ne!(a, stream(1, Purpose::Branch, 5, "y").random::<u64>());
    }
}
