//! Seedable random streams with labelled splitting.
//!
//! A [`Rng`] is a ChaCha8 stream keyed by a 32-byte seed. Child streams are
//! derived as `SHA-256(parent_key || tag || label)`, so a child depends only on
//! the parent's key and the label, never on how much of the parent has been
//! consumed. ChaCha8 output is specified bit-for-bit, which makes every stream
//! identical across platforms.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

const TAG_ROOT: u8 = 0;
const TAG_INDEX: u8 = 1;
const TAG_NAME: u8 = 2;

#[derive(Clone, Debug)]
pub struct Rng {
    key: [u8; 32],
    stream: ChaCha8Rng,
}

impl Rng {
    /// Root stream for a user-facing integer seed.
    pub fn from_seed(seed: u64) -> Self {
        Self::from_key(derive(&[0u8; 32], TAG_ROOT, &seed.to_le_bytes()))
    }

    fn from_key(key: [u8; 32]) -> Self {
        Rng {
            key,
            stream: ChaCha8Rng::from_seed(key),
        }
    }

    /// Child stream for a numeric label, e.g. a record index.
    pub fn split(&self, label: u64) -> Rng {
        Self::from_key(derive(&self.key, TAG_INDEX, &label.to_le_bytes()))
    }

    /// Child stream for a named label, e.g. `"mono/en/3"`.
    pub fn split_named(&self, label: &str) -> Rng {
        Self::from_key(derive(&self.key, TAG_NAME, label.as_bytes()))
    }
}

fn derive(parent: &[u8; 32], tag: u8, label: &[u8]) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(parent);
    hasher.update([tag]);
    hasher.update(label);
    let digest = hasher.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    key
}

impl RngCore for Rng {
    fn next_u32(&mut self) -> u32 {
        self.stream.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.stream.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.stream.fill_bytes(dst)
    }
}
