//! Named random substreams derived from a single run seed.
//!
//! Every stage draws from its own generator, keyed by the run seed, a stream
//! name and an item key, so enabling or reordering one stage never shifts the
//! draws of another, and parallel work yields the same values regardless of
//! thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type StreamRng = ChaCha8Rng;

pub const SPLIT: &str = "split";
pub const SCHEDULE: &str = "schedule";
pub const MIXUP_LAMBDA: &str = "mixup-lambda";
pub const SSMBA_MASK: &str = "ssmba-mask";

/// Derives a 64-bit seed for `(seed, stream, key)`.
pub fn derive_seed(seed: u64, stream: &str, key: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update((stream.len() as u64).to_le_bytes());
    hasher.update(stream.as_bytes());
    hasher.update(key.as_bytes());
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

pub fn substream(seed: u64, stream: &str, key: &str) -> StreamRng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, stream, key))
}
