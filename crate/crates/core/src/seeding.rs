//! Deterministic seed derivation.
//!
//! Every random choice in the toolkit flows from one master seed. Components
//! derive their own generator with [`rng_for`] under a stable label
//! (`"split"`, `"init/encoder"`, `"batch"`, `"synth"`, ...), so adding or
//! removing one consumer never shifts the stream seen by another.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

/// Derive a 32-byte seed from `master` and a label.
pub fn sub_seed(master: u64, label: &str) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    hasher.update(b"/");
    hasher.update(label.as_bytes());
    hasher.finalize().into()
}

/// A generator dedicated to one named consumer of the master seed.
pub fn rng_for(master: u64, label: &str) -> ChaCha20Rng {
    ChaCha20Rng::from_seed(sub_seed(master, label))
}

/// Serializable position of a ChaCha generator, used to resume a run
/// mid-stream (e.g. from a training checkpoint) bit-exactly.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct RngState {
    /// Hex-encoded 32-byte seed.
    pub seed_hex: String,
    /// Word offset into the keystream.
    pub word_pos: u128,
}

impl RngState {
    pub fn capture(rng: &ChaCha20Rng) -> Self {
        let seed = rng.get_seed();
        let mut seed_hex = String::with_capacity(64);
        for byte in seed {
            seed_hex.push_str(&format!("{byte:02x}"));
        }
        RngState {
            seed_hex,
            word_pos: rng.get_word_pos(),
        }
    }

    pub fn restore(&self) -> Result<ChaCha20Rng, String> {
        if self.seed_hex.len() != 64 {
            return Err(format!("seed must be 64 hex chars, got {}", self.seed_hex.len()));
        }
        let mut seed = [0u8; 32];
        for (i, chunk) in seed.iter_mut().enumerate() {
            let hex = &self.seed_hex[2 * i..2 * i + 2];
            *chunk = u8::from_str_radix(hex, 16).map_err(|e| format!("bad hex `{hex}`: {e}"))?;
        }
        let mut rng = ChaCha20Rng::from_seed(seed);
        rng.set_word_pos(self.word_pos);
        Ok(rng)
    }
}
