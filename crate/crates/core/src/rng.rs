//! Seeded, splittable random streams.
//!
//! Every random draw in the crate comes from ChaCha8 keyed by a 64-bit seed
//! and a label, with the ChaCha stream number selecting an independent
//! sub-stream (play index, batch index, ...). The key is the little-endian
//! seed followed by the little-endian FNV-1a hash of the label, padded with
//! zeros to 32 bytes. Draws are independent of scheduling, so play `i` of a
//! corpus is the same whichever thread produces it.
//!
//! Labels in use:
//!
//! | label            | purpose                                      |
//! |------------------|----------------------------------------------|
//! | `plays`          | play `i` of a generated corpus               |
//! | `perturb`        | edits applied to play `i` of a corpus        |
//! | `model-init`     | initial LSTM weights                         |
//! | `train`, `validation`, `test-perturbed`, `test-cross` | corpus seeds of one experiment cell |

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

pub const PLAYS: &str = "plays";
pub const PERTURB: &str = "perturb";
pub const MODEL_INIT: &str = "model-init";

/// 64-bit FNV-1a.
pub fn label_hash(label: &str) -> u64 {
    label.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3))
}

/// Sub-stream `index` of the stream keyed by `(seed, label)`.
pub fn stream(seed: u64, label: &str, index: u64) -> StreamRng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&label_hash(label).to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}

/// A fresh seed for a named role, drawn from `(seed, label)`.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    use rand::RngCore;
    stream(seed, label, 0).next_u64()
}
