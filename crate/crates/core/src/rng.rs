//! Counter-based random streams.
//!
//! Every random draw in the crate comes from a ChaCha stream keyed by
//! `(seed, domain)` and selected by a 64-bit stream id (the trial or episode
//! index). Outcomes therefore depend only on those three numbers, never on
//! how trials are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Independent key spaces so that, e.g., loss draws never perturb the
/// measurement draws of the same episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum StreamDomain {
    Measurement = 1,
    Loss = 2,
    BaselineTime = 3,
    BaselineFrequency = 4,
    Glm = 5,
    BaselineLoss = 6,
}

pub fn stream_rng(seed: u64, domain: StreamDomain, stream: u64) -> ChaCha12Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(domain as u64).to_le_bytes());
    let mut rng = ChaCha12Rng::from_seed(key);
    rng.set_stream(stream);
    rng
}
