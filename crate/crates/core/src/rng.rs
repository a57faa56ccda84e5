//! Reproducible random streams for parallel trajectories.
//!
//! Each `(seed, channel)` pair keys a ChaCha8 generator and the trajectory
//! index selects its 64-bit stream, so every `(seed, index, channel)` triple
//! maps to its own non-overlapping sequence regardless of scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Independent noise sources of one trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Channel {
    Thermal,
    Backaction,
    Actuator,
    Imprecision,
    /// Initial-state draws.
    Initial,
}

impl Channel {
    fn tag(self) -> u64 {
        match self {
            Channel::Thermal => 0x7468_6572_6d61_6c00,
            Channel::Backaction => 0x6261_636b_6163_7400,
            Channel::Actuator => 0x6163_7475_6174_6f72,
            Channel::Imprecision => 0x696d_7072_6563_6973,
            Channel::Initial => 0x696e_6974_6961_6c00,
        }
    }
}

/// Generator for trajectory `index` and noise `channel` under `seed`.
pub fn stream(seed: u64, index: u64, channel: Channel) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&channel.tag().to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}
