//! Reproducible random streams.
//!
//! Every stage of an experiment owns a ChaCha key derived from the master
//! seed and a stage label; each trial reads its own ChaCha stream under that
//! key. Draws depend only on `(master, stage, trial)`, never on how trials
//! are scheduled over threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type TrialRng = ChaCha8Rng;

/// Key for one stage of an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamKey([u8; 32]);

impl StreamKey {
    pub fn new(master_seed: u64, stage: &str) -> Self {
        let mut h = Sha256::new();
        h.update(master_seed.to_le_bytes());
        h.update((stage.len() as u64).to_le_bytes());
        h.update(stage.as_bytes());
        let digest = h.finalize();
        let mut key = [0u8; 32];
        key.copy_from_slice(&digest);
        Self(key)
    }

    /// Generator for trial `trial` of this stage.
    pub fn trial(&self, trial: u64) -> TrialRng {
        let mut rng = ChaCha8Rng::from_seed(self.0);
        rng.set_stream(trial);
        rng
    }
}
