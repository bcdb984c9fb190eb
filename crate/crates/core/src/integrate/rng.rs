//! Counter-keyed random streams. Every trajectory and every purpose gets its
//! own ChaCha stream, so results never depend on how work is scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum StreamPurpose {
    Hidden = 1,
    Observable = 2,
    InitialHidden = 3,
    InitialObservable = 4,
    Theta = 5,
    Ldp = 6,
    PiAverage = 7,
    Synthetic = 8,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub seed: u64,
    pub purpose: StreamPurpose,
    pub index: u64,
}

impl StreamKey {
    pub fn new(seed: u64, purpose: StreamPurpose, index: u64) -> Self {
        Self { seed, purpose, index }
    }

    /// The key is laid out verbatim in the 256-bit ChaCha seed, so distinct
    /// keys can never collide.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut bytes = [0u8; 32];
        bytes[0..8].copy_from_slice(&self.seed.to_le_bytes());
        bytes[8..16].copy_from_slice(&(self.purpose as u64).to_le_bytes());
        bytes[16..24].copy_from_slice(&self.index.to_le_bytes());
        bytes[24..32].copy_from_slice(b"condgaus");
        ChaCha8Rng::from_seed(bytes)
    }
}

pub fn fill_normals(rng: &mut ChaCha8Rng, out: &mut [f64]) {
    for v in out {
        *v = StandardNormal.sample(rng);
    }
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}
