//! Counter-keyed random streams.
//!
//! A [`RandomStream`] is a pure address: a global seed plus a
//! `(experiment, replication, population)` path. Materializing it with
//! [`RandomStream::rng`] always yields the same ChaCha8 sequence, so work can
//! be scheduled on any number of threads in any order without changing
//! results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct StreamId {
    pub experiment: u64,
    pub replication: u64,
    pub population: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RandomStream {
    seed: u64,
    id: StreamId,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn mix(a: u64, b: u64) -> u64 {
    splitmix64(a ^ splitmix64(b).rotate_left(17))
}

impl RandomStream {
    pub fn new(seed: u64) -> Self {
        RandomStream {
            seed,
            id: StreamId::default(),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn id(&self) -> StreamId {
        self.id
    }

    pub fn experiment(self, experiment: u64) -> Self {
        RandomStream {
            id: StreamId { experiment, ..self.id },
            ..self
        }
    }

    pub fn replication(self, replication: u64) -> Self {
        RandomStream {
            id: StreamId { replication, ..self.id },
            ..self
        }
    }

    pub fn population(self, population: u64) -> Self {
        RandomStream {
            id: StreamId { population, ..self.id },
            ..self
        }
    }

    /// Builds the generator for this address.
    ///
    /// The ChaCha key is derived from `(seed, experiment)` and the 64-bit
    /// stream number from `(replication, population)`.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        let mut state = mix(self.seed, self.id.experiment);
        for chunk in key.chunks_exact_mut(8) {
            state = splitmix64(state);
            chunk.copy_from_slice(&state.to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(mix(self.id.replication, self.id.population.wrapping_add(1)));
        rng
    }
}
