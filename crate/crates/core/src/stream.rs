//! Seeded random streams.
//!
//! Every random quantity in the crate is drawn from a [`StreamSpec`]: a master
//! seed plus a path of integers (experiment, replicate, purpose, ...). The
//! generator seed is the SHA-256 digest of
//! `"gilbertlab/stream/v1" || le64(master) || le64(len) || le64(path[0]) || ...`,
//! fed to ChaCha8. Distinct paths give unrelated generators and the same path
//! gives the same bytes on every platform, so work items can be scheduled in
//! any order.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Purpose tags used as the last element of a stream path.
pub mod purpose {
    pub const POINTS: u64 = 1;
    pub const EDGE_MARKS: u64 = 2;
    pub const INSERTION: u64 = 3;
    pub const LOCATION: u64 = 4;
    pub const COUPLING_EDGES: u64 = 5;
    pub const COUPLING_VERTICES: u64 = 6;
    pub const MARKS: u64 = 7;
    pub const BOOTSTRAP: u64 = 8;
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StreamSpec {
    pub master_seed: u64,
    pub path: Vec<u64>,
}

impl StreamSpec {
    pub fn new(master_seed: u64) -> Self {
        Self {
            master_seed,
            path: Vec::new(),
        }
    }

    pub fn with_path(master_seed: u64, path: &[u64]) -> Self {
        Self {
            master_seed,
            path: path.to_vec(),
        }
    }

    /// Stream one level further down the path.
    pub fn child(&self, component: u64) -> Self {
        let mut path = self.path.clone();
        path.push(component);
        Self {
            master_seed: self.master_seed,
            path,
        }
    }

    pub fn seed_bytes(&self) -> [u8; 32] {
        let mut hasher = Sha256::new();
        hasher.update(b"gilbertlab/stream/v1");
        hasher.update(self.master_seed.to_le_bytes());
        hasher.update((self.path.len() as u64).to_le_bytes());
        for component in &self.path {
            hasher.update(component.to_le_bytes());
        }
        let digest = hasher.finalize();
        let mut seed = [0u8; 32];
        seed.copy_from_slice(&digest);
        seed
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::from_seed(self.seed_bytes())
    }
}
