use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    None,
    Gaussian,
}

/// Additive measurement noise on the state columns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub sigma: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn none() -> Self {
        Self {
            kind: NoiseKind::None,
            sigma: 0.0,
            seed: 0,
        }
    }

    pub fn gaussian(sigma: f64, seed: u64) -> Self {
        Self {
            kind: NoiseKind::Gaussian,
            sigma,
            seed,
        }
    }
}

/// Perturbs states with i.i.d. Gaussian noise; times and inputs are untouched.
///
/// Negative or non-finite sigma is treated as zero.
pub fn add_noise(traj: &Trajectory, noise: &NoiseSpec) -> Trajectory {
    let sigma = if noise.sigma.is_finite() {
        noise.sigma.max(0.0)
    } else {
        0.0
    };
    if noise.kind == NoiseKind::None || sigma == 0.0 {
        return traj.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let normal = Normal::new(0.0, sigma).expect("sigma is finite and positive");
    let mut states = traj.states().clone();
    // Row-major draw order so the stream does not depend on storage layout.
    for i in 0..states.nrows() {
        for j in 0..states.ncols() {
            states[(i, j)] += normal.sample(&mut rng);
        }
    }
    traj.with_states(states)
}
