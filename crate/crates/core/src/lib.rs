//! Adaptive Metropolis samplers whose proposal covariance is tracked by a
//! variational Bayesian adaptive Kalman filter (VBAM), together with the
//! classical adaptive Metropolis baselines, benchmark targets and
//! convergence diagnostics.

pub mod diagnostics;
pub mod error;
pub mod gaussian;
pub mod kalman;
pub mod mcmc;
pub mod targets;
pub mod vbakf;

pub use error::{Error, Result};
pub use gaussian::SpdMatrix;
pub use kalman::{GaussianState, StateSpaceModel};
pub use vbakf::{NoiseBelief, VbakfConfig, VbakfState};

pub use nalgebra::{DMatrix, DVector};

/// Random stream used by every sampler; seeded explicitly so runs replay.
pub type ChainRng = rand_chacha::ChaCha8Rng;

/// Stream `stream` of the generator seeded from `seed`. Independent chains of
/// one experiment share a seed and differ in stream.
pub fn chain_rng(seed: u64, stream: u64) -> ChainRng {
    use rand::SeedableRng;
    let mut rng = ChainRng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
