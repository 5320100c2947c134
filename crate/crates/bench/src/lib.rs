//! Fixtures shared by the benchmarks.

use vbam::kalman::GaussianState;
use vbam::mcmc::{AdaptationConfig, ChainInit, FilterInit, Sampler, Scheme};
use vbam::targets::GaussianTarget;
use vbam::vbakf::{NoiseBelief, VbakfState};
use vbam::{DVector, SpdMatrix, StateSpaceModel};

/// Diagonal Gaussian target with variances `1, 2, …, d`.
pub fn gaussian_target(d: usize) -> GaussianTarget {
    let var: Vec<f64> = (1..=d).map(|i| i as f64).collect();
    GaussianTarget::diagonal(&var).expect("positive variances")
}

/// Sampler over `target` with the given scheme, started at the origin.
pub fn sampler(target: &GaussianTarget, scheme: Scheme) -> Sampler<'_, GaussianTarget> {
    let d = target.covariance().dim();
    let mut init = ChainInit::new(DVector::zeros(d), SpdMatrix::identity(d));
    if scheme == Scheme::Vbam {
        init = init.with_filter(FilterInit::random_walk(d, 1e-9).expect("valid model"));
    }
    Sampler::new(target, AdaptationConfig::with_scheme(scheme), init).expect("valid sampler")
}

/// Random-walk model and a filter state with a unit noise belief.
pub fn filter(d: usize) -> (StateSpaceModel, VbakfState) {
    let model = StateSpaceModel::random_walk(d, 1e-9).expect("valid model");
    let state = VbakfState::new(
        GaussianState::new(DVector::zeros(d), SpdMatrix::identity(d)).expect("matching dims"),
        NoiseBelief::new(d as f64 + 20.0, SpdMatrix::identity(d)).expect("valid dof"),
    );
    (model, state)
}
