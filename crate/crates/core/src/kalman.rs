//! Linear-Gaussian Kalman filter with known measurement noise, and the
//! windowed information / controllability Gramians used to check uniform
//! complete observability and controllability of a state-space model.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gaussian::{extremal_eigenvalues, SpdMatrix};

/// Time-invariant linear state-space model
/// `x_k = A x_{k-1} + q`, `q ~ N(0, Q)`; `y_k = H x_k + r`.
#[derive(Clone, Debug, PartialEq)]
pub struct StateSpaceModel {
    a: DMatrix<f64>,
    q: DMatrix<f64>,
    h: DMatrix<f64>,
}

impl StateSpaceModel {
    /// `a` and `q` are `n×n`, `h` is `d×n`. `q` may be zero but must be
    /// symmetric positive semidefinite.
    pub fn new(a: DMatrix<f64>, q: DMatrix<f64>, h: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if n == 0 {
            return Err(Error::Empty("dynamic model matrix"));
        }
        Error::check_dim("dynamic model columns", n, a.ncols())?;
        Error::check_dim("process noise rows", n, q.nrows())?;
        Error::check_dim("process noise columns", n, q.ncols())?;
        Error::check_dim("measurement matrix columns", n, h.ncols())?;
        if h.nrows() == 0 {
            return Err(Error::Empty("measurement matrix"));
        }
        if a.iter().chain(q.iter()).chain(h.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("state-space model"));
        }
        let asym = (&q - q.transpose()).norm();
        if asym > 1e-12 * q.norm().max(1.0) {
            return Err(Error::invalid("process noise", "must be symmetric"));
        }
        let q = (&q + q.transpose()) * 0.5;
        let (lo, _) = extremal_eigenvalues(&q);
        if lo < -1e-12 * q.norm().max(f64::MIN_POSITIVE) {
            return Err(Error::invalid("process noise", "must be positive semidefinite"));
        }
        Ok(Self { a, q, h })
    }

    /// `A = a·I`, `Q = q·I`, `H = h·I`.
    pub fn scalar(dim: usize, a: f64, q: f64, h: f64) -> Result<Self> {
        let eye = DMatrix::<f64>::identity(dim, dim);
        Self::new(&eye * a, &eye * q, &eye * h)
    }

    /// Gaussian random walk observed directly: `A = I`, `H = I`, `Q = q·I`.
    pub fn random_walk(dim: usize, q: f64) -> Result<Self> {
        Self::scalar(dim, 1.0, q, 1.0)
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn h(&self) -> &DMatrix<f64> {
        &self.h
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn measurement_dim(&self) -> usize {
        self.h.nrows()
    }
}

/// Filter mean and covariance `(m_k, P_k)`.
#[derive(Clone, Debug)]
pub struct GaussianState {
    pub mean: DVector<f64>,
    pub cov: SpdMatrix,
}

impl GaussianState {
    pub fn new(mean: DVector<f64>, cov: SpdMatrix) -> Result<Self> {
        Error::check_dim("state mean", cov.dim(), mean.len())?;
        Ok(Self { mean, cov })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// How the posterior covariance is formed in the update step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum CovarianceForm {
    /// `P = P⁻ − K S Kᵀ`.
    #[default]
    Symmetric,
    /// `P = (I − KH) P⁻ (I − KH)ᵀ + K Σ Kᵀ`.
    Joseph,
}

pub fn kf_predict(model: &StateSpaceModel, state: &GaussianState) -> Result<GaussianState> {
    Error::check_dim("state", model.state_dim(), state.dim())?;
    let mean = &model.a * &state.mean;
    let cov = &model.a * state.cov.matrix() * model.a.transpose() + &model.q;
    let cov = SpdMatrix::new(cov).map_err(|_| Error::NotPositiveDefinite("predicted covariance"))?;
    Ok(GaussianState { mean, cov })
}

/// The parts of a measurement update that do not depend on the
/// measurement-noise covariance; the variational filter reuses them across
/// its fixed-point passes.
#[derive(Clone, Debug)]
pub(crate) struct PriorInnovation<'a> {
    predicted: &'a GaussianState,
    h: &'a DMatrix<f64>,
    /// `H P⁻`
    hp: DMatrix<f64>,
    /// `H P⁻ Hᵀ`
    hph: DMatrix<f64>,
    /// `y − H m⁻`
    innovation: DVector<f64>,
}

impl<'a> PriorInnovation<'a> {
    pub(crate) fn new(
        model: &'a StateSpaceModel,
        predicted: &'a GaussianState,
        y: &DVector<f64>,
    ) -> Result<Self> {
        Error::check_dim("state", model.state_dim(), predicted.dim())?;
        Error::check_dim("measurement", model.measurement_dim(), y.len())?;
        let h = &model.h;
        let hp = h * predicted.cov.matrix();
        let hph = &hp * h.transpose();
        let innovation = y - h * &predicted.mean;
        Ok(Self {
            predicted,
            h,
            hp,
            hph,
            innovation,
        })
    }

    /// Kalman update for noise covariance `sigma`; returns `(m, P)` with `P`
    /// symmetrized but not yet factorized.
    pub(crate) fn update(
        &self,
        sigma: &DMatrix<f64>,
        form: CovarianceForm,
    ) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let s = SpdMatrix::new(&self.hph + sigma)
            .map_err(|_| Error::NotPositiveDefinite("innovation covariance"))?;
        // K = P⁻ Hᵀ S⁻¹ = (S⁻¹ H P⁻)ᵀ since S and P⁻ are symmetric.
        let k = s.solve(&self.hp).transpose();
        let mean = &self.predicted.mean + &k * &self.innovation;
        let p_prior = self.predicted.cov.matrix();
        let cov = match form {
            CovarianceForm::Symmetric => p_prior - &k * s.matrix() * k.transpose(),
            CovarianceForm::Joseph => {
                let n = p_prior.nrows();
                let i_kh = DMatrix::identity(n, n) - &k * self.h;
                &i_kh * p_prior * i_kh.transpose() + &k * sigma * k.transpose()
            }
        };
        let cov = (&cov + cov.transpose()) * 0.5;
        Ok((mean, cov))
    }
}

/// Measurement update with known noise covariance `sigma`, using the
/// symmetric covariance form.
pub fn kf_update(
    model: &StateSpaceModel,
    predicted: &GaussianState,
    y: &DVector<f64>,
    sigma: &SpdMatrix,
) -> Result<GaussianState> {
    kf_update_with(model, predicted, y, sigma, CovarianceForm::Symmetric)
}

pub fn kf_update_with(
    model: &StateSpaceModel,
    predicted: &GaussianState,
    y: &DVector<f64>,
    sigma: &SpdMatrix,
    form: CovarianceForm,
) -> Result<GaussianState> {
    Error::check_dim("measurement noise", model.measurement_dim(), sigma.dim())?;
    let prior = PriorInnovation::new(model, predicted, y)?;
    let (mean, cov) = prior.update(sigma.matrix(), form)?;
    let cov = SpdMatrix::new(cov).map_err(|_| Error::NotPositiveDefinite("posterior covariance"))?;
    Ok(GaussianState { mean, cov })
}

/// Information matrix over a window `[M₀, M]`:
/// `Σ_k Φᵀ(k,M) Hᵀ Σ_k⁻¹ H Φ(k,M)`, with `Φ(k,M) = A⁻¹ ⋯ A⁻¹` taken
/// `M − k` times. `sigmas[i]` is the noise covariance at time `M₀ + i`.
pub fn observability_gramian(model: &StateSpaceModel, sigmas: &[SpdMatrix]) -> Result<DMatrix<f64>> {
    if sigmas.is_empty() {
        return Err(Error::Empty("observability window"));
    }
    let n = model.state_dim();
    let a_inv = model
        .a
        .clone()
        .try_inverse()
        .ok_or(Error::Singular("dynamic model"))?;
    let mut phi = DMatrix::<f64>::identity(n, n);
    let mut gramian = DMatrix::<f64>::zeros(n, n);
    for sigma in sigmas.iter().rev() {
        Error::check_dim("measurement noise", model.measurement_dim(), sigma.dim())?;
        let hphi = &model.h * &phi;
        gramian += hphi.transpose() * sigma.solve(&hphi);
        phi = &a_inv * phi;
    }
    Ok((&gramian + gramian.transpose()) * 0.5)
}

/// Controllability matrix over a window of `len` time points:
/// `Σ_k Φ(M,k) Q Φᵀ(M,k)` with `Φ(M,k) = A^(M−k)`.
pub fn controllability_gramian(model: &StateSpaceModel, len: usize) -> Result<DMatrix<f64>> {
    if len == 0 {
        return Err(Error::Empty("controllability window"));
    }
    let n = model.state_dim();
    let mut phi = DMatrix::<f64>::identity(n, n);
    let mut gramian = DMatrix::<f64>::zeros(n, n);
    for _ in 0..len {
        gramian += &phi * &model.q * phi.transpose();
        phi = &model.a * phi;
    }
    Ok((&gramian + gramian.transpose()) * 0.5)
}

/// Empirical Gramian bounds `β₁ I ≤ G ≤ β₂ I` across the probed windows.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GramianBounds {
    pub beta1: f64,
    pub beta2: f64,
    pub pass: bool,
}

impl GramianBounds {
    fn failed() -> Self {
        Self {
            beta1: 0.0,
            beta2: f64::NAN,
            pass: false,
        }
    }

    fn accumulate(&mut self, gramian: &DMatrix<f64>) {
        let (lo, hi) = extremal_eigenvalues(gramian);
        // Numerically singular Gramians count as rank deficient.
        let tol = hi.abs() * gramian.nrows() as f64 * f64::EPSILON * 16.0;
        if !(lo > tol) {
            self.pass = false;
        }
        self.beta1 = self.beta1.min(lo.max(0.0));
        self.beta2 = if self.beta2.is_nan() { hi } else { self.beta2.max(hi) };
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct UniformityReport {
    pub window: usize,
    pub observability: GramianBounds,
    pub controllability: GramianBounds,
    /// Set when `A` is singular and the information matrix is undefined.
    pub singular_dynamics: bool,
}

impl UniformityReport {
    pub fn pass(&self) -> bool {
        self.observability.pass && self.controllability.pass
    }
}

/// Evaluates both Gramians over windows `[M−L, M]` for constant noise
/// sequences `Σ = μ I` with `μ` spread geometrically over `[mu1, mu2]`
/// (`probes` levels, at least the two extremes) and for a sequence
/// alternating between the extremes. The model passes a condition when every
/// probed Gramian is positive definite.
pub fn check_uniform_conditions(
    model: &StateSpaceModel,
    mu1: f64,
    mu2: f64,
    window: usize,
    probes: usize,
) -> UniformityReport {
    let len = window + 1;
    let d = model.measurement_dim();

    let mut controllability = GramianBounds {
        beta1: f64::INFINITY,
        beta2: f64::NAN,
        pass: true,
    };
    match controllability_gramian(model, len) {
        Ok(g) => controllability.accumulate(&g),
        Err(_) => controllability = GramianBounds::failed(),
    }

    let levels = probes.max(2);
    let mut sequences: Vec<Vec<f64>> = (0..levels)
        .map(|i| {
            let t = i as f64 / (levels - 1) as f64;
            let mu = (mu1.ln() + t * (mu2.ln() - mu1.ln())).exp();
            vec![mu; len]
        })
        .collect();
    sequences.push((0..len).map(|i| if i % 2 == 0 { mu1 } else { mu2 }).collect());

    let mut observability = GramianBounds {
        beta1: f64::INFINITY,
        beta2: f64::NAN,
        pass: true,
    };
    let mut singular_dynamics = false;
    for seq in &sequences {
        let sigmas: Result<Vec<_>> = seq.iter().map(|&mu| SpdMatrix::scaled_identity(d, mu)).collect();
        let gramian = sigmas.and_then(|s| observability_gramian(model, &s));
        match gramian {
            Ok(g) => observability.accumulate(&g),
            Err(e) => {
                singular_dynamics = matches!(e, Error::Singular(_));
                observability = GramianBounds::failed();
                break;
            }
        }
    }

    UniformityReport {
        window,
        observability,
        controllability,
        singular_dynamics,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal, Uniform};

    fn state(mean: DVector<f64>, cov: DMatrix<f64>) -> GaussianState {
        GaussianState::new(mean, SpdMatrix::new(cov).unwrap()).unwrap()
    }

    #[test]
    fn predict_with_identity_dynamics_is_noop() {
        let model = StateSpaceModel::scalar(2, 1.0, 0.0, 1.0).unwrap();
        let s = state(dvector![1.0, 2.0], dmatrix![2.0, 0.3; 0.3, 1.0]);
        let p = kf_predict(&model, &s).unwrap();
        assert_eq!(p.mean, s.mean);
        assert_eq!(p.cov.matrix(), s.cov.matrix());
    }

    #[test]
    fn predict_scalar_hand_evaluation() {
        let model = StateSpaceModel::scalar(1, 2.0, 0.5, 1.0).unwrap();
        let p = kf_predict(&model, &state(dvector![1.0], dmatrix![1.0])).unwrap();
        assert_eq!(p.mean[0], 2.0);
        assert_eq!(p.cov.matrix()[(0, 0)], 4.5);
    }

    #[test]
    fn predict_strip_random_walk_adds_process_noise() {
        let model = StateSpaceModel::random_walk(2, 0.001f64.powi(2)).unwrap();
        let s = state(dvector![0.0, 0.0], DMatrix::identity(2, 2));
        let p = kf_predict(&model, &s).unwrap();
        let expected = DMatrix::identity(2, 2) * (1.0 + 1e-6);
        assert!((p.cov.matrix() - expected).norm() < 1e-15);
    }

    #[test]
    fn update_zero_innovation_keeps_mean_and_shrinks_covariance() {
        let model = StateSpaceModel::random_walk(2, 0.0).unwrap();
        let s = state(dvector![0.5, -1.0], dmatrix![1.0, 0.2; 0.2, 2.0]);
        let y = model.h() * &s.mean;
        let post = kf_update(&model, &s, &y, &SpdMatrix::identity(2)).unwrap();
        assert!((&post.mean - &s.mean).norm() < 1e-15);
        assert!(post.cov.trace() < s.cov.trace());
    }

    #[test]
    fn update_scalar_conjugate_example() {
        let model = StateSpaceModel::random_walk(1, 0.0).unwrap();
        let s = state(dvector![0.0], dmatrix![1.0]);
        let post = kf_update(&model, &s, &dvector![2.0], &SpdMatrix::identity(1)).unwrap();
        assert!((post.mean[0] - 1.0).abs() < 1e-15);
        assert!((post.cov.matrix()[(0, 0)] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn uninformative_measurement_leaves_prior() {
        let model = StateSpaceModel::random_walk(2, 0.0).unwrap();
        let s = state(dvector![0.3, 0.7], dmatrix![1.0, 0.1; 0.1, 0.5]);
        let sigma = SpdMatrix::scaled_identity(2, 1e12).unwrap();
        let post = kf_update(&model, &s, &dvector![5.0, -5.0], &sigma).unwrap();
        assert!((&post.mean - &s.mean).norm() < 1e-9);
        assert!((post.cov.matrix() - s.cov.matrix()).norm() < 1e-9);
    }

    #[test]
    fn non_positive_innovation_covariance_is_an_error() {
        let model = StateSpaceModel::random_walk(1, 0.0).unwrap();
        let s = state(dvector![0.0], dmatrix![1.0]);
        let prior = PriorInnovation::new(&model, &s, &dvector![1.0]).unwrap();
        let err = prior.update(&dmatrix![-2.0], CovarianceForm::Symmetric).unwrap_err();
        assert!(matches!(err, Error::NotPositiveDefinite(_)));
    }

    #[test]
    fn recursive_updates_match_batch_conjugate_posterior() {
        // A = I, Q = 0, H = I: after n observations the posterior is
        // P = (P0⁻¹ + n Σ⁻¹)⁻¹, m = P (P0⁻¹ m0 + Σ⁻¹ Σ y_i).
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let model = StateSpaceModel::random_walk(3, 0.0).unwrap();
        let sigma_m = dmatrix![2.0, 0.4, 0.0; 0.4, 1.0, 0.2; 0.0, 0.2, 0.5];
        let sigma = SpdMatrix::new(sigma_m.clone()).unwrap();
        let p0 = dmatrix![4.0, 0.0, 0.0; 0.0, 3.0, 0.5; 0.0, 0.5, 2.0];
        let m0 = dvector![1.0, -1.0, 0.5];
        let mut s = state(m0.clone(), p0.clone());
        let mut sum = DVector::zeros(3);
        let n = 50;
        for _ in 0..n {
            let y = DVector::<f64>::from_fn(3, |_, _| StandardNormal.sample(&mut rng)) * 2.0;
            sum += &y;
            s = kf_update(&model, &kf_predict(&model, &s).unwrap(), &y, &sigma).unwrap();
        }
        let p0_inv = p0.clone().try_inverse().unwrap();
        let s_inv = sigma_m.try_inverse().unwrap();
        let post_prec = &p0_inv + &s_inv * n as f64;
        let post_cov = post_prec.try_inverse().unwrap();
        let post_mean = &post_cov * (&p0_inv * &m0 + &s_inv * &sum);
        assert!((&s.mean - post_mean).norm() < 1e-8);
        assert!((s.cov.matrix() - post_cov).norm() < 1e-8);
    }

    #[test]
    fn joseph_form_matches_symmetric_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let u = Uniform::new(-1.0, 1.0).unwrap();
        for _ in 0..50 {
            let a = DMatrix::from_fn(3, 3, |_, _| u.sample(&mut rng));
            let h = DMatrix::from_fn(2, 3, |_, _| u.sample(&mut rng));
            let q = DMatrix::identity(3, 3) * 0.1;
            let model = StateSpaceModel::new(a, q, h).unwrap();
            let b = DMatrix::from_fn(3, 3, |_, _| u.sample(&mut rng));
            let s = state(DVector::from_fn(3, |_, _| u.sample(&mut rng)), &b * b.transpose() + DMatrix::identity(3, 3));
            let r = DMatrix::from_fn(2, 2, |_, _| u.sample(&mut rng));
            let sigma = SpdMatrix::new(&r * r.transpose() + DMatrix::identity(2, 2) * 0.5).unwrap();
            let y = DVector::from_fn(2, |_, _| u.sample(&mut rng));
            let pred = kf_predict(&model, &s).unwrap();
            let sym = kf_update_with(&model, &pred, &y, &sigma, CovarianceForm::Symmetric).unwrap();
            let jos = kf_update_with(&model, &pred, &y, &sigma, CovarianceForm::Joseph).unwrap();
            assert!((sym.cov.matrix() - jos.cov.matrix()).norm() < 1e-9);
            assert!((&sym.mean - &jos.mean).norm() < 1e-12);
        }
    }

    #[test]
    fn observability_gramian_closed_forms() {
        let model = StateSpaceModel::random_walk(2, 0.0).unwrap();
        let sigma2 = 0.25;
        let sigmas = vec![SpdMatrix::scaled_identity(2, sigma2).unwrap(); 4];
        let g = observability_gramian(&model, &sigmas).unwrap();
        assert!((g - DMatrix::identity(2, 2) * (4.0 / sigma2)).norm() < 1e-12);

        let blind = StateSpaceModel::scalar(2, 1.0, 0.0, 0.0).unwrap();
        let g = observability_gramian(&blind, &sigmas).unwrap();
        assert_eq!(g, DMatrix::zeros(2, 2));

        // Alternating σ ∈ {1, 2}: entries Σ 1/σ_k².
        let sigmas: Vec<_> = (0..5)
            .map(|i| SpdMatrix::scaled_identity(2, if i % 2 == 0 { 1.0 } else { 4.0 }).unwrap())
            .collect();
        let expected: f64 = (0..5).map(|i| if i % 2 == 0 { 1.0 } else { 0.25 }).sum();
        let g = observability_gramian(&model, &sigmas).unwrap();
        assert!((g - DMatrix::identity(2, 2) * expected).norm() < 1e-12);
    }

    #[test]
    fn observability_requires_invertible_dynamics() {
        let model = StateSpaceModel::scalar(2, 0.0, 1.0, 1.0).unwrap();
        let sigmas = vec![SpdMatrix::identity(2)];
        assert!(matches!(
            observability_gramian(&model, &sigmas),
            Err(Error::Singular(_))
        ));
    }

    #[test]
    fn controllability_gramian_closed_forms() {
        let model = StateSpaceModel::random_walk(3, 0.5).unwrap();
        let g = controllability_gramian(&model, 4).unwrap();
        assert!((g - DMatrix::identity(3, 3) * 2.0).norm() < 1e-12);

        let frozen = StateSpaceModel::random_walk(3, 0.0).unwrap();
        assert_eq!(controllability_gramian(&frozen, 4).unwrap(), DMatrix::zeros(3, 3));

        let doubling = StateSpaceModel::scalar(1, 2.0, 1.0, 1.0).unwrap();
        assert_eq!(controllability_gramian(&doubling, 2).unwrap()[(0, 0)], 5.0);
    }

    #[test]
    fn uniform_conditions_verdicts() {
        let rw = StateSpaceModel::random_walk(2, 1e-9).unwrap();
        let report = check_uniform_conditions(&rw, 1e-12, 1e12, 1, 3);
        assert!(report.pass(), "{report:?}");
        assert!(report.observability.beta1 > 0.0);

        let blind = StateSpaceModel::scalar(2, 1.0, 1e-9, 0.0).unwrap();
        let report = check_uniform_conditions(&blind, 1e-12, 1e12, 1, 3);
        assert!(!report.observability.pass);
        assert_eq!(report.observability.beta1, 0.0);

        let frozen = StateSpaceModel::random_walk(2, 0.0).unwrap();
        let report = check_uniform_conditions(&frozen, 1e-12, 1e12, 1, 3);
        assert!(report.observability.pass);
        assert!(!report.controllability.pass);
    }

    #[test]
    fn bounded_noise_keeps_random_walk_filter_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let model = StateSpaceModel::random_walk(2, 1e-3).unwrap();
        let u = Uniform::new(-3.0, 3.0).unwrap();
        let level = Uniform::new(0.1f64.ln(), 10.0f64.ln()).unwrap();
        let mut s = state(DVector::zeros(2), DMatrix::identity(2, 2));
        let mut max_mean: f64 = 0.0;
        let mut max_cov: f64 = 0.0;
        for _ in 0..100 {
            let y = DVector::from_fn(2, |_, _| u.sample(&mut rng));
            let sigma = SpdMatrix::scaled_identity(2, level.sample(&mut rng).exp()).unwrap();
            s = kf_update(&model, &kf_predict(&model, &s).unwrap(), &y, &sigma).unwrap();
            max_mean = max_mean.max(s.mean.norm());
            max_cov = max_cov.max(s.cov.matrix().norm());
        }
        // Measurements live in [-3, 3]² and the prior covariance is I.
        assert!(max_mean <= 3.0 * 2f64.sqrt() + 1e-9);
        assert!(max_cov <= 2f64.sqrt() + 1e-9);
    }

    proptest! {
        #[test]
        fn update_never_increases_covariance(
            b in proptest::collection::vec(-2.0..2.0f64, 9),
            r in proptest::collection::vec(-2.0..2.0f64, 9),
            y in proptest::collection::vec(-5.0..5.0f64, 3),
        ) {
            let b = DMatrix::from_vec(3, 3, b);
            let r = DMatrix::from_vec(3, 3, r);
            let model = StateSpaceModel::random_walk(3, 0.0).unwrap();
            let pred = state(DVector::zeros(3), &b * b.transpose() + DMatrix::identity(3, 3) * 0.1);
            let sigma = SpdMatrix::new(&r * r.transpose() + DMatrix::identity(3, 3) * 0.1).unwrap();
            let post = kf_update(&model, &pred, &DVector::from_vec(y), &sigma).unwrap();
            let diff = pred.cov.matrix() - post.cov.matrix() + DMatrix::identity(3, 3) * 1e-12;
            prop_assert!(SpdMatrix::new(diff).is_ok());
        }
    }
}
