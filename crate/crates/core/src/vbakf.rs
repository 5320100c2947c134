//! Variational Bayesian adaptive Kalman filter.
//!
//! The filter tracks a Gaussian belief over the state and an inverse-Wishart
//! belief over the measurement-noise covariance. The noise belief is kept in
//! mean form: `sigma` is the inverse-Wishart mean `V / (ν − d − 1)`, so the
//! scale matrix `V` never appears explicitly.
//!
//! Each measurement update runs a short fixed-point iteration that alternates
//! a Kalman update under the current noise estimate with a refresh of the
//! noise estimate from the new state posterior.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gaussian::SpdMatrix;
use crate::kalman::{kf_predict, CovarianceForm, GaussianState, PriorInnovation, StateSpaceModel};

/// Inverse-Wishart degrees of freedom, stored as `base + increments` so that
/// the unit increments of a non-forgetting filter accumulate exactly.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dof {
    base: f64,
    increments: u64,
}

impl Dof {
    pub fn new(nu: f64) -> Self {
        Self {
            base: nu,
            increments: 0,
        }
    }

    pub fn value(&self) -> f64 {
        self.base + self.increments as f64
    }

    /// Number of unit increments since the last forgetting step.
    pub fn increments(&self) -> u64 {
        self.increments
    }

    /// `ν − d − 1`, the denominator of the inverse-Wishart mean.
    pub fn excess(&self, d: usize) -> f64 {
        (self.base - d as f64 - 1.0) + self.increments as f64
    }

    fn incremented(self) -> Self {
        Self {
            base: self.base,
            increments: self.increments + 1,
        }
    }

    /// `ρ(ν − d − 1) + d + 1`; exact identity for `ρ = 1`.
    fn forget(self, rho: f64, d: usize) -> Self {
        if rho == 1.0 {
            self
        } else {
            Self::new(rho * self.excess(d) + d as f64 + 1.0)
        }
    }
}

/// Inverse-Wishart belief over the measurement-noise covariance.
#[derive(Clone, Debug)]
pub struct NoiseBelief {
    pub nu: Dof,
    /// Mean of the inverse-Wishart distribution.
    pub sigma: SpdMatrix,
}

impl NoiseBelief {
    pub fn new(nu: f64, sigma: SpdMatrix) -> Result<Self> {
        let d = sigma.dim();
        if !(nu - d as f64 - 1.0 > 0.0) {
            return Err(Error::invalid(
                "nu",
                format!("must exceed d + 1 = {} for the mean to exist, got {nu}", d + 1),
            ));
        }
        Ok(Self {
            nu: Dof::new(nu),
            sigma,
        })
    }

    pub fn dim(&self) -> usize {
        self.sigma.dim()
    }

    /// `ν − d − 1`
    pub fn excess(&self) -> f64 {
        self.nu.excess(self.dim())
    }

    /// Scale matrix `V = (ν − d − 1) Σ`.
    pub fn scale_matrix(&self) -> DMatrix<f64> {
        self.sigma.matrix() * self.excess()
    }
}

#[derive(Clone, Debug)]
pub struct VbakfState {
    pub gauss: GaussianState,
    pub noise: NoiseBelief,
}

impl VbakfState {
    pub fn new(gauss: GaussianState, noise: NoiseBelief) -> Self {
        Self { gauss, noise }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VbakfConfig {
    /// Forgetting factor `ρ ∈ (0, 1]` on the degrees of freedom.
    pub rho: f64,
    /// Covariance dynamics `Σ⁻ = B Σ Bᵀ`; `None` means `B = I`.
    pub b: Option<DMatrix<f64>>,
    /// Maximum number of fixed-point passes per update.
    pub max_iters: usize,
    /// Early exit once `‖Σ^(j+1) − Σ^(j)‖_F < fp_tol`.
    pub fp_tol: f64,
}

impl Default for VbakfConfig {
    fn default() -> Self {
        Self {
            rho: 1.0,
            b: None,
            max_iters: 5,
            fp_tol: 1e-10,
        }
    }
}

impl VbakfConfig {
    pub fn validate(&self, d: usize) -> Result<()> {
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(Error::invalid("rho", format!("must lie in (0, 1], got {}", self.rho)));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters", "must be at least 1"));
        }
        if !(self.fp_tol >= 0.0) {
            return Err(Error::invalid("fp_tol", "must be non-negative"));
        }
        if let Some(b) = &self.b {
            Error::check_dim("covariance dynamics rows", d, b.nrows())?;
            Error::check_dim("covariance dynamics columns", d, b.ncols())?;
            let det = b.determinant().abs();
            if !(det > 0.0 && det <= 1.0) {
                return Err(Error::invalid("b", format!("|det B| must lie in (0, 1], got {det}")));
            }
        }
        Ok(())
    }

    /// `ρ = 1` and `B = I`: the only configuration with diminishing
    /// adaptation.
    pub fn is_non_forgetting(&self) -> bool {
        self.rho == 1.0
            && self
                .b
                .as_ref()
                .is_none_or(|b| *b == DMatrix::identity(b.nrows(), b.ncols()))
    }
}

/// Convergence record of one measurement update.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FixedPointInfo {
    /// Fixed-point passes performed.
    pub iterations: usize,
    /// `‖Σ^(j+1) − Σ^(j)‖_F` of each pass.
    pub residuals: Vec<f64>,
}

impl FixedPointInfo {
    /// Residual of the final pass.
    pub fn residual(&self) -> f64 {
        self.residuals.last().copied().unwrap_or(0.0)
    }

    /// Residuals never grow after the first pass (up to rounding at `scale`).
    pub fn is_contracting(&self, scale: f64) -> bool {
        let slack = 1e-14 * scale.max(1.0);
        self.residuals
            .windows(2)
            .skip(1)
            .all(|w| w[1] <= w[0] + slack)
    }
}

pub fn vbakf_predict(cfg: &VbakfConfig, state: &VbakfState, model: &StateSpaceModel) -> Result<VbakfState> {
    let d = state.noise.dim();
    Error::check_dim("measurement noise", model.measurement_dim(), d)?;
    let gauss = kf_predict(model, &state.gauss)?;
    let nu = state.noise.nu.forget(cfg.rho, d);
    let sigma = match &cfg.b {
        None => state.noise.sigma.clone(),
        Some(b) => SpdMatrix::new(b * state.noise.sigma.matrix() * b.transpose())?,
    };
    Ok(VbakfState {
        gauss,
        noise: NoiseBelief { nu, sigma },
    })
}

/// Fixed-point measurement update.
///
/// `ν_k = ν⁻ + 1`, then for `j = 1..N` a Kalman update with `Σ^(j)` is
/// followed by
/// `Σ^(j+1) = (e⁻/e) Σ⁻ + (1/e) (H P^(j+1) Hᵀ + r rᵀ)`, with
/// `r = y − H m^(j+1)`, `e⁻ = ν⁻ − d − 1` and `e = ν_k − d − 1`.
/// The state and noise estimates of the last pass are returned.
pub fn vbakf_update(
    cfg: &VbakfConfig,
    predicted: &VbakfState,
    model: &StateSpaceModel,
    y: &DVector<f64>,
) -> Result<(VbakfState, FixedPointInfo)> {
    let d = predicted.noise.dim();
    Error::check_dim("measurement", d, y.len())?;
    Error::check_dim("measurement noise", model.measurement_dim(), d)?;
    let prior_excess = predicted.noise.excess();
    if !(prior_excess > 0.0) {
        return Err(Error::invalid("nu", "predicted degrees of freedom must exceed d + 1"));
    }
    let nu = predicted.noise.nu.incremented();
    let excess = nu.excess(d);
    let w_prior = prior_excess / excess;
    let w_new = 1.0 / excess;

    let prior = PriorInnovation::new(model, &predicted.gauss, y)?;
    let sigma_prior = predicted.noise.sigma.matrix();
    let weighted_prior = sigma_prior * w_prior;
    let h = model.h();

    let mut sigma = sigma_prior.clone();
    let mut info = FixedPointInfo::default();
    let mut mean;
    let mut cov;
    loop {
        (mean, cov) = prior.update(&sigma, CovarianceForm::Symmetric)?;
        let r = y - h * &mean;
        let next = &weighted_prior + (h * &cov * h.transpose() + &r * r.transpose()) * w_new;
        let residual = (&next - &sigma).norm();
        sigma = next;
        info.iterations += 1;
        info.residuals.push(residual);
        if !residual.is_finite() {
            return Err(Error::NonFinite("noise covariance fixed point"));
        }
        if info.iterations >= cfg.max_iters || residual < cfg.fp_tol {
            break;
        }
    }

    let cov = SpdMatrix::new(cov).map_err(|_| Error::NotPositiveDefinite("state covariance"))?;
    let sigma = SpdMatrix::new(sigma).map_err(|_| Error::NotPositiveDefinite("noise covariance"))?;
    Ok((
        VbakfState {
            gauss: GaussianState { mean, cov },
            noise: NoiseBelief { nu, sigma },
        },
        info,
    ))
}

/// Measurement update with the noise covariance held at `sigma`: a single
/// Kalman update refreshes `(m, P)`, `ν` is still incremented, and the noise
/// estimate is not recomputed.
pub fn vbakf_update_fixed_noise(
    predicted: &VbakfState,
    model: &StateSpaceModel,
    y: &DVector<f64>,
    sigma: &SpdMatrix,
) -> Result<VbakfState> {
    let gauss = crate::kalman::kf_update(model, &predicted.gauss, y, sigma)?;
    Ok(VbakfState {
        gauss,
        noise: NoiseBelief {
            nu: predicted.noise.nu.incremented(),
            sigma: sigma.clone(),
        },
    })
}

/// Prediction followed by the fixed-point update.
pub fn vbakf_step(
    cfg: &VbakfConfig,
    state: &VbakfState,
    model: &StateSpaceModel,
    y: &DVector<f64>,
) -> Result<(VbakfState, FixedPointInfo)> {
    let predicted = vbakf_predict(cfg, state, model)?;
    vbakf_update(cfg, &predicted, model, y)
}
