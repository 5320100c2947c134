//! Random-walk Metropolis with four adaptation schemes: none, Haario-style
//! adaptive Metropolis, the Roberts–Rosenthal mixture proposal and VBAM,
//! where the proposal covariance is the noise estimate of a VB-AKF fed with
//! the chain itself. Each scheme can additionally tune its scale by
//! Robbins–Monro.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::diagnostics::StreamingMoments;
use crate::error::{Error, Result};
use crate::gaussian::{project_to_band, sample_mvn, sample_student_t, SpdMatrix};
use crate::kalman::{GaussianState, StateSpaceModel};
use crate::targets::TargetDensity;
use crate::vbakf::{
    vbakf_predict, vbakf_update, vbakf_update_fixed_noise, FixedPointInfo, NoiseBelief, VbakfConfig, VbakfState,
};

/// The optimal random-walk scale `2.38² / d`.
pub fn optimal_scale(d: usize) -> f64 {
    2.38 * 2.38 / d as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Scheme {
    /// Fixed proposal covariance.
    None,
    /// Empirical covariance of the whole history plus `ε I`.
    AmHaario,
    /// Mixture of the empirical-covariance proposal and a small fixed kernel.
    AmRr,
    Vbam,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::None => "none",
            Scheme::AmHaario => "am",
            Scheme::AmRr => "rr",
            Scheme::Vbam => "vbam",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(Scheme::None),
            "am" | "am_haario" | "haario" => Ok(Scheme::AmHaario),
            "rr" | "am_rr" => Ok(Scheme::AmRr),
            "vbam" => Ok(Scheme::Vbam),
            other => Err(Error::invalid("scheme", format!("unknown scheme `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ProposalFamily {
    Gaussian,
    StudentT { dof: f64 },
}

impl ProposalFamily {
    pub const DEFAULT_T_DOF: f64 = 4.0;
}

/// Step-size sequence `γ_k = k₀ / max{k₀, k^τ}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Gain {
    pub k0: f64,
    pub tau: f64,
}

impl Default for Gain {
    fn default() -> Self {
        Self { k0: 1000.0, tau: 0.99 }
    }
}

impl Gain {
    pub fn gamma(&self, k: u64) -> f64 {
        self.k0 / self.k0.max((k as f64).powf(self.tau))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k0 > 1.0) {
            return Err(Error::invalid("k0", "must exceed 1"));
        }
        if !(self.tau > 0.5 && self.tau <= 1.0) {
            return Err(Error::invalid("tau", "must lie in (1/2, 1]"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdaptationConfig {
    pub scheme: Scheme,
    /// Regularizer added to empirical covariances.
    pub epsilon: f64,
    /// Weight of the fixed kernel in the mixture proposal.
    pub beta: f64,
    pub mu1: f64,
    pub mu2: f64,
    /// λ is kept in `[δ_λ, 1/δ_λ]`.
    pub delta_lambda: f64,
    pub alpha_bar: f64,
    pub gain: Gain,
    pub rm_enabled: bool,
    pub proposal_family: ProposalFamily,
}

impl Default for AdaptationConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::Vbam,
            epsilon: 1e-4,
            beta: 0.05,
            mu1: 1e-12,
            mu2: 1e12,
            delta_lambda: 1e-6,
            alpha_bar: 0.234,
            gain: Gain::default(),
            rm_enabled: false,
            proposal_family: ProposalFamily::Gaussian,
        }
    }
}

impl AdaptationConfig {
    pub fn with_scheme(scheme: Scheme) -> Self {
        Self {
            scheme,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0) {
            return Err(Error::invalid("epsilon", "must be non-negative"));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::invalid("beta", "must lie in [0, 1]"));
        }
        if !(self.mu1 > 0.0 && self.mu1 <= self.mu2) {
            return Err(Error::invalid("mu1", "need 0 < mu1 <= mu2"));
        }
        if !(self.delta_lambda > 0.0 && self.delta_lambda <= 1.0) {
            return Err(Error::invalid("delta_lambda", "must lie in (0, 1]"));
        }
        if !(self.alpha_bar > 0.0 && self.alpha_bar < 1.0) {
            return Err(Error::invalid("alpha_bar", "must lie in (0, 1)"));
        }
        if let ProposalFamily::StudentT { dof } = self.proposal_family {
            if !(dof > 0.0) {
                return Err(Error::invalid("t_dof", "must be positive"));
            }
        }
        self.gain.validate()
    }

    pub fn clamp_lambda(&self, lambda: f64) -> f64 {
        lambda.clamp(self.delta_lambda, 1.0 / self.delta_lambda)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AcceptanceDecision {
    pub alpha: f64,
    pub accepted: bool,
    pub u: f64,
}

/// Metropolis acceptance probability `min{1, π(θ*)/π(θ)}` from log-densities.
pub fn acceptance_probability(log_current: f64, log_candidate: f64) -> f64 {
    if log_candidate == f64::NEG_INFINITY || log_candidate.is_nan() {
        0.0
    } else if log_current == f64::NEG_INFINITY {
        1.0
    } else {
        (log_candidate - log_current).min(0.0).exp()
    }
}

/// Accept/reject with a given uniform `u`: accepted iff `u < α`.
pub fn decide(u: f64, log_current: f64, log_candidate: f64) -> AcceptanceDecision {
    let alpha = acceptance_probability(log_current, log_candidate);
    AcceptanceDecision {
        alpha,
        accepted: u < alpha,
        u,
    }
}

/// Random-walk candidate `θ + √λ · ξ` with `ξ ~ N(0, Σ)` or the
/// corresponding multivariate t.
pub fn propose<R: Rng + ?Sized>(
    rng: &mut R,
    theta: &DVector<f64>,
    cov: &SpdMatrix,
    lambda: f64,
    family: ProposalFamily,
) -> Result<DVector<f64>> {
    match family {
        ProposalFamily::Gaussian => sample_mvn(rng, theta, cov, lambda),
        ProposalFamily::StudentT { dof } => sample_student_t(rng, theta, cov, lambda, dof),
    }
}

/// Initial values of the VB-AKF embedded in a VBAM chain.
#[derive(Clone, Debug)]
pub struct FilterInit {
    pub model: StateSpaceModel,
    pub m0: DVector<f64>,
    pub p0: SpdMatrix,
    pub nu0: f64,
}

impl FilterInit {
    /// `A = H = I`, `Q = q I`, `m₀ = 0`, `P₀ = I`, `ν₀ = d + 2`.
    pub fn random_walk(d: usize, q: f64) -> Result<Self> {
        Ok(Self {
            model: StateSpaceModel::random_walk(d, q)?,
            m0: DVector::zeros(d),
            p0: SpdMatrix::identity(d),
            nu0: d as f64 + 2.0,
        })
    }
}

#[derive(Clone, Debug)]
pub struct ChainState {
    pub theta: DVector<f64>,
    /// Always equal to the target log-density at `theta`.
    pub log_target: f64,
    pub lambda: f64,
    /// Proposal covariance for the next step.
    pub sigma: SpdMatrix,
    pub filter: Option<VbakfState>,
    pub moments: Option<StreamingMoments>,
    /// Number of completed steps.
    pub step: u64,
}

impl ChainState {
    pub fn dim(&self) -> usize {
        self.theta.len()
    }
}

/// Everything needed to start a chain.
#[derive(Clone, Debug)]
pub struct ChainInit {
    pub theta0: DVector<f64>,
    pub sigma0: SpdMatrix,
    /// Defaults to `2.38² / d`.
    pub lambda0: Option<f64>,
    /// Required for VBAM.
    pub filter: Option<FilterInit>,
}

impl ChainInit {
    pub fn new(theta0: DVector<f64>, sigma0: SpdMatrix) -> Self {
        Self {
            theta0,
            sigma0,
            lambda0: None,
            filter: None,
        }
    }

    pub fn with_filter(mut self, filter: FilterInit) -> Self {
        self.filter = Some(filter);
        self
    }

    pub fn with_lambda(mut self, lambda0: f64) -> Self {
        self.lambda0 = Some(lambda0);
        self
    }
}

/// Pushes `θ_k` into the streaming moments and returns `cov(θ₀..θ_k) + εI`,
/// or `None` while fewer than two samples are available or the regularized
/// covariance is degenerate.
pub fn am_covariance_update(moments: &mut StreamingMoments, theta_k: &[f64], epsilon: f64) -> Option<SpdMatrix> {
    moments.push(theta_k);
    moments.regularized_covariance(epsilon).ok()
}

/// Which component of the mixture proposal produced a candidate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RrBranch {
    Fixed,
    Adaptive,
}

/// Mixture proposal at step `k`: the fixed kernel `N(θ, (0.1²/d) I)` while
/// `k ≤ 2d` (or no empirical covariance exists), afterwards
/// `(1−β) N(θ, λ Σ_k) + β N(θ, (0.1²/d) I)`.
pub fn rr_propose<R: Rng + ?Sized>(
    rng: &mut R,
    theta: &DVector<f64>,
    k: u64,
    empirical: Option<&SpdMatrix>,
    lambda: f64,
    beta: f64,
) -> Result<(DVector<f64>, RrBranch)> {
    let d = theta.len();
    let fixed = |rng: &mut R| {
        let z = crate::gaussian::standard_normal_vector(rng, d);
        theta + z * (0.1 / (d as f64).sqrt())
    };
    let empirical = match empirical {
        Some(e) if k > 2 * d as u64 => e,
        _ => return Ok((fixed(rng), RrBranch::Fixed)),
    };
    if rng.random::<f64>() < beta {
        Ok((fixed(rng), RrBranch::Fixed))
    } else {
        Ok((sample_mvn(rng, theta, empirical, lambda)?, RrBranch::Adaptive))
    }
}

/// `log λ_k = log λ_{k−1} + γ_k (α_k − ᾱ)`, then truncation to
/// `[δ_λ, 1/δ_λ]`.
pub fn rm_scale_update(lambda_prev: f64, alpha_k: f64, k: u64, gain: &Gain, alpha_bar: f64, delta_lambda: f64) -> f64 {
    let log = lambda_prev.ln() + gain.gamma(k) * (alpha_k - alpha_bar);
    log.exp().clamp(delta_lambda, 1.0 / delta_lambda)
}

/// Per-step side information beyond the accept/reject decision.
#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub decision: AcceptanceDecision,
    /// Fixed-point record of the VB-AKF update (VBAM only).
    pub fixed_point: Option<FixedPointInfo>,
    /// The filter's noise estimate left the band and was discarded.
    pub band_violation: bool,
    /// `‖Σ_k − Σ_{k−1}‖_F`.
    pub sigma_change: f64,
    /// `‖λ_kΣ_k − λ_{k−1}Σ_{k−1}‖_F`.
    pub kernel_change: f64,
    /// `ν_k − d − 1` after the step (VBAM only).
    pub nu_excess: Option<f64>,
}

/// Result of the VBAM covariance adaptation after a decision.
#[derive(Clone, Debug, PartialEq)]
pub struct VbamAdaptation {
    pub fixed_point: FixedPointInfo,
    pub band_violation: bool,
}

/// Feeds `y_k = θ_k` (accepted or repeated) to the filter and replaces
/// `Σ_k` by its noise estimate. When the estimate leaves
/// `μ₁I < Σ < μ₂I`, `Σ_k = Σ_{k−1}` is kept and `(m_k, P_k)` are refreshed
/// by a single update with that covariance.
pub fn vbam_adapt(
    state: &mut ChainState,
    model: &StateSpaceModel,
    vcfg: &VbakfConfig,
    mu1: f64,
    mu2: f64,
) -> Result<VbamAdaptation> {
    let filter = state
        .filter
        .as_ref()
        .ok_or(Error::invalid("filter", "VBAM chain has no filter state"))?;
    let predicted = vbakf_predict(vcfg, filter, model)?;
    let (updated, fixed_point) = vbakf_update(vcfg, &predicted, model, &state.theta)?;
    let band_violation = !project_to_band(&updated.noise.sigma, mu1, mu2);
    let updated = if band_violation {
        vbakf_update_fixed_noise(&predicted, model, &state.theta, &state.sigma)?
    } else {
        updated
    };
    state.sigma = updated.noise.sigma.clone();
    state.filter = Some(updated);
    Ok(VbamAdaptation {
        fixed_point,
        band_violation,
    })
}

/// One Metropolis move using `λ Σ` as the proposal scale; updates `theta`
/// and `log_target` in place.
pub fn metropolis_step<R: Rng + ?Sized, T: TargetDensity + ?Sized>(
    rng: &mut R,
    state: &mut ChainState,
    target: &T,
    proposal_cov: &SpdMatrix,
    lambda: f64,
    family: ProposalFamily,
) -> Result<AcceptanceDecision> {
    let candidate = propose(rng, &state.theta, proposal_cov, lambda, family)?;
    Ok(metropolis_accept(rng, state, target, candidate))
}

/// Accept/reject an already drawn candidate.
pub fn metropolis_accept<R: Rng + ?Sized, T: TargetDensity + ?Sized>(
    rng: &mut R,
    state: &mut ChainState,
    target: &T,
    candidate: DVector<f64>,
) -> AcceptanceDecision {
    let log_candidate = target.log_density(candidate.as_slice());
    let decision = decide(rng.random::<f64>(), state.log_target, log_candidate);
    if decision.accepted {
        state.theta = candidate;
        state.log_target = log_candidate;
    }
    decision
}

/// An adaptive random-walk Metropolis chain on a fixed target.
#[derive(Clone, Debug)]
pub struct Sampler<'a, T: ?Sized> {
    target: &'a T,
    cfg: AdaptationConfig,
    vbakf: VbakfConfig,
    model: Option<StateSpaceModel>,
    state: ChainState,
}

impl<'a, T: TargetDensity + ?Sized> Sampler<'a, T> {
    pub fn new(target: &'a T, cfg: AdaptationConfig, init: ChainInit) -> Result<Self> {
        cfg.validate()?;
        let d = target.dim();
        Error::check_dim("initial sample", d, init.theta0.len())?;
        Error::check_dim("initial covariance", d, init.sigma0.dim())?;
        let log_target = target.log_density(init.theta0.as_slice());
        if log_target == f64::NEG_INFINITY {
            return Err(Error::invalid("theta0", "initial sample is outside the target support"));
        }
        let lambda = init.lambda0.unwrap_or_else(|| optimal_scale(d));
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::invalid("lambda0", "must be positive"));
        }
        let lambda = cfg.clamp_lambda(lambda);

        let vbakf = VbakfConfig::default();
        let (filter, model) = match (cfg.scheme, init.filter) {
            (Scheme::Vbam, Some(f)) => {
                Error::check_dim("filter model", d, f.model.state_dim())?;
                Error::check_dim("filter model", d, f.model.measurement_dim())?;
                vbakf.validate(d)?;
                let gauss = GaussianState::new(f.m0, f.p0)?;
                let noise = NoiseBelief::new(f.nu0, init.sigma0.clone())?;
                (Some(VbakfState::new(gauss, noise)), Some(f.model))
            }
            (Scheme::Vbam, None) => return Err(Error::invalid("filter", "VBAM needs a state-space model")),
            _ => (None, None),
        };
        if cfg.scheme == Scheme::Vbam && !project_to_band(&init.sigma0, cfg.mu1, cfg.mu2) {
            return Err(Error::invalid("sigma0", "initial covariance is outside the band [mu1, mu2]"));
        }
        let mut moments = match cfg.scheme {
            Scheme::AmHaario | Scheme::AmRr => Some(StreamingMoments::new(d)),
            _ => None,
        };
        if let Some(m) = moments.as_mut() {
            m.push(init.theta0.as_slice());
        }
        Ok(Self {
            target,
            cfg,
            vbakf,
            model,
            state: ChainState {
                theta: init.theta0,
                log_target,
                lambda,
                sigma: init.sigma0,
                filter,
                moments,
                step: 0,
            },
        })
    }

    pub fn state(&self) -> &ChainState {
        &self.state
    }

    pub fn config(&self) -> &AdaptationConfig {
        &self.cfg
    }

    pub fn target(&self) -> &'a T {
        self.target
    }

    pub fn dim(&self) -> usize {
        self.state.dim()
    }

    /// Covariance actually used by the adaptive component of the next
    /// proposal, scaled by λ.
    pub fn proposal_covariance(&self) -> DMatrix<f64> {
        self.state.sigma.matrix() * self.state.lambda
    }

    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<StepOutcome> {
        let k = self.state.step + 1;
        let d = self.dim();
        let prev_sigma = self.state.sigma.matrix().clone();
        let prev_lambda = self.state.lambda;
        let family = self.cfg.proposal_family;

        let decision = match self.cfg.scheme {
            Scheme::None | Scheme::AmHaario | Scheme::Vbam => {
                let candidate = propose(rng, &self.state.theta, &self.state.sigma, self.state.lambda, family)?;
                metropolis_accept(rng, &mut self.state, self.target, candidate)
            }
            Scheme::AmRr => {
                let empirical = (self.state.moments.as_ref().is_some_and(|m| m.count() >= 2)).then_some(&self.state.sigma);
                let (candidate, _) =
                    rr_propose(rng, &self.state.theta, k, empirical, self.state.lambda, self.cfg.beta)?;
                metropolis_accept(rng, &mut self.state, self.target, candidate)
            }
        };

        let mut fixed_point = None;
        let mut band_violation = false;
        match self.cfg.scheme {
            Scheme::None => {}
            Scheme::AmHaario | Scheme::AmRr => {
                let moments = self.state.moments.as_mut().expect("AM chain keeps moments");
                if let Some(sigma) = am_covariance_update(moments, self.state.theta.as_slice(), self.cfg.epsilon) {
                    self.state.sigma = sigma;
                }
            }
            Scheme::Vbam => {
                let model = self.model.as_ref().expect("VBAM chain has a model");
                let adapt = vbam_adapt(&mut self.state, model, &self.vbakf, self.cfg.mu1, self.cfg.mu2)?;
                band_violation = adapt.band_violation;
                fixed_point = Some(adapt.fixed_point);
            }
        }

        if self.cfg.rm_enabled {
            self.state.lambda = rm_scale_update(
                self.state.lambda,
                decision.alpha,
                k,
                &self.cfg.gain,
                self.cfg.alpha_bar,
                self.cfg.delta_lambda,
            );
        }
        self.state.step = k;

        let sigma = self.state.sigma.matrix();
        let sigma_change = (sigma - &prev_sigma).norm();
        let kernel_change = (sigma * self.state.lambda - &prev_sigma * prev_lambda).norm();
        let nu_excess = self.state.filter.as_ref().map(|f| f.noise.nu.excess(d));
        Ok(StepOutcome {
            decision,
            fixed_point,
            band_violation,
            sigma_change,
            kernel_change,
            nu_excess,
        })
    }
}

/// What a sink sees after every step.
#[derive(Clone, Copy, Debug)]
pub struct StepRecord<'s> {
    pub step: u64,
    pub theta: &'s [f64],
    pub accepted: bool,
    pub alpha: f64,
    pub lambda: f64,
    pub sigma: &'s SpdMatrix,
    pub outcome: &'s StepOutcome,
}

/// Consumer of the sample stream.
pub trait SampleSink {
    fn record(&mut self, rec: &StepRecord<'_>) -> Result<()>;

    fn finish(&mut self) -> Result<()> {
        Ok(())
    }
}

/// Discards everything.
#[derive(Clone, Copy, Debug, Default)]
pub struct NullSink;

impl SampleSink for NullSink {
    fn record(&mut self, _rec: &StepRecord<'_>) -> Result<()> {
        Ok(())
    }
}

/// Keeps all samples in memory.
#[derive(Clone, Debug, Default)]
pub struct MemorySink {
    pub samples: Vec<Vec<f64>>,
    pub accepted: Vec<bool>,
}

impl SampleSink for MemorySink {
    fn record(&mut self, rec: &StepRecord<'_>) -> Result<()> {
        self.samples.push(rec.theta.to_vec());
        self.accepted.push(rec.accepted);
        Ok(())
    }
}

/// Adapts a closure into a sink.
pub struct FnSink<F>(pub F);

impl<F: FnMut(&StepRecord<'_>) -> Result<()>> SampleSink for FnSink<F> {
    fn record(&mut self, rec: &StepRecord<'_>) -> Result<()> {
        (self.0)(rec)
    }
}

impl<S: SampleSink + ?Sized> SampleSink for &mut S {
    fn record(&mut self, rec: &StepRecord<'_>) -> Result<()> {
        (**self).record(rec)
    }

    fn finish(&mut self) -> Result<()> {
        (**self).finish()
    }
}

/// Aggregate statistics of a run.
#[derive(Clone, Debug)]
pub struct ChainSummary {
    pub scheme: Scheme,
    pub n_steps: u64,
    pub accepted: u64,
    pub final_lambda: f64,
    pub final_sigma: SpdMatrix,
    /// Mean and covariance of the emitted samples.
    pub moments: StreamingMoments,
    pub band_violations: u64,
    /// Steps whose fixed-point residual was below `1e-8`.
    pub fixed_point_converged: u64,
    pub max_fixed_point_residual: f64,
    /// `max (ν_k − d − 1)‖Σ_k − Σ_{k−1}‖_F` in each tenth of the run.
    pub adaptation_decile_max: Vec<f64>,
    /// `max k ‖λ_kΣ_k − λ_{k−1}Σ_{k−1}‖_F` in each tenth of the run.
    pub kernel_decile_max: Vec<f64>,
}

impl ChainSummary {
    pub fn acceptance_rate(&self) -> f64 {
        self.accepted as f64 / self.n_steps as f64
    }

    pub fn fixed_point_fraction(&self) -> f64 {
        self.fixed_point_converged as f64 / self.n_steps as f64
    }
}

pub const FIXED_POINT_THRESHOLD: f64 = 1e-8;

/// Runs `n_steps` steps, streaming every sample to `sink`.
pub fn run_chain<R, T, S>(rng: &mut R, sampler: &mut Sampler<'_, T>, n_steps: u64, sink: &mut S) -> Result<ChainSummary>
where
    R: Rng + ?Sized,
    T: TargetDensity + ?Sized,
    S: SampleSink + ?Sized,
{
    if n_steps == 0 {
        return Err(Error::invalid("n_steps", "must be at least 1"));
    }
    let mut accepted = 0;
    let mut moments = StreamingMoments::new(sampler.dim());
    let mut band_violations = 0;
    let mut converged = 0;
    let mut max_residual: f64 = 0.0;
    let mut diminishing = vec![0.0f64; 10];
    let mut kernel = vec![0.0f64; 10];
    for i in 0..n_steps {
        let outcome = sampler.step(rng)?;
        let state = sampler.state();
        moments.push(state.theta.as_slice());
        accepted += outcome.decision.accepted as u64;
        band_violations += outcome.band_violation as u64;
        match &outcome.fixed_point {
            Some(fp) => {
                let r = fp.residual();
                max_residual = max_residual.max(r);
                converged += (r < FIXED_POINT_THRESHOLD) as u64;
            }
            None => converged += 1,
        }
        let decile = (i * 10 / n_steps) as usize;
        if let Some(e) = outcome.nu_excess {
            diminishing[decile] = diminishing[decile].max(e * outcome.sigma_change);
        }
        kernel[decile] = kernel[decile].max(state.step as f64 * outcome.kernel_change);
        sink.record(&StepRecord {
            step: state.step,
            theta: state.theta.as_slice(),
            accepted: outcome.decision.accepted,
            alpha: outcome.decision.alpha,
            lambda: state.lambda,
            sigma: &state.sigma,
            outcome: &outcome,
        })?;
    }
    sink.finish()?;
    let state = sampler.state();
    Ok(ChainSummary {
        scheme: sampler.config().scheme,
        n_steps,
        accepted,
        final_lambda: state.lambda,
        final_sigma: state.sigma.clone(),
        moments,
        band_violations,
        fixed_point_converged: converged,
        max_fixed_point_residual: max_residual,
        adaptation_decile_max: diminishing,
        kernel_decile_max: kernel,
    })
}
