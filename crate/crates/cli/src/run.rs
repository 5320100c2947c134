//! Builds targets from a configuration, runs chains and writes their output
//! files.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use vbam::diagnostics::{suboptimality_factor, AcceptanceWindow, BatchedHistogram, BinDifference};
use vbam::kalman::{check_uniform_conditions, UniformityReport};
use vbam::mcmc::{run_chain, ChainInit, ChainSummary, FilterInit, SampleSink, Sampler, StepRecord};
use vbam::targets::{
    chemical_posterior, monod_posterior, synthesize_dataset, Banana, ChemicalPosterior, DataModel, Dataset,
    GaussianTarget, StripDensity, TargetDensity, Truncated,
};
use vbam::{chain_rng, DVector, SpdMatrix, StateSpaceModel};

use crate::config::{Experiment, ExperimentConfig};
use crate::CliError;

/// RNG stream reserved for drawing the Gaussian benchmark's factor `M`.
pub const TARGET_STREAM: u64 = u64::MAX;
/// RNG stream reserved for synthesizing regression data.
pub const DATA_STREAM: u64 = u64::MAX - 1;

const FLUSH_ROWS: u64 = 10_000;
const DENSITY_BATCHES: u64 = 100;
const STRIP_HALF_LONG: f64 = 18.0;

/// Target, starting point and filter model derived from a configuration.
pub struct Problem {
    pub target: Box<dyn TargetDensity>,
    /// Known target covariance, when the suboptimality factor is defined.
    pub target_cov: Option<SpdMatrix>,
    pub theta0: DVector<f64>,
    pub sigma0: SpdMatrix,
    pub model: StateSpaceModel,
    pub dataset: Option<(DataModel, Dataset)>,
}

impl Problem {
    pub fn dim(&self) -> usize {
        self.theta0.len()
    }

    pub fn has_density(&self, cfg: &ExperimentConfig) -> bool {
        cfg.experiment == Experiment::Strip
    }
}

pub fn state_space_model(cfg: &ExperimentConfig) -> Result<StateSpaceModel, CliError> {
    StateSpaceModel::scalar(cfg.dimension(), cfg.a, cfg.q, cfg.h).map_err(|e| CliError::Config(e.to_string()))
}

fn load_or_synthesize(cfg: &ExperimentConfig, model: DataModel) -> Result<Dataset, CliError> {
    let noise = cfg.noise_std.unwrap_or(model.default_noise_std());
    match &cfg.data {
        Some(path) => Dataset::load_csv(path, model, noise).map_err(|e| CliError::Config(format!("{}: {e}", path.display()))),
        None => {
            let mut rng = chain_rng(cfg.data_seed.unwrap_or(cfg.seed), DATA_STREAM);
            Ok(synthesize_dataset(
                &mut rng,
                model,
                &model.reported_params(),
                noise,
                &model.default_design(),
            )?)
        }
    }
}

pub fn build_problem(cfg: &ExperimentConfig) -> Result<Problem, CliError> {
    cfg.validate()?;
    let d = cfg.dimension();
    let model = state_space_model(cfg)?;
    let mut dataset = None;
    let mut target_cov = None;
    let target: Box<dyn TargetDensity> = match cfg.experiment {
        Experiment::Strip => Box::new(StripDensity),
        Experiment::Gauss => {
            let mut rng = chain_rng(cfg.seed, TARGET_STREAM);
            let t = GaussianTarget::random_mmt(&mut rng, d)?;
            target_cov = Some(t.covariance().clone());
            Box::new(Truncated::new(t, cfg.truncation))
        }
        Experiment::Custom => {
            let t = GaussianTarget::diagonal(&cfg.target_var).map_err(|e| CliError::Config(e.to_string()))?;
            target_cov = Some(t.covariance().clone());
            Box::new(Truncated::new(t, cfg.truncation))
        }
        Experiment::Banana => Box::new(Truncated::new(Banana::new(d, cfg.bananicity)?, cfg.truncation)),
        Experiment::Chemical => {
            let data = load_or_synthesize(cfg, DataModel::Chemical)?;
            dataset = Some((DataModel::Chemical, data.clone()));
            Box::new(chemical_posterior(data, ChemicalPosterior::DEFAULT_UPPER)?)
        }
        Experiment::Monod => {
            let data = load_or_synthesize(cfg, DataModel::Monod)?;
            dataset = Some((DataModel::Monod, data.clone()));
            Box::new(monod_posterior(data)?)
        }
    };

    let reported = match cfg.experiment {
        Experiment::Chemical => Some(DataModel::Chemical.reported_params()),
        Experiment::Monod => Some(DataModel::Monod.reported_params()),
        _ => None,
    };
    let theta0 = match (&cfg.theta0, &reported) {
        (Some(t), _) => t.clone(),
        (None, Some(r)) => r.clone(),
        (None, None) => vec![0.0; d],
    };
    let sigma0 = match (cfg.sigma0, &reported) {
        (Some(s), _) => SpdMatrix::scaled_identity(d, s)?,
        // One percent of the starting value as initial proposal scale.
        (None, Some(_)) => SpdMatrix::from_diagonal(&theta0.iter().map(|t| (0.01 * t).powi(2).max(1e-12)).collect::<Vec<_>>())?,
        (None, None) => SpdMatrix::identity(d),
    };
    let theta0 = DVector::from_vec(theta0);
    if !target.in_support(theta0.as_slice()) {
        return Err(CliError::Config("theta0 lies outside the target support".into()));
    }
    Ok(Problem {
        target,
        target_cov,
        theta0,
        sigma0,
        model,
        dataset,
    })
}

fn chain_init(cfg: &ExperimentConfig, problem: &Problem) -> Result<ChainInit, CliError> {
    let d = problem.dim();
    let mut init = ChainInit::new(problem.theta0.clone(), problem.sigma0.clone()).with_lambda(cfg.resolved_lambda0());
    if cfg.scheme == vbam::mcmc::Scheme::Vbam {
        let m0 = if cfg.resolved_m0_at_theta0() {
            problem.theta0.clone()
        } else {
            DVector::zeros(d)
        };
        init = init.with_filter(FilterInit {
            model: problem.model.clone(),
            m0,
            p0: SpdMatrix::scaled_identity(d, cfg.p0)?,
            nu0: cfg.resolved_nu0(),
        });
    }
    Ok(init)
}

/// One row of `diagnostics.csv`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagRow {
    pub step: u64,
    pub acceptance: f64,
    pub lambda: f64,
    pub sigma_trace: f64,
    pub subopt: Option<f64>,
}

/// Output of one chain.
#[derive(Clone, Debug)]
pub struct ChainReport {
    pub stream: u64,
    pub dir: PathBuf,
    pub summary: ChainSummary,
    pub diagnostics: Vec<DiagRow>,
    pub density: Option<Vec<BinDifference>>,
}

impl ChainReport {
    pub fn trailing_acceptance(&self) -> Option<f64> {
        self.diagnostics.last().map(|r| r.acceptance)
    }

    pub fn final_subopt(&self) -> Option<f64> {
        self.diagnostics.last().and_then(|r| r.subopt)
    }

    pub fn subopt_at(&self, step: u64) -> Option<f64> {
        self.diagnostics.iter().find(|r| r.step == step).and_then(|r| r.subopt)
    }

    pub fn density_mean_difference(&self) -> Option<f64> {
        self.density
            .as_ref()
            .map(|d| d.iter().map(|b| b.difference).sum::<f64>() / d.len() as f64)
    }

    /// Fraction of bins whose difference is within `k` standard errors.
    pub fn density_fraction_within(&self, k: f64) -> Option<f64> {
        self.density.as_ref().map(|d| {
            d.iter().filter(|b| b.difference.abs() <= k * b.std_error).count() as f64 / d.len() as f64
        })
    }
}

struct RunSink<'a> {
    chain: BufWriter<File>,
    diag: BufWriter<File>,
    line: String,
    rows: u64,
    diag_every: u64,
    last_step: u64,
    window: AcceptanceWindow,
    target_cov: Option<&'a SpdMatrix>,
    histogram: Option<BatchedHistogram>,
    diagnostics: Vec<DiagRow>,
}

impl RunSink<'_> {
    fn write_diag(&mut self, step: u64, lambda: f64, sigma: &SpdMatrix) -> vbam::Result<()> {
        let subopt = match self.target_cov {
            Some(t) => Some(suboptimality_factor(sigma, t)?),
            None => None,
        };
        let row = DiagRow {
            step,
            acceptance: self.window.rate(),
            lambda,
            sigma_trace: sigma.trace(),
            subopt,
        };
        let sub = row.subopt.map_or_else(String::new, |s| s.to_string());
        writeln!(self.diag, "{},{},{},{},{}", row.step, row.acceptance, row.lambda, row.sigma_trace, sub)?;
        self.diagnostics.push(row);
        Ok(())
    }
}

impl SampleSink for RunSink<'_> {
    fn record(&mut self, rec: &StepRecord<'_>) -> vbam::Result<()> {
        use std::fmt::Write as _;
        self.line.clear();
        let _ = write!(self.line, "{}", rec.step);
        for v in rec.theta {
            let _ = write!(self.line, ",{v}");
        }
        let _ = writeln!(self.line, ",{}", rec.accepted as u8);
        self.chain.write_all(self.line.as_bytes())?;
        self.rows += 1;
        if self.rows.is_multiple_of(FLUSH_ROWS) {
            self.chain.flush()?;
        }
        self.window.push(rec.accepted);
        if let Some(h) = self.histogram.as_mut() {
            h.push(rec.theta[0]);
        }
        self.last_step = rec.step;
        if rec.step.is_multiple_of(self.diag_every) {
            self.write_diag(rec.step, rec.lambda, rec.sigma)?;
        }
        Ok(())
    }

    fn finish(&mut self) -> vbam::Result<()> {
        self.chain.flush()?;
        self.diag.flush()?;
        Ok(())
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    let f = File::create(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(BufWriter::with_capacity(1 << 16, f))
}

/// Runs chain `stream` of the experiment, writing `chain.csv`,
/// `diagnostics.csv` and, for the strip target, `density.csv` into `dir`.
pub fn run_one(cfg: &ExperimentConfig, problem: &Problem, stream: u64, dir: &Path) -> Result<ChainReport, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let d = problem.dim();
    let mut chain = create(&dir.join("chain.csv"))?;
    let header: Vec<String> = std::iter::once("step".to_string())
        .chain((1..=d).map(|i| format!("theta_{i}")))
        .chain(std::iter::once("accepted".to_string()))
        .collect();
    writeln!(chain, "{}", header.join(",")).map_err(CliError::io)?;
    let mut diag = create(&dir.join("diagnostics.csv"))?;
    writeln!(diag, "step,acceptance,lambda,sigma_trace,subopt").map_err(CliError::io)?;

    let histogram = if problem.has_density(cfg) {
        let batch_len = (cfg.steps / DENSITY_BATCHES).max(1);
        Some(BatchedHistogram::new(-STRIP_HALF_LONG, STRIP_HALF_LONG, cfg.bins, batch_len)?)
    } else {
        None
    };
    let mut sink = RunSink {
        chain,
        diag,
        line: String::with_capacity(32 * (d + 2)),
        rows: 0,
        diag_every: cfg.diag_every,
        last_step: 0,
        window: AcceptanceWindow::new(cfg.window),
        target_cov: problem.target_cov.as_ref(),
        histogram,
        diagnostics: Vec::new(),
    };

    let init = chain_init(cfg, problem)?;
    let mut sampler = Sampler::new(problem.target.as_ref(), cfg.adaptation(), init)?;
    let mut rng = chain_rng(cfg.seed, stream);
    let summary = run_chain(&mut rng, &mut sampler, cfg.steps, &mut sink)?;
    if !sink.last_step.is_multiple_of(cfg.diag_every) {
        // Always close the diagnostics with the final step.
        let state = sampler.state();
        sink.write_diag(state.step, state.lambda, &state.sigma)?;
        sink.diag.flush().map_err(CliError::io)?;
    }

    let density = match sink.histogram.take() {
        Some(h) => {
            let strip = StripDensity;
            let diffs = h.finish(|a, b| strip.marginal_mass(a, b))?;
            let mut w = create(&dir.join("density.csv"))?;
            writeln!(w, "bin_center,empirical,true,difference").map_err(CliError::io)?;
            for b in &diffs {
                writeln!(w, "{},{},{},{}", b.center, b.empirical, b.truth, b.difference).map_err(CliError::io)?;
            }
            w.flush().map_err(CliError::io)?;
            Some(diffs)
        }
        None => None,
    };

    Ok(ChainReport {
        stream,
        dir: dir.to_path_buf(),
        summary,
        diagnostics: sink.diagnostics,
        density,
    })
}

/// Per-chain section of the manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainManifest {
    pub stream: u64,
    pub dir: String,
    pub n_steps: u64,
    pub accepted: u64,
    pub acceptance_rate: f64,
    pub trailing_acceptance: Option<f64>,
    pub final_lambda: f64,
    pub final_sigma_trace: f64,
    pub final_subopt: Option<f64>,
    pub band_violations: u64,
    pub fixed_point_fraction: f64,
    pub max_fixed_point_residual: f64,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    pub adaptation_decile_max: Vec<f64>,
    pub density_mean_difference: Option<f64>,
    pub density_within_5se: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub experiment: String,
    pub scheme: String,
    pub dim: usize,
    pub seed: u64,
    pub config: serde_json::Map<String, serde_json::Value>,
    pub config_hash: String,
    pub wall_time_seconds: f64,
    pub chains: Vec<ChainManifest>,
}

impl RunManifest {
    pub const FILE: &'static str = "manifest.json";

    pub fn load(dir: &Path) -> Result<Self, CliError> {
        let path = dir.join(Self::FILE);
        let text = fs::read_to_string(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
    }

    /// Writes to a temporary file and renames it into place.
    pub fn write_atomic(&self, dir: &Path) -> Result<(), CliError> {
        let tmp = dir.join(".manifest.json.tmp");
        let body = serde_json::to_string_pretty(self).map_err(|e| CliError::Io(e.to_string()))?;
        fs::write(&tmp, body + "\n").map_err(CliError::io)?;
        fs::rename(&tmp, dir.join(Self::FILE)).map_err(CliError::io)
    }
}

fn chain_manifest(report: &ChainReport, root: &Path) -> ChainManifest {
    let s = &report.summary;
    let cov = s.moments.covariance();
    let d = s.moments.dim();
    ChainManifest {
        stream: report.stream,
        dir: report
            .dir
            .strip_prefix(root)
            .map(|p| p.display().to_string())
            .unwrap_or_default(),
        n_steps: s.n_steps,
        accepted: s.accepted,
        acceptance_rate: s.acceptance_rate(),
        trailing_acceptance: report.trailing_acceptance(),
        final_lambda: s.final_lambda,
        final_sigma_trace: s.final_sigma.trace(),
        final_subopt: report.final_subopt(),
        band_violations: s.band_violations,
        fixed_point_fraction: s.fixed_point_fraction(),
        max_fixed_point_residual: s.max_fixed_point_residual,
        mean: s.moments.mean().iter().copied().collect(),
        variance: (0..d).map(|i| cov.as_ref().map_or(0.0, |c| c[(i, i)])).collect(),
        adaptation_decile_max: s.adaptation_decile_max.clone(),
        density_mean_difference: report.density_mean_difference(),
        density_within_5se: report.density_fraction_within(5.0),
    }
}

/// Result of [`run_experiment`].
#[derive(Clone, Debug)]
pub struct RunReport {
    pub dir: PathBuf,
    pub manifest: RunManifest,
    pub chains: Vec<ChainReport>,
}

/// Runs every chain of `cfg` into `dir` and writes the manifest last. With
/// more than one chain each chain gets its own `chain-<i>` subdirectory and
/// the chains run on separate threads.
pub fn run_experiment(cfg: &ExperimentConfig, dir: &Path) -> Result<RunReport, CliError> {
    let start = Instant::now();
    let problem = build_problem(cfg)?;
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    fs::write(dir.join("config.ini"), cfg.to_ini()).map_err(CliError::io)?;
    if let Some((model, data)) = &problem.dataset {
        let f = File::create(dir.join("data.csv")).map_err(CliError::io)?;
        data.write_csv(f, *model)?;
    }

    let chains: Vec<ChainReport> = if cfg.chains == 1 {
        vec![run_one(cfg, &problem, 0, dir)?]
    } else {
        let problem = &problem;
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..cfg.chains as u64)
                .map(|i| {
                    let sub = dir.join(format!("chain-{i}"));
                    scope.spawn(move || run_one(cfg, problem, i, &sub))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().unwrap_or_else(|_| Err(CliError::Io("chain thread panicked".into()))))
                .collect::<Result<Vec<_>, _>>()
        })?
    };

    let config = cfg
        .canonical()
        .into_iter()
        .map(|(k, v)| (k.to_string(), serde_json::Value::String(v)))
        .collect();
    let manifest = RunManifest {
        experiment: cfg.experiment.to_string(),
        scheme: cfg.scheme.to_string(),
        dim: problem.dim(),
        seed: cfg.seed,
        config,
        config_hash: cfg.content_hash(),
        wall_time_seconds: start.elapsed().as_secs_f64(),
        chains: chains.iter().map(|c| chain_manifest(c, dir)).collect(),
    };
    manifest.write_atomic(dir)?;
    Ok(RunReport {
        dir: dir.to_path_buf(),
        manifest,
        chains,
    })
}

/// Gramian check of the configured filter model over the configured band.
pub fn check_model(cfg: &ExperimentConfig) -> Result<UniformityReport, CliError> {
    let model = state_space_model(cfg)?;
    Ok(check_uniform_conditions(&model, cfg.mu1, cfg.mu2, 10, 5))
}

pub fn describe_check(report: &UniformityReport) -> String {
    let mut out = String::new();
    let verdict = |pass: bool| if pass { "pass" } else { "FAIL" };
    out.push_str(&format!(
        "observability ({}-step window): {} (beta1 = {:e}, beta2 = {:e})\n",
        report.window,
        verdict(report.observability.pass),
        report.observability.beta1,
        report.observability.beta2
    ));
    out.push_str(&format!(
        "controllability ({}-step window): {} (beta1 = {:e}, beta2 = {:e})\n",
        report.window,
        verdict(report.controllability.pass),
        report.controllability.beta1,
        report.controllability.beta2
    ));
    if report.singular_dynamics {
        out.push_str("warning: A is singular, the information matrix is undefined\n");
    }
    if !report.observability.pass {
        out.push_str("warning: model is not uniformly completely observable\n");
    }
    if !report.controllability.pass {
        out.push_str("warning: model is not uniformly completely controllable\n");
    }
    out.push_str(if report.pass() { "verdict: pass\n" } else { "verdict: fail\n" });
    out
}
