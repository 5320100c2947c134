//! Flat `key = value` experiment configuration with per-experiment presets.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use sha2::{Digest, Sha256};
use vbam::mcmc::{optimal_scale, Scheme};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Experiment {
    Strip,
    Gauss,
    Banana,
    Chemical,
    Monod,
    Custom,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::Strip,
        Experiment::Gauss,
        Experiment::Banana,
        Experiment::Chemical,
        Experiment::Monod,
        Experiment::Custom,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Strip => "strip",
            Experiment::Gauss => "gauss",
            Experiment::Banana => "banana",
            Experiment::Chemical => "chemical",
            Experiment::Monod => "monod",
            Experiment::Custom => "custom",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| CliError::Config(format!("unknown experiment `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Proposal {
    Gaussian,
    StudentT,
}

/// Every tunable of a run. `None` fields resolve to experiment-dependent
/// defaults at build time.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub scheme: Scheme,
    pub steps: u64,
    pub seed: u64,
    pub chains: usize,
    pub dim: Option<usize>,
    pub bananicity: f64,
    pub target_var: Vec<f64>,
    pub truncation: f64,
    pub theta0: Option<Vec<f64>>,
    pub sigma0: Option<f64>,
    pub lambda0: Option<f64>,
    pub epsilon: f64,
    pub beta: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub delta_lambda: f64,
    pub alpha_bar: f64,
    pub k0: f64,
    pub tau: f64,
    pub rm: Option<bool>,
    pub proposal: Proposal,
    pub t_dof: f64,
    pub a: f64,
    pub q: f64,
    pub h: f64,
    pub p0: f64,
    pub nu0: Option<f64>,
    pub m0_at_theta0: Option<bool>,
    pub data: Option<PathBuf>,
    pub data_seed: Option<u64>,
    pub noise_std: Option<f64>,
    pub bins: usize,
    pub diag_every: u64,
    pub window: usize,
}

/// Keys accepted by [`ExperimentConfig::set`], in canonical order.
pub const KEYS: &[&str] = &[
    "experiment",
    "scheme",
    "steps",
    "seed",
    "chains",
    "dim",
    "bananicity",
    "target_var",
    "truncation",
    "theta0",
    "sigma0",
    "lambda0",
    "epsilon",
    "beta",
    "mu1",
    "mu2",
    "delta_lambda",
    "alpha_bar",
    "k0",
    "tau",
    "rm",
    "proposal",
    "t_dof",
    "a",
    "q",
    "h",
    "p0",
    "nu0",
    "m0_at_theta0",
    "data",
    "data_seed",
    "noise_std",
    "bins",
    "diag_every",
    "window",
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .trim()
        .parse()
        .map_err(|_| CliError::Config(format!("invalid value `{value}` for `{key}`")))
}

fn parse_auto<T: FromStr>(key: &str, value: &str) -> Result<Option<T>, CliError> {
    if value.trim() == "auto" {
        Ok(None)
    } else {
        parse(key, value).map(Some)
    }
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>, CliError> {
    value.split(',').map(|v| parse(key, v)).collect()
}

fn parse_bool(key: &str, value: &str) -> Result<bool, CliError> {
    match value.trim() {
        "true" | "on" | "yes" | "1" => Ok(true),
        "false" | "off" | "no" | "0" => Ok(false),
        _ => Err(CliError::Config(format!("invalid boolean `{value}` for `{key}`"))),
    }
}

fn show<T: fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "auto".to_string(), |v| v.to_string())
}

/// Shortest round-trip form, in scientific notation for very small or large
/// magnitudes.
pub fn num(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-4..1e7).contains(&a) {
        format!("{v:e}")
    } else {
        v.to_string()
    }
}

fn show_num(v: &Option<f64>) -> String {
    v.map_or_else(|| "auto".to_string(), num)
}

fn show_list(v: &[f64]) -> String {
    v.iter().map(|x| num(*x)).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    pub fn preset(experiment: Experiment) -> Self {
        let mut c = Self {
            experiment,
            scheme: Scheme::Vbam,
            steps: 100_000,
            seed: 1,
            chains: 1,
            dim: None,
            bananicity: 0.1,
            target_var: vec![1.0, 100.0],
            truncation: vbam::targets::DEFAULT_TRUNCATION,
            theta0: None,
            sigma0: None,
            lambda0: None,
            epsilon: 1e-4,
            beta: 0.05,
            mu1: 1e-12,
            mu2: 1e12,
            delta_lambda: 1e-6,
            alpha_bar: 0.234,
            k0: 1000.0,
            tau: 0.99,
            rm: None,
            proposal: Proposal::Gaussian,
            t_dof: 4.0,
            a: 1.0,
            q: 1e-9,
            h: 1.0,
            p0: 1.0,
            nu0: None,
            m0_at_theta0: None,
            data: None,
            data_seed: None,
            noise_std: None,
            bins: 72,
            diag_every: 1000,
            window: 10_000,
        };
        match experiment {
            Experiment::Strip => {
                c.steps = 1_000_000;
                c.q = 1e-6;
                c.nu0 = Some(4.0);
            }
            Experiment::Gauss => {
                c.steps = 200_000;
                c.dim = Some(100);
            }
            Experiment::Banana => {
                c.steps = 1_000_000;
                c.dim = Some(20);
            }
            Experiment::Chemical | Experiment::Monod | Experiment::Custom => {}
        }
        c
    }

    /// Applies one `key = value` assignment; unknown keys are rejected.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let key = key.trim();
        let value = value.trim();
        match key {
            "experiment" => {
                let e: Experiment = value.parse()?;
                if e != self.experiment {
                    return Err(CliError::Config(format!(
                        "experiment `{e}` conflicts with preset `{}`",
                        self.experiment
                    )));
                }
            }
            "scheme" => self.scheme = value.parse().map_err(|e: vbam::Error| CliError::Config(e.to_string()))?,
            "steps" => self.steps = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "chains" => self.chains = parse(key, value)?,
            "dim" => self.dim = parse_auto(key, value)?,
            "bananicity" => self.bananicity = parse(key, value)?,
            "target_var" => self.target_var = parse_list(key, value)?,
            "truncation" => self.truncation = parse(key, value)?,
            "theta0" => {
                self.theta0 = if value == "auto" {
                    None
                } else {
                    Some(parse_list(key, value)?)
                }
            }
            "sigma0" => self.sigma0 = parse_auto(key, value)?,
            "lambda0" => self.lambda0 = parse_auto(key, value)?,
            "epsilon" => self.epsilon = parse(key, value)?,
            "beta" => self.beta = parse(key, value)?,
            "mu1" => self.mu1 = parse(key, value)?,
            "mu2" => self.mu2 = parse(key, value)?,
            "delta_lambda" => self.delta_lambda = parse(key, value)?,
            "alpha_bar" => self.alpha_bar = parse(key, value)?,
            "k0" => self.k0 = parse(key, value)?,
            "tau" => self.tau = parse(key, value)?,
            "rm" => {
                self.rm = if value == "auto" {
                    None
                } else {
                    Some(parse_bool(key, value)?)
                }
            }
            "proposal" => {
                self.proposal = match value {
                    "gaussian" => Proposal::Gaussian,
                    "student_t" | "t" => Proposal::StudentT,
                    _ => return Err(CliError::Config(format!("unknown proposal `{value}`"))),
                }
            }
            "t_dof" => self.t_dof = parse(key, value)?,
            "a" => self.a = parse(key, value)?,
            "q" => self.q = parse(key, value)?,
            "h" => self.h = parse(key, value)?,
            "p0" => self.p0 = parse(key, value)?,
            "nu0" => self.nu0 = parse_auto(key, value)?,
            "m0_at_theta0" => {
                self.m0_at_theta0 = if value == "auto" {
                    None
                } else {
                    Some(parse_bool(key, value)?)
                }
            }
            "data" => self.data = if value.is_empty() { None } else { Some(PathBuf::from(value)) },
            "data_seed" => self.data_seed = parse_auto(key, value)?,
            "noise_std" => self.noise_std = parse_auto(key, value)?,
            "bins" => self.bins = parse(key, value)?,
            "diag_every" => self.diag_every = parse(key, value)?,
            "window" => self.window = parse(key, value)?,
            _ => return Err(CliError::Config(format!("unknown configuration key `{key}`"))),
        }
        Ok(())
    }

    /// Builds a configuration from `(key, value)` pairs: the last
    /// `experiment` entry selects the preset, the other pairs are applied in
    /// order on top of it.
    pub fn from_pairs(pairs: &[(String, String)], default: Experiment) -> Result<Self, CliError> {
        let experiment = match pairs.iter().rev().find(|(k, _)| k.trim() == "experiment") {
            Some((_, v)) => v.trim().parse()?,
            None => default,
        };
        let mut c = Self::preset(experiment);
        for (k, v) in pairs {
            if k.trim() != "experiment" {
                c.set(k, v)?;
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let fail = |msg: &str| Err(CliError::Config(msg.to_string()));
        if self.steps == 0 {
            return fail("steps must be at least 1");
        }
        if self.chains == 0 {
            return fail("chains must be at least 1");
        }
        if self.dim == Some(0) {
            return fail("dim must be at least 1");
        }
        match (self.experiment, self.dim) {
            (Experiment::Strip, Some(d)) if d != 2 => return fail("the strip target is two-dimensional"),
            (Experiment::Chemical, Some(d)) if d != 3 => return fail("the chemical model has three parameters"),
            (Experiment::Monod, Some(d)) if d != 2 => return fail("the Monod model has two parameters"),
            (Experiment::Banana, Some(d)) if d < 2 => return fail("the banana target needs dim >= 2"),
            (Experiment::Custom, Some(d)) if d != self.target_var.len() => {
                return fail("dim must equal the length of target_var")
            }
            _ => {}
        }
        if self.experiment == Experiment::Custom && self.target_var.iter().any(|v| !(*v > 0.0)) {
            return fail("target_var entries must be positive");
        }
        if let Some(t) = &self.theta0 {
            if t.len() != self.dimension() {
                return fail("theta0 has the wrong length");
            }
        }
        if self.sigma0.is_some_and(|s| !(s > 0.0)) {
            return fail("sigma0 must be positive");
        }
        if self.lambda0.is_some_and(|s| !(s > 0.0)) {
            return fail("lambda0 must be positive");
        }
        if !(self.q >= 0.0) {
            return fail("q must be non-negative");
        }
        if !(self.p0 > 0.0) {
            return fail("p0 must be positive");
        }
        if self.nu0.is_some_and(|nu| !(nu > self.dimension() as f64 + 1.0)) {
            return fail("nu0 must exceed dim + 1");
        }
        if self.noise_std.is_some_and(|s| !(s > 0.0)) {
            return fail("noise_std must be positive");
        }
        if !(self.truncation > 0.0) {
            return fail("truncation must be positive");
        }
        if self.bins == 0 || self.diag_every == 0 || self.window == 0 {
            return fail("bins, diag_every and window must be positive");
        }
        self.adaptation().validate().map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn dimension(&self) -> usize {
        match self.experiment {
            Experiment::Strip => 2,
            Experiment::Chemical => 3,
            Experiment::Monod => 2,
            Experiment::Custom => self.target_var.len(),
            Experiment::Gauss => self.dim.unwrap_or(100),
            Experiment::Banana => self.dim.unwrap_or(20),
        }
    }

    /// Scale λ₀: the configured value, else `2.38²/2` for VBAM on the
    /// Gaussian benchmark, else `2.38²/d`.
    pub fn resolved_lambda0(&self) -> f64 {
        match self.lambda0 {
            Some(l) => l,
            None if self.experiment == Experiment::Gauss && self.scheme == Scheme::Vbam => optimal_scale(2),
            None => optimal_scale(self.dimension()),
        }
    }

    /// Robbins–Monro adaptation defaults to on only for VBAM on the Gaussian
    /// benchmark.
    pub fn resolved_rm(&self) -> bool {
        self.rm
            .unwrap_or(self.experiment == Experiment::Gauss && self.scheme == Scheme::Vbam)
    }

    pub fn resolved_nu0(&self) -> f64 {
        self.nu0.unwrap_or(self.dimension() as f64 + 2.0)
    }

    pub fn resolved_m0_at_theta0(&self) -> bool {
        self.m0_at_theta0
            .unwrap_or(matches!(self.experiment, Experiment::Chemical | Experiment::Monod))
    }

    pub fn adaptation(&self) -> vbam::mcmc::AdaptationConfig {
        use vbam::mcmc::{AdaptationConfig, Gain, ProposalFamily};
        AdaptationConfig {
            scheme: self.scheme,
            epsilon: self.epsilon,
            beta: self.beta,
            mu1: self.mu1,
            mu2: self.mu2,
            delta_lambda: self.delta_lambda,
            alpha_bar: self.alpha_bar,
            gain: Gain {
                k0: self.k0,
                tau: self.tau,
            },
            rm_enabled: self.resolved_rm(),
            proposal_family: match self.proposal {
                Proposal::Gaussian => ProposalFamily::Gaussian,
                Proposal::StudentT => ProposalFamily::StudentT { dof: self.t_dof },
            },
        }
    }

    /// `(key, value)` pairs in canonical order.
    pub fn canonical(&self) -> Vec<(&'static str, String)> {
        KEYS.iter()
            .map(|&k| {
                let v = match k {
                    "experiment" => self.experiment.to_string(),
                    "scheme" => self.scheme.to_string(),
                    "steps" => self.steps.to_string(),
                    "seed" => self.seed.to_string(),
                    "chains" => self.chains.to_string(),
                    "dim" => show(&self.dim),
                    "bananicity" => num(self.bananicity),
                    "target_var" => show_list(&self.target_var),
                    "truncation" => num(self.truncation),
                    "theta0" => self.theta0.as_deref().map_or_else(|| "auto".into(), show_list),
                    "sigma0" => show_num(&self.sigma0),
                    "lambda0" => show_num(&self.lambda0),
                    "epsilon" => num(self.epsilon),
                    "beta" => num(self.beta),
                    "mu1" => num(self.mu1),
                    "mu2" => num(self.mu2),
                    "delta_lambda" => num(self.delta_lambda),
                    "alpha_bar" => num(self.alpha_bar),
                    "k0" => num(self.k0),
                    "tau" => num(self.tau),
                    "rm" => show(&self.rm),
                    "proposal" => match self.proposal {
                        Proposal::Gaussian => "gaussian".into(),
                        Proposal::StudentT => "student_t".into(),
                    },
                    "t_dof" => num(self.t_dof),
                    "a" => num(self.a),
                    "q" => num(self.q),
                    "h" => num(self.h),
                    "p0" => num(self.p0),
                    "nu0" => show_num(&self.nu0),
                    "m0_at_theta0" => show(&self.m0_at_theta0),
                    "data" => self.data.as_ref().map_or_else(String::new, |p| p.display().to_string()),
                    "data_seed" => show(&self.data_seed),
                    "noise_std" => show_num(&self.noise_std),
                    "bins" => self.bins.to_string(),
                    "diag_every" => self.diag_every.to_string(),
                    "window" => self.window.to_string(),
                    _ => unreachable!("every key has a canonical value"),
                };
                (k, v)
            })
            .collect()
    }

    /// The canonical configuration as `key = value` lines.
    pub fn to_ini(&self) -> String {
        self.canonical()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    /// Git-style blob hash (`sha256("blob <len>\0" ‖ content)`) of the
    /// canonical configuration.
    pub fn content_hash(&self) -> String {
        let body = self.to_ini();
        let mut h = Sha256::new();
        h.update(format!("blob {}\0", body.len()).as_bytes());
        h.update(body.as_bytes());
        hex::encode(h.finalize())
    }
}

/// Parses flat INI text into `(key, value)` pairs. Blank lines and lines
/// starting with `#` or `;` are skipped; section headers are rejected.
pub fn parse_ini(text: &str) -> Result<Vec<(String, String)>, CliError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
            continue;
        }
        if line.starts_with('[') {
            return Err(CliError::Config(format!("line {}: sections are not supported", i + 1)));
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("line {}: expected `key = value`", i + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// Splits a `key=value` override.
pub fn parse_assignment(s: &str) -> Result<(String, String), CliError> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("expected key=value, got `{s}`")))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets() {
        let s = ExperimentConfig::preset(Experiment::Strip);
        assert_eq!(s.q, 1e-6);
        assert_eq!(s.resolved_nu0(), 4.0);
        assert_eq!(s.p0, 1.0);
        assert!((s.resolved_lambda0() - 2.8322).abs() < 1e-4);
        assert!(!s.resolved_rm());

        let g = ExperimentConfig::preset(Experiment::Gauss);
        assert_eq!(g.dimension(), 100);
        assert_eq!(g.beta, 0.05);
        assert_eq!(g.q, 1e-9);
        assert_eq!(g.resolved_lambda0(), 2.38 * 2.38 / 2.0);
        assert_eq!((g.k0, g.tau), (1000.0, 0.99));
        assert!(g.resolved_rm());

        let b = ExperimentConfig::preset(Experiment::Banana);
        assert_eq!((b.dimension(), b.bananicity, b.steps), (20, 0.1, 1_000_000));
        for e in Experiment::ALL {
            ExperimentConfig::preset(e).validate().unwrap();
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut c = ExperimentConfig::preset(Experiment::Strip);
        assert!(matches!(c.set("stpes", "10"), Err(CliError::Config(_))));
        assert!(c.set("steps", "ten").is_err());
        assert!(parse_ini("[main]\nsteps = 1").is_err());
    }

    #[test]
    fn ini_round_trip() {
        let mut c = ExperimentConfig::preset(Experiment::Custom);
        c.set("target_var", "2, 3, 4").unwrap();
        c.set("rm", "on").unwrap();
        let pairs = parse_ini(&c.to_ini()).unwrap();
        let back = ExperimentConfig::from_pairs(&pairs, Experiment::Strip).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn hash_tracks_every_field() {
        let base = ExperimentConfig::preset(Experiment::Gauss);
        let h0 = base.content_hash();
        assert_eq!(h0, base.clone().content_hash());
        assert_eq!(h0.len(), 64);
        let mut seen = std::collections::HashSet::new();
        seen.insert(h0);
        let changes = [
            ("scheme", "rr"),
            ("steps", "7"),
            ("seed", "9"),
            ("dim", "5"),
            ("epsilon", "0.01"),
            ("rm", "off"),
            ("q", "1e-6"),
            ("data_seed", "3"),
        ];
        for (k, v) in changes {
            let mut c = base.clone();
            c.set(k, v).unwrap();
            assert!(seen.insert(c.content_hash()), "{k}");
        }
    }

    #[test]
    fn conflicting_dimensions_fail_validation() {
        let pairs = vec![("dim".to_string(), "3".to_string())];
        assert!(ExperimentConfig::from_pairs(&pairs, Experiment::Strip).is_err());
        let pairs = vec![("nu0".to_string(), "2".to_string())];
        assert!(ExperimentConfig::from_pairs(&pairs, Experiment::Strip).is_err());
    }
}
