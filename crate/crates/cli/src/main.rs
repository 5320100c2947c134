use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use vbam_cli::config::{parse_assignment, parse_ini, Experiment, ExperimentConfig};
use vbam_cli::{compare, default_run_dir, output_root, run, run_experiment, CliError};

#[derive(Parser)]
#[command(name = "vbam", version, about = "Adaptive Metropolis experiments with a VB-AKF tuned proposal")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// strip, gauss, banana, chemical, monod or custom.
    #[arg(long)]
    experiment: Option<String>,
    /// Extra `key=value` assignments, applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its output directory.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        /// none, am, rr or vbam.
        #[arg(long)]
        scheme: Option<String>,
        #[arg(long)]
        steps: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Independent chains, run in parallel.
        #[arg(long)]
        chains: Option<usize>,
        /// Output directory (default: $VBAM_OUTPUT_ROOT/<experiment>-<scheme>-seed<seed>).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check uniform complete observability and controllability of the filter model.
    CheckModel {
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Join the diagnostics of two runs.
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn collect_pairs(args: &ConfigArgs, extra: Vec<(String, String)>) -> Result<Vec<(String, String)>, CliError> {
    let mut pairs = Vec::new();
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        pairs.extend(parse_ini(&text)?);
    }
    if let Some(e) = &args.experiment {
        pairs.push(("experiment".into(), e.clone()));
    }
    pairs.extend(extra);
    for s in &args.set {
        pairs.push(parse_assignment(s)?);
    }
    Ok(pairs)
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run {
            config,
            scheme,
            steps,
            seed,
            chains,
            out,
        } => {
            let mut extra = Vec::new();
            if let Some(s) = scheme {
                extra.push(("scheme".into(), s));
            }
            if let Some(n) = steps {
                extra.push(("steps".into(), n.to_string()));
            }
            if let Some(s) = seed {
                extra.push(("seed".into(), s.to_string()));
            }
            if let Some(c) = chains {
                extra.push(("chains".into(), c.to_string()));
            }
            let cfg = ExperimentConfig::from_pairs(&collect_pairs(&config, extra)?, Experiment::Strip)?;
            let dir = out.unwrap_or_else(|| default_run_dir(&cfg));
            let report = run_experiment(&cfg, &dir)?;
            println!("wrote {}", report.dir.display());
            for c in &report.manifest.chains {
                println!(
                    "chain {}: acceptance {:.4}, fixed-point converged {:.4}, band violations {}",
                    c.stream, c.acceptance_rate, c.fixed_point_fraction, c.band_violations
                );
                if let Some(b) = c.final_subopt {
                    println!("  final suboptimality {b:.4}");
                }
                if let (Some(m), Some(w)) = (c.density_mean_difference, c.density_within_5se) {
                    println!("  density: mean difference {m:.3e}, {:.1}% of bins within 5 SE", 100.0 * w);
                }
            }
            Ok(())
        }
        Command::CheckModel { config } => {
            let cfg = ExperimentConfig::from_pairs(&collect_pairs(&config, Vec::new())?, Experiment::Strip)?;
            let report = run::check_model(&cfg)?;
            print!("{}", run::describe_check(&report));
            Ok(())
        }
        Command::Compare { a, b, out } => {
            let out = out.unwrap_or_else(|| {
                let name = |p: &PathBuf| p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                output_root().join(format!("compare-{}-{}", name(&a), name(&b)))
            });
            let c = compare::compare(&a, &b, &out)?;
            println!("wrote {} ({} rows)", c.diagnostics.display(), c.rows);
            if let Some(d) = &c.density {
                println!("wrote {}", d.display());
            }
            println!("max |difference| {:e}", c.max_abs_difference);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("vbam: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
