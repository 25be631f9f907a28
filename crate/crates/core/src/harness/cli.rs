//! Command-line front end.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use super::config::ExperimentConfig;
use super::experiment::{run_convergence_experiment, ExperimentReport, RateParameter};
use super::output::{emit_outputs, replay};
use super::studies::{emit_noise_validation, emit_projection, projection_rates};
use crate::error::{Error, Result};
use crate::fem::ConvectionForm;
use crate::noise::{validate_conditions, NoiseKind, NoiseModel};

#[derive(Debug, Parser)]
#[command(name = "stochns", version, about = "Stochastic Navier-Stokes FE discretization and convergence experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the noise growth conditions and their stability under doubling K.
    ValidateNoise(NoiseArgs),
    /// Projection error rates of a smooth velocity/pressure pair.
    ProjectRates {
        /// Mesh subdivisions.
        #[arg(long, value_delimiter = ',', default_values_t = [8usize, 16, 32, 64])]
        levels: Vec<usize>,
        #[arg(long, default_value = "out/project")]
        output: PathBuf,
    },
    /// Noise-free Taylor-Green rates against the closed form.
    DeterministicRates(ExperimentArgs),
    /// Path-coupled Monte Carlo rates against a same-path reference.
    StochasticRates(ExperimentArgs),
    /// Re-run an experiment from its echo file and compare the outputs bitwise.
    Replay {
        echo: PathBuf,
        /// Where to write the replayed outputs (default: `replay/` next to the echo).
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct NoiseArgs {
    #[arg(long, default_value_t = 2.0)]
    pub decay: f64,
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
    #[arg(long, default_value = "additive")]
    pub kind: NoiseKind,
    #[arg(long, default_value_t = 16)]
    pub modes: usize,
    /// Also check the second-order conditions.
    #[arg(long)]
    pub second_order: bool,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// TOML config; defaults to the built-in schedule of the subcommand.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub paths: Option<usize>,
    /// Level schedule as `n:M` pairs, e.g. `32:16,32:32,32:64`.
    #[arg(long, value_delimiter = ',', value_parser = parse_level)]
    pub levels: Option<Vec<[usize; 2]>>,
    /// Reference level as `n:M`.
    #[arg(long, value_parser = parse_level)]
    pub reference: Option<[usize; 2]>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub convection: Option<ConvectionForm>,
}

fn parse_level(s: &str) -> std::result::Result<[usize; 2], String> {
    let (n, m) = s.split_once(':').ok_or_else(|| format!("expected n:M, got '{s}'"))?;
    let parse = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("'{v}': {e}"));
    Ok([parse(n)?, parse(m)?])
}

impl ExperimentArgs {
    fn apply(&self, mut c: ExperimentConfig) -> ExperimentConfig {
        if let Some(v) = self.seed {
            c.master_seed = v;
        }
        if let Some(v) = self.paths {
            c.paths = v;
        }
        if let Some(v) = &self.levels {
            c.levels = v.clone();
        }
        if let Some(v) = self.reference {
            c.reference = v;
        }
        if let Some(v) = self.epsilon {
            c.epsilon = v;
        }
        if let Some(v) = self.convection {
            c.convection = v;
        }
        c
    }
}

fn print_report(report: &ExperimentReport) {
    println!("{} (errors are measured vs the reference)", report.config.label);
    println!(
        "{:>5} {:>5} {:>8} {:>10} {:>14} {:>12} {:>14} {:>10}",
        "n", "M", "h", "dt", "trunc. error", "std. error", "mean error", "accepted"
    );
    for l in &report.levels {
        println!(
            "{:>5} {:>5} {:>8.4} {:>10.3e} {:>14.6e} {:>12.3e} {:>14.6e} {:>10.3}",
            l.n,
            l.steps,
            l.h,
            l.dt,
            l.truncated_expectation,
            l.standard_error,
            l.mean_error,
            l.acceptance_fraction
        );
    }
    for p in [RateParameter::Dt, RateParameter::H] {
        if let Some(f) = report.rate(p) {
            println!(
                "slope vs {}: squared error {:.4}, norm {:.4} (R^2 {:.4})",
                p.name(),
                f.slope,
                f.slope / 2.0,
                f.r_squared
            );
        }
    }
    for w in &report.warnings {
        println!("warning: {w}");
    }
}

fn run_experiment(config: ExperimentConfig, output: &Path) -> Result<()> {
    let report = run_convergence_experiment(&config)?;
    emit_outputs(&report, output)?;
    print_report(&report);
    println!("outputs written to {}", output.display());
    Ok(())
}

/// Executes one parsed command. The exit code is 1 when a check fails
/// (noise validation, replay mismatch).
pub fn execute(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::ValidateNoise(a) => {
            // the checked constructor would refuse slow decay outright
            let model = NoiseModel::unchecked(a.decay, a.scale, a.kind, a.modes)?;
            let report = validate_conditions(&model, a.second_order)?;
            println!("noise {} with decay {} and scale {}", a.kind, a.decay, a.scale);
            println!("{report}");
            if let Some(dir) = &a.output {
                emit_noise_validation(&report, dir)?;
            }
            Ok(if report.passed { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::ProjectRates { levels, output } => {
            let study = projection_rates(&levels)?;
            println!("{:>5} {:>8} {:>14} {:>14} {:>14}", "n", "h", "|v-Pv|_L2", "|v-Pv|_H1", "|p-Pp|_L2");
            for r in &study.rows {
                println!(
                    "{:>5} {:>8.4} {:>14.6e} {:>14.6e} {:>14.6e}",
                    r.n, r.h, r.velocity_l2, r.velocity_h1, r.pressure_l2
                );
            }
            println!(
                "slopes: velocity L2 {:.4}, velocity H1 {:.4}, pressure L2 {:.4}",
                study.velocity_l2.slope, study.velocity_h1.slope, study.pressure_l2.slope
            );
            emit_projection(&study, &output)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::DeterministicRates(a) => {
            let base = match &a.config {
                Some(p) => vec![ExperimentConfig::load(p)?],
                None => vec![ExperimentConfig::deterministic_temporal(), ExperimentConfig::deterministic_spatial()],
            };
            let root = a.output.clone().unwrap_or_else(|| PathBuf::from("out/deterministic"));
            let single = base.len() == 1;
            for c in base {
                let dir = if single { root.clone() } else { root.join(&c.label) };
                run_experiment(a.apply(c), &dir)?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::StochasticRates(a) => {
            let c = match &a.config {
                Some(p) => ExperimentConfig::load(p)?,
                None => ExperimentConfig::stochastic_default(),
            };
            let dir = a.output.clone().unwrap_or_else(|| PathBuf::from("out/stochastic"));
            run_experiment(a.apply(c), &dir)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Replay { echo, output } => {
            let out = match output {
                Some(o) => o,
                None => echo
                    .parent()
                    .ok_or_else(|| Error::InvalidArgument("echo path has no parent directory".into()))?
                    .join("replay"),
            };
            let outcome = replay(&echo, &out)?;
            if outcome.identical() {
                println!("replay identical: all outputs match bitwise");
                Ok(ExitCode::SUCCESS)
            } else {
                println!("replay differs in: {}", outcome.differing.join(", "));
                Ok(ExitCode::from(1))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn parses_levels_and_overrides() {
        let cli = Cli::try_parse_from([
            "stochns",
            "stochastic-rates",
            "--levels",
            "8:2,8:4",
            "--reference",
            "8:8",
            "--paths",
            "3",
            "--convection",
            "full",
        ])
        .unwrap();
        let Command::StochasticRates(a) = cli.command else {
            panic!("wrong subcommand")
        };
        let c = a.apply(ExperimentConfig::stochastic_default());
        assert_eq!(c.levels, vec![[8, 2], [8, 4]]);
        assert_eq!(c.reference, [8, 8]);
        assert_eq!(c.paths, 3);
        assert_eq!(c.convection, ConvectionForm::Full);
        assert!(parse_level("8x2").is_err());
    }

    #[test]
    fn noise_exit_codes() {
        let ok = Cli::try_parse_from(["stochns", "validate-noise", "--modes", "8"]).unwrap();
        assert_eq!(execute(ok).unwrap(), ExitCode::SUCCESS);
        let bad = Cli::try_parse_from(["stochns", "validate-noise", "--decay", "1", "--kind", "linear_mult"]).unwrap();
        assert_eq!(execute(bad).unwrap(), ExitCode::from(1));
    }
}
