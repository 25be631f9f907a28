//! Convergence experiments: configuration, Monte Carlo driver, indicators,
//! rate fits, output files and the command-line front end.

pub mod cli;
pub mod config;
pub mod experiment;
pub mod indicators;
pub mod output;
pub mod rates;
pub mod studies;

pub use config::{ExperimentConfig, InitialKind, ReferenceKind};
pub use experiment::{
    run_convergence_experiment, ExperimentReport, LevelSummary, NamedRate, PathFailure, PathRecord, RateParameter,
};
pub use output::{emit_outputs, replay, ReplayOutcome};
pub use rates::{fit_rates, RateFit};
pub use studies::{projection_rates, ProjectionStudy};
