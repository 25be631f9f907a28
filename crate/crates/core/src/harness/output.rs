//! CSV tables, plot data and the replay echo.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::config::{ExperimentConfig, ReferenceKind};
use super::experiment::{fitted_error, run_convergence_experiment, ExperimentReport, RateParameter};
use crate::error::{Error, Result};

pub const RESULTS_FILE: &str = "results.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const RATES_FILE: &str = "rates.csv";
pub const ECHO_FILE: &str = "echo.toml";
pub const WARNINGS_FILE: &str = "warnings.txt";

/// Plot-data file of the rate against one parameter.
pub fn plot_file(parameter: RateParameter) -> String {
    format!("rate_{}.dat", parameter.name())
}

/// Every file written by [`emit_outputs`], in a fixed order.
pub fn output_files() -> Vec<String> {
    let mut v: Vec<String> = [RESULTS_FILE, SUMMARY_FILE, RATES_FILE, WARNINGS_FILE]
        .iter()
        .map(|s| s.to_string())
        .collect();
    v.push(plot_file(RateParameter::Dt));
    v.push(plot_file(RateParameter::H));
    v.push(ECHO_FILE.to_string());
    v
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

fn results_table(report: &ExperimentReport) -> String {
    let mut s = String::from(
        "level,n,steps,h,dt,path,error,time_statistic,space_statistic,time_flag,space_flag,\
         max_energy,dissipation,increments,max_gradient,pressure_det,pressure_stoch\n",
    );
    for r in &report.records {
        let l = &report.levels[r.level];
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.level,
            l.n,
            l.steps,
            l.h,
            l.dt,
            r.path_id,
            r.error,
            r.time_statistic,
            r.space_statistic,
            r.time_flag,
            r.space_flag.map_or("NA".to_string(), |f| f.to_string()),
            r.energy.max_energy,
            r.energy.dissipation,
            r.energy.increments,
            r.energy.max_gradient,
            opt(r.pressure.map(|p| p.deterministic)),
            opt(r.pressure.map(|p| p.stochastic)),
        );
    }
    s
}

fn summary_table(report: &ExperimentReport) -> String {
    let mut s = String::from(
        "level,n,steps,h,dt,paths,truncated_expectation,standard_error,mean_error,acceptance_fraction,\
         time_acceptance,space_acceptance,mean_max_energy,mean_dissipation,mean_increments,mean_max_gradient,\
         mean_pressure_det,mean_pressure_stoch\n",
    );
    for l in &report.levels {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            l.level,
            l.n,
            l.steps,
            l.h,
            l.dt,
            l.paths,
            l.truncated_expectation,
            l.standard_error,
            l.mean_error,
            l.acceptance_fraction,
            l.time_acceptance,
            opt(l.space_acceptance),
            l.mean_max_energy,
            l.mean_dissipation,
            l.mean_increments,
            l.mean_max_gradient,
            opt(l.mean_pressure_det),
            opt(l.mean_pressure_stoch),
        );
    }
    s
}

fn rates_table(report: &ExperimentReport) -> String {
    let mut s = String::from("parameter,slope,intercept,r_squared,residual_rms\n");
    for r in &report.rates {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            r.parameter.name(),
            r.fit.slope,
            r.fit.intercept,
            r.fit.r_squared,
            r.fit.residual_rms
        );
    }
    s
}

fn plot_data(report: &ExperimentReport, parameter: RateParameter) -> String {
    let quantity = match report.config.reference_kind {
        ReferenceKind::TaylorGreen => "mean squared error vs closed form",
        ReferenceKind::SamePath => "truncated squared error vs reference",
    };
    let mut s = format!("# log2({}) log2({quantity})\n", parameter.name());
    if report.rate(parameter).is_some() {
        for l in &report.levels {
            let x = match parameter {
                RateParameter::Dt => l.dt,
                RateParameter::H => l.h,
            };
            let e = fitted_error(&report.config, l);
            if e > 0.0 {
                let _ = writeln!(s, "{} {}", x.log2(), e.log2());
            }
        }
    }
    s
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Writes the results table, summary, rates, plot data, warnings and the
/// config echo into `dir`, creating it if needed.
pub fn emit_outputs(report: &ExperimentReport, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut warnings = report.warnings.join("\n");
    for f in &report.failures {
        let _ = write!(warnings, "\npath {} failed: {}", f.path_id, f.message);
    }
    if !warnings.is_empty() {
        warnings.push('\n');
    }
    let echo = format!(
        "# replay with: stochns replay {ECHO_FILE}\n# path ids 0..{} under master_seed {}\n{}",
        report.config.paths,
        report.config.master_seed,
        report.config.to_toml()?
    );
    Ok(vec![
        write(dir, RESULTS_FILE, &results_table(report))?,
        write(dir, SUMMARY_FILE, &summary_table(report))?,
        write(dir, RATES_FILE, &rates_table(report))?,
        write(dir, WARNINGS_FILE, &warnings)?,
        write(dir, &plot_file(RateParameter::Dt), &plot_data(report, RateParameter::Dt))?,
        write(dir, &plot_file(RateParameter::H), &plot_data(report, RateParameter::H))?,
        write(dir, ECHO_FILE, &echo)?,
    ])
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayOutcome {
    pub report: ExperimentReport,
    /// Output files whose bytes differ from the originals.
    pub differing: Vec<String>,
}

impl ReplayOutcome {
    pub fn identical(&self) -> bool {
        self.differing.is_empty()
    }
}

/// Re-runs the experiment in an echo file, writes the outputs into `out`
/// and compares them byte for byte with the files next to the echo.
pub fn replay(echo: &Path, out: &Path) -> Result<ReplayOutcome> {
    let config = ExperimentConfig::load(echo)?;
    let original = echo.parent().unwrap_or(Path::new("."));
    let report = run_convergence_experiment(&config)?;
    emit_outputs(&report, out)?;
    let mut differing = Vec::new();
    for name in output_files() {
        let a = std::fs::read(original.join(&name)).map_err(|e| Error::io(original.join(&name), e))?;
        let b = std::fs::read(out.join(&name)).map_err(|e| Error::io(out.join(&name), e))?;
        if a != b {
            differing.push(name);
        }
    }
    Ok(ReplayOutcome { report, differing })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::experiment::run_convergence_experiment;

    fn tiny() -> ExperimentConfig {
        let mut c = ExperimentConfig::new(vec![[4, 2], [4, 4], [4, 8]], [4, 16]);
        c.paths = 2;
        c.horizon = 0.2;
        c.noise_modes = 4;
        c.pressure_diagnostics = false;
        c
    }

    fn lines(path: &Path) -> usize {
        std::fs::read_to_string(path).unwrap().lines().count()
    }

    #[test]
    fn row_counts_and_replay() {
        let c = tiny();
        let report = run_convergence_experiment(&c).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let files = emit_outputs(&report, dir.path()).unwrap();
        assert_eq!(files.len(), output_files().len());
        assert_eq!(lines(&dir.path().join(RESULTS_FILE)), 1 + 3 * 2);
        assert_eq!(lines(&dir.path().join(SUMMARY_FILE)), 1 + 3);
        assert_eq!(lines(&dir.path().join(RATES_FILE)), 2);
        let again = dir.path().join("again");
        let outcome = replay(&dir.path().join(ECHO_FILE), &again).unwrap();
        assert!(outcome.identical(), "{:?}", outcome.differing);
        assert_eq!(outcome.report, report);
        // a changed file is detected
        std::fs::write(dir.path().join(SUMMARY_FILE), "tampered\n").unwrap();
        let outcome = replay(&dir.path().join(ECHO_FILE), &dir.path().join("third")).unwrap();
        assert_eq!(outcome.differing, vec![SUMMARY_FILE.to_string()]);
    }

    #[test]
    fn empty_report_has_headers_only() {
        let report = ExperimentReport {
            config: tiny(),
            warnings: Vec::new(),
            seeds: Vec::new(),
            records: Vec::new(),
            levels: Vec::new(),
            rates: Vec::new(),
            failures: Vec::new(),
        };
        let dir = tempfile::tempdir().unwrap();
        emit_outputs(&report, dir.path()).unwrap();
        for name in [RESULTS_FILE, SUMMARY_FILE, RATES_FILE] {
            assert_eq!(lines(&dir.path().join(name)), 1, "{name}");
        }
        assert_eq!(lines(&dir.path().join(plot_file(RateParameter::Dt))), 1);
    }

    #[test]
    fn unwritable_directory_names_the_path() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        std::fs::write(&blocker, "x").unwrap();
        let report = run_convergence_experiment(&tiny()).unwrap();
        match emit_outputs(&report, &blocker.join("sub")) {
            Err(Error::Io { path, .. }) => assert!(path.starts_with(&blocker)),
            other => panic!("unexpected {other:?}"),
        }
    }
}
