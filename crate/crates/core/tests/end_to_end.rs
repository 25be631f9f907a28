//! End-to-end runs of the binary and of the library pipeline on small inputs.

use std::path::Path;
use std::process::{Command, Output};

use stochns::harness::{run_convergence_experiment, ExperimentConfig, InitialKind, RateParameter};
use stochns::noise::{coarsen_path, sample_path, NoiseKind};

fn stochns(args: &[&str], extra: &[&Path]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stochns"))
        .args(args)
        .args(extra)
        .output()
        .unwrap()
}

fn tiny_toml() -> String {
    let mut c = ExperimentConfig::new(vec![[4, 2], [4, 4], [4, 8]], [8, 16]);
    c.label = "tiny".into();
    c.paths = 3;
    c.horizon = 0.25;
    c.noise_modes = 4;
    c.to_toml().unwrap()
}

#[test]
fn stochastic_run_then_replay_and_tamper() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("tiny.toml");
    std::fs::write(&config, tiny_toml()).unwrap();
    let out = dir.path().join("run");
    let o = stochns(&["stochastic-rates", "--config"], &[&config, Path::new("--output"), &out]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("slope vs dt"), "{stdout}");
    for f in ["results.csv", "summary.csv", "rates.csv", "rate_dt.dat", "rate_h.dat", "echo.toml", "warnings.txt"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let echo = out.join("echo.toml");
    let o = stochns(&["replay"], &[&echo]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let results = out.join("results.csv");
    let mut text = std::fs::read_to_string(&results).unwrap();
    text.push_str("extra\n");
    std::fs::write(&results, text).unwrap();
    let o = stochns(&["replay"], &[&echo, Path::new("--output"), &dir.path().join("again")]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stdout).contains("results.csv"));
}

#[test]
fn bad_config_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    std::fs::write(&config, format!("{}\nunknown_knob = 1\n", tiny_toml())).unwrap();
    let o = stochns(&["stochastic-rates", "--config"], &[&config]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown_knob"));
    let o = stochns(&["stochastic-rates", "--levels", "4:2,4:4", "--reference", "6:8"], &[]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stdout));
}

#[test]
fn projection_command_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let o = stochns(&["project-rates", "--levels", "4,8,16", "--output"], &[dir.path()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = std::fs::read_to_string(dir.path().join("projection.csv")).unwrap();
    assert_eq!(table.lines().count(), 4);
    assert!(dir.path().join("projection_velocity_h1.dat").exists());
}

#[test]
fn noise_command_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let o = stochns(&["validate-noise", "--output"], &[dir.path()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(dir.path().join("noise_validation.csv").exists());
    let o = stochns(&["validate-noise", "--decay", "1"], &[]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn coarsened_paths_sum_fine_increments() {
    let fine = sample_path(16, 3, 0.5, 9, 4).unwrap();
    let coarse = coarsen_path(&fine, 4).unwrap();
    assert_eq!(coarse.steps(), 4);
    for m in 1..=4 {
        for k in 0..3 {
            let sum: f64 = (1..=4).map(|j| fine.row(4 * (m - 1) + j)[k]).sum();
            assert!((coarse.row(m)[k] - sum).abs() < 1e-14);
        }
    }
}

#[test]
fn multiplicative_noise_pipeline_converges_in_time() {
    let mut c = ExperimentConfig::new(vec![[8, 2], [8, 4], [8, 8]], [8, 32]);
    c.paths = 4;
    c.horizon = 0.25;
    c.noise_modes = 4;
    c.noise_kind = NoiseKind::LinearMult;
    c.noise_scale = 0.5;
    c.initial = InitialKind::TaylorGreen;
    c.initial_amplitude = 0.15;
    c.pressure_diagnostics = false;
    let r = run_convergence_experiment(&c).unwrap();
    assert!(r.failures.is_empty());
    let errors: Vec<f64> = r.levels.iter().map(|l| l.mean_error).collect();
    assert!(errors.windows(2).all(|w| w[1] < w[0]), "{errors:?}");
    assert!(r.rate(RateParameter::Dt).is_some_and(|f| f.slope > 0.5), "{:?} {:?}", r.rates, r.levels);
}
