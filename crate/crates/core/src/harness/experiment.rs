//! Path-coupled Monte Carlo convergence experiments.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use super::config::{ExperimentConfig, ReferenceKind};
use super::indicators::{
    error_norm, error_norm_exact, space_statistic, space_threshold, time_statistic, time_threshold,
};
use super::rates::{fit_rates, RateFit};
use crate::error::{Error, Result};
use crate::fem::FeSpace;
use crate::noise::{coarsen_path, sample_path, NoiseModel, SeedRecord, WienerPath};
use crate::schemes::{
    energy_report, taylor_green, taylor_green_jacobian, EnergyReport, Scheme, SpaceOperators, Trajectory,
};
use crate::spectral::{monitor_pressure_norms, FeGridTransfer, PressureNorms, SpectralGrid};

/// Largest fraction of failed paths an experiment tolerates.
pub const MAX_FAILURE_FRACTION: f64 = 0.1;

/// Outcome of one path on one level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathRecord {
    pub level: usize,
    pub path_id: u64,
    /// Error statistic against the reference.
    pub error: f64,
    /// `max_m ||grad u_m||^2` of the time-discrete proxy.
    pub time_statistic: f64,
    /// `max_m (||grad u_m||^4 + ||u_{h,m}||^2)`.
    pub space_statistic: f64,
    pub time_flag: bool,
    /// `None` when `h >= 1`.
    pub space_flag: Option<bool>,
    pub energy: EnergyReport,
    pub pressure: Option<PressureNorms>,
}

impl PathRecord {
    /// Product indicator; an inapplicable space flag counts as accepted.
    pub fn accepted(&self) -> bool {
        self.time_flag && self.space_flag.unwrap_or(true)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelSummary {
    pub level: usize,
    pub n: usize,
    pub steps: usize,
    pub h: f64,
    pub dt: f64,
    pub paths: usize,
    /// Mean over paths of `indicator * error`.
    pub truncated_expectation: f64,
    pub standard_error: f64,
    pub mean_error: f64,
    pub acceptance_fraction: f64,
    pub time_acceptance: f64,
    pub space_acceptance: Option<f64>,
    pub mean_max_energy: f64,
    pub mean_dissipation: f64,
    pub mean_increments: f64,
    pub mean_max_gradient: f64,
    pub mean_pressure_det: Option<f64>,
    pub mean_pressure_stoch: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RateParameter {
    Dt,
    H,
}

impl RateParameter {
    pub fn name(self) -> &'static str {
        match self {
            RateParameter::Dt => "dt",
            RateParameter::H => "h",
        }
    }
}

/// Slope of the truncated squared error against one discretization parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NamedRate {
    pub parameter: RateParameter,
    pub fit: RateFit,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathFailure {
    pub path_id: u64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub warnings: Vec<String>,
    pub seeds: Vec<SeedRecord>,
    /// Ordered by `(level, path)`.
    pub records: Vec<PathRecord>,
    pub levels: Vec<LevelSummary>,
    pub rates: Vec<NamedRate>,
    pub failures: Vec<PathFailure>,
}

impl ExperimentReport {
    pub fn level_records(&self, level: usize) -> impl Iterator<Item = &PathRecord> {
        self.records.iter().filter(move |r| r.level == level)
    }

    /// Acceptance fraction of a level recomputed for another `eps`.
    pub fn acceptance_fraction(&self, level: usize, eps: f64) -> Result<f64> {
        let [n, m] = self.config.levels[level];
        let dt = self.config.horizon / m as f64;
        let h = ExperimentConfig::mesh_size(n);
        let time = time_threshold(eps, dt)?;
        let space = space_threshold(eps, h).ok();
        let mut total = 0usize;
        let mut accepted = 0usize;
        for r in self.level_records(level) {
            total += 1;
            if r.time_statistic <= time && space.is_none_or(|s| r.space_statistic <= s) {
                accepted += 1;
            }
        }
        Ok(if total == 0 { 0.0 } else { accepted as f64 / total as f64 })
    }

    pub fn rate(&self, parameter: RateParameter) -> Option<&RateFit> {
        self.rates.iter().find(|r| r.parameter == parameter).map(|r| &r.fit)
    }
}

/// Shared read-only state of one experiment.
struct Setup {
    config: ExperimentConfig,
    noise: NoiseModel,
    schemes: Vec<Scheme>,
    reference: Option<Scheme>,
    initial: BTreeMap<usize, Vec<f64>>,
    monitors: BTreeMap<usize, (SpectralGrid, FeGridTransfer)>,
}

impl Setup {
    fn new(config: &ExperimentConfig) -> Result<Self> {
        let noise = config.noise()?;
        let mut operators: BTreeMap<usize, Arc<SpaceOperators>> = BTreeMap::new();
        let mut ns: Vec<usize> = config.levels.iter().map(|l| l[0]).collect();
        if config.reference_kind == ReferenceKind::SamePath {
            ns.push(config.reference[0]);
        }
        for &n in &ns {
            if let Entry::Vacant(e) = operators.entry(n) {
                e.insert(SpaceOperators::new(&FeSpace::taylor_hood(n)?));
            }
        }
        let schemes = config
            .levels
            .iter()
            .map(|&[n, m]| Scheme::new(&operators[&n], &config.scheme_config(m), &noise))
            .collect::<Result<Vec<_>>>()?;
        let reference = match config.reference_kind {
            ReferenceKind::SamePath => {
                let [n, m] = config.reference;
                Some(Scheme::new(&operators[&n], &config.scheme_config(m), &noise)?)
            }
            ReferenceKind::TaylorGreen => None,
        };
        let data = config.initial_data();
        let mut initial = BTreeMap::new();
        for (&n, ops) in &operators {
            initial.insert(n, data.project(&ops.space)?);
        }
        let mut monitors = BTreeMap::new();
        if config.pressure_diagnostics {
            for &[n, _] in &config.levels {
                if let Entry::Vacant(e) = monitors.entry(n) {
                    let grid = SpectralGrid::for_mesh(n)?;
                    let transfer = FeGridTransfer::new(&operators[&n].space, &grid);
                    e.insert((grid, transfer));
                }
            }
        }
        Ok(Self {
            config: config.clone(),
            noise,
            schemes,
            reference,
            initial,
            monitors,
        })
    }

    fn pressure(&self, n: usize, traj: &Trajectory) -> Option<PressureNorms> {
        let (grid, transfer) = self.monitors.get(&n)?;
        let iterates: Vec<_> = traj.velocities.iter().map(|u| transfer.velocity(u)).collect();
        Some(monitor_pressure_norms(grid, &iterates, traj.dt, &self.noise))
    }

    /// Runs every level of one path.
    fn run_path(&self, path_id: u64) -> Result<Vec<PathRecord>> {
        let c = &self.config;
        let eps = c.epsilon;
        let fine = match c.reference_kind {
            ReferenceKind::SamePath => Some(sample_path(
                c.reference[1],
                c.noise_modes,
                c.horizon,
                c.master_seed,
                path_id,
            )?),
            ReferenceKind::TaylorGreen => None,
        };
        let reference = match (&self.reference, &fine) {
            (Some(s), Some(p)) => Some(s.run(c.reference_scheme, &self.initial[&c.reference[0]], p)?),
            _ => None,
        };
        let mut out = Vec::with_capacity(c.levels.len());
        for (level, (&[n, m], scheme)) in c.levels.iter().zip(&self.schemes).enumerate() {
            let path = match &fine {
                Some(p) => coarsen_path(p, c.reference[1] / m)?,
                None => WienerPath::zeros(m, c.noise_modes, c.horizon)?,
            };
            let traj = scheme.run(c.scheme, &self.initial[&n], &path)?;
            let (error, proxy, stride) = match &reference {
                Some(r) => (error_norm(&traj, r)?, r, c.reference[1] / m),
                None => {
                    let (mu, a) = (c.viscosity, c.initial_amplitude);
                    let e = error_norm_exact(
                        &traj,
                        |t, x| taylor_green(x, t, mu, a),
                        |t, x| taylor_green_jacobian(x, t, mu, a),
                    );
                    (e, &traj, 1)
                }
            };
            let h = ExperimentConfig::mesh_size(n);
            let ts = time_statistic(proxy, stride);
            let ss = space_statistic(proxy, &traj)?;
            let time_flag = time_threshold(eps, traj.dt).is_ok_and(|t| ts <= t);
            let space_flag = space_threshold(eps, h).ok().map(|t| ss <= t);
            out.push(PathRecord {
                level,
                path_id,
                error,
                time_statistic: ts,
                space_statistic: ss,
                time_flag,
                space_flag,
                energy: energy_report(&traj),
                pressure: self.pressure(n, &traj),
            });
        }
        Ok(out)
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

fn summarize(config: &ExperimentConfig, level: usize, records: &[&PathRecord]) -> LevelSummary {
    let [n, m] = config.levels[level];
    let p = records.len();
    let truncated: Vec<f64> = records
        .iter()
        .map(|r| if r.accepted() { r.error } else { 0.0 })
        .collect();
    let te = mean(truncated.iter().copied());
    let standard_error = if p > 1 {
        let var = truncated.iter().map(|v| (v - te).powi(2)).sum::<f64>() / (p - 1) as f64;
        (var / p as f64).sqrt()
    } else {
        0.0
    };
    let fraction = |f: &dyn Fn(&PathRecord) -> bool| {
        if p == 0 {
            0.0
        } else {
            records.iter().filter(|r| f(r)).count() as f64 / p as f64
        }
    };
    let space_applicable = records.first().is_some_and(|r| r.space_flag.is_some());
    let with_pressure = records.iter().all(|r| r.pressure.is_some()) && p > 0;
    LevelSummary {
        level,
        n,
        steps: m,
        h: ExperimentConfig::mesh_size(n),
        dt: config.horizon / m as f64,
        paths: p,
        truncated_expectation: te,
        standard_error,
        mean_error: mean(records.iter().map(|r| r.error)),
        acceptance_fraction: fraction(&|r| r.accepted()),
        time_acceptance: fraction(&|r| r.time_flag),
        space_acceptance: space_applicable.then(|| fraction(&|r| r.space_flag == Some(true))),
        mean_max_energy: mean(records.iter().map(|r| r.energy.max_energy)),
        mean_dissipation: mean(records.iter().map(|r| r.energy.dissipation)),
        mean_increments: mean(records.iter().map(|r| r.energy.increments)),
        mean_max_gradient: mean(records.iter().map(|r| r.energy.max_gradient)),
        mean_pressure_det: with_pressure
            .then(|| mean(records.iter().map(|r| r.pressure.map_or(0.0, |q| q.deterministic)))),
        mean_pressure_stoch: with_pressure
            .then(|| mean(records.iter().map(|r| r.pressure.map_or(0.0, |q| q.stochastic)))),
    }
}

/// Error quantity the rates are fitted to: the truncated expectation, or the
/// plain mean for noise-free runs against the closed form, where the sample
/// sets carry no meaning.
pub fn fitted_error(config: &ExperimentConfig, level: &LevelSummary) -> f64 {
    match config.reference_kind {
        ReferenceKind::TaylorGreen => level.mean_error,
        ReferenceKind::SamePath => level.truncated_expectation,
    }
}

/// Fits against `dt` and against `h` whenever the levels realize at least
/// three distinct values of that parameter.
fn fit_level_rates(config: &ExperimentConfig, levels: &[LevelSummary], warnings: &mut Vec<String>) -> Vec<NamedRate> {
    let mut out = Vec::new();
    for parameter in [RateParameter::Dt, RateParameter::H] {
        let value = |l: &LevelSummary| match parameter {
            RateParameter::Dt => l.dt,
            RateParameter::H => l.h,
        };
        let mut distinct: Vec<f64> = levels.iter().map(value).collect();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        if distinct.len() < 3 {
            continue;
        }
        let points: Vec<(f64, f64)> = levels.iter().map(|l| (value(l), fitted_error(config, l))).collect();
        match fit_rates(&points) {
            Ok(fit) => out.push(NamedRate { parameter, fit }),
            Err(e) => warnings.push(format!("no {} rate: {e}", parameter.name())),
        }
    }
    out
}

/// Runs every level on every path, compares against the reference and
/// aggregates truncated expectations and rates.
pub fn run_convergence_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut warnings = config.validate()?;
    for w in &warnings {
        log::warn!("{w}");
    }
    // bitwise reproducibility regardless of the thread count
    faer::set_global_parallelism(faer::Par::Seq);
    let setup = Setup::new(config)?;
    let ids: Vec<u64> = (0..config.paths as u64).collect();
    let results: Vec<(u64, Result<Vec<PathRecord>>)> = ids
        .par_iter()
        .map(|&id| {
            let r = setup.run_path(id);
            log::info!("{}: path {id} done", config.label);
            (id, r)
        })
        .collect();
    let mut per_path = Vec::new();
    let mut failures = Vec::new();
    for (id, r) in results {
        match r {
            Ok(records) => per_path.push(records),
            Err(e) => failures.push(PathFailure {
                path_id: id,
                message: e.to_string(),
            }),
        }
    }
    if failures.len() as f64 > MAX_FAILURE_FRACTION * config.paths as f64 {
        return Err(Error::TooManyFailures {
            failed: failures.len(),
            total: config.paths,
        });
    }
    if !failures.is_empty() {
        warnings.push(format!("{} of {} paths failed and were excluded", failures.len(), config.paths));
    }
    let mut records = Vec::new();
    for level in 0..config.levels.len() {
        records.extend(per_path.iter().map(|p| p[level].clone()));
    }
    let levels: Vec<LevelSummary> = (0..config.levels.len())
        .map(|l| {
            let rs: Vec<&PathRecord> = records.iter().filter(|r| r.level == l).collect();
            summarize(config, l, &rs)
        })
        .collect();
    let rates = fit_level_rates(config, &levels, &mut warnings);
    let seeds = ids
        .iter()
        .map(|&path_id| SeedRecord {
            master_seed: config.master_seed,
            path_id,
        })
        .collect();
    Ok(ExperimentReport {
        config: config.clone(),
        warnings,
        seeds,
        records,
        levels,
        rates,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::NoiseKind;

    fn small() -> ExperimentConfig {
        let mut c = ExperimentConfig::new(vec![[4, 2], [4, 4], [4, 8]], [4, 16]);
        c.paths = 3;
        c.horizon = 0.25;
        c.noise_scale = 0.5;
        c.noise_modes = 4;
        c.initial = super::super::config::InitialKind::TaylorGreen;
        c.initial_amplitude = 0.2;
        c
    }

    #[test]
    fn degenerate_level_has_zero_error() {
        let mut c = small();
        c.levels = vec![[4, 16]];
        let r = run_convergence_experiment(&c).unwrap();
        assert!(r.records.iter().all(|x| x.error == 0.0));
        assert!(r.warnings.iter().any(|w| w.contains("coincides")));
        assert_eq!(r.records.len(), 3);
    }

    #[test]
    fn report_invariants() {
        let c = small();
        let r = run_convergence_experiment(&c).unwrap();
        assert_eq!(r.records.len(), 9);
        assert_eq!(r.seeds.len(), 3);
        for (i, rec) in r.records.iter().enumerate() {
            assert_eq!(rec.level, i / 3);
            assert_eq!(rec.path_id, (i % 3) as u64);
        }
        for l in &r.levels {
            assert!(l.truncated_expectation <= l.mean_error);
            assert!((0.0..=1.0).contains(&l.acceptance_fraction));
            assert!(l.mean_pressure_det.is_some());
        }
        // finer levels are closer to the reference
        assert!(r.levels[2].mean_error < r.levels[0].mean_error);
        let mut last = 0.0;
        for eps in [0.25, 0.5, 1.0, 2.0, 1e6] {
            let a = r.acceptance_fraction(0, eps).unwrap();
            assert!(a >= last);
            last = a;
        }
        assert_eq!(last, 1.0);
        assert!(r.rate(RateParameter::Dt).is_some(), "{:?} {:?}", r.warnings, r.levels);
        assert!(r.rate(RateParameter::H).is_none());
    }

    #[test]
    fn deterministic_and_ordered() {
        let mut c = small();
        c.noise_kind = NoiseKind::NonlinearMult;
        let a = run_convergence_experiment(&c).unwrap();
        let b = run_convergence_experiment(&c).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn closed_form_reference() {
        let mut c = ExperimentConfig::deterministic_temporal();
        c.levels = vec![[8, 2], [8, 4], [8, 8]];
        c.reference = [8, 8];
        let r = run_convergence_experiment(&c).unwrap();
        assert_eq!(r.records.len(), 3);
        let e: Vec<f64> = r.levels.iter().map(|l| l.mean_error).collect();
        assert!(e[0] > e[1] && e[1] > e[2], "{e:?}");
        // the sample sets do not truncate noise-free rates
        assert!(r.rate(RateParameter::Dt).is_some_and(|f| f.slope > 1.0), "{:?}", r.rates);
    }

    #[test]
    fn coupled_levels_share_brownian_values() {
        let c = small();
        let fine = sample_path(16, 4, 0.25, c.master_seed, 1).unwrap();
        for m in [2, 4, 8] {
            let coarse = coarsen_path(&fine, 16 / m).unwrap();
            for j in 0..=m {
                let a = coarse.brownian_at(j);
                let b = fine.brownian_at(j * 16 / m);
                for k in 0..4 {
                    assert!((a[k] - b[k]).abs() < 1e-12);
                }
            }
        }
    }
}
