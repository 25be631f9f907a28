//! Implicit Euler-Maruyama discretizations.
//!
//! Both schemes advance `u_{m-1} -> u_m` by solving
//!
//! ```text
//! (u_m - u_{m-1}, v) + dt c(b; u_m, v) + mu dt (grad u_m, grad v) - (p_m, div v) = (Phi(u_{m-1}) dW_m, v)
//! (div u_m, q) = 0
//! ```
//!
//! The fully discrete scheme freezes the transport `b = u_{m-1}` and solves one
//! linear system per step. The time-discrete scheme takes `b = u_m` and
//! resolves the nonlinearity by Picard iteration; it is meant to run on a
//! fine space standing in for the continuous one.

use std::fmt;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::assembly::apply_block_scalar;
use crate::fem::{
    assemble_divergence, assemble_mass, assemble_stiffness, pressure_weights, ConvectionAssembler, ConvectionForm,
    FeSpace, FieldKind, SaddleSystem, SparseOperator, VelocityProjector,
};
use crate::noise::{standard_normal, NoiseAssembler, NoiseModel, SeedRecord, WienerPath};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SchemeKind {
    /// Fully implicit convection, Picard iteration (semi-discrete surrogate).
    #[serde(rename = "tdiscr")]
    TimeDiscrete,
    /// Linearized convection, one saddle solve per step.
    #[serde(rename = "txdiscr")]
    FullyDiscrete,
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SchemeKind::TimeDiscrete => "tdiscr",
            SchemeKind::FullyDiscrete => "txdiscr",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeConfig {
    pub viscosity: f64,
    pub horizon: f64,
    pub steps: usize,
    #[serde(default)]
    pub convection: ConvectionForm,
    /// Drops the convection term altogether (Stokes / heat checks).
    #[serde(default = "default_true")]
    pub include_convection: bool,
    #[serde(default = "default_picard_tolerance")]
    pub picard_tolerance: f64,
    #[serde(default = "default_picard_sweeps")]
    pub picard_max_sweeps: usize,
}

fn default_true() -> bool {
    true
}

fn default_picard_tolerance() -> f64 {
    1e-10
}

fn default_picard_sweeps() -> usize {
    50
}

impl SchemeConfig {
    pub fn new(viscosity: f64, horizon: f64, steps: usize) -> Self {
        Self {
            viscosity,
            horizon,
            steps,
            convection: ConvectionForm::default(),
            include_convection: true,
            picard_tolerance: default_picard_tolerance(),
            picard_max_sweeps: default_picard_sweeps(),
        }
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.viscosity > 0.0) || !self.viscosity.is_finite() {
            return Err(Error::Config(format!("viscosity must be positive, got {}", self.viscosity)));
        }
        if !(self.horizon > 0.0) || !self.horizon.is_finite() || self.steps == 0 {
            return Err(Error::Config(format!(
                "need a positive horizon and at least one step, got T = {} and M = {}",
                self.horizon, self.steps
            )));
        }
        if !(self.picard_tolerance > 0.0) || self.picard_max_sweeps == 0 {
            return Err(Error::Config("Picard tolerance and sweep limit must be positive".into()));
        }
        Ok(())
    }
}

/// Operators of one space shared by schemes, trajectories and error norms.
#[derive(Debug)]
pub struct SpaceOperators {
    pub space: Arc<FeSpace>,
    pub mass: SparseOperator,
    pub stiffness: SparseOperator,
    pub divergence: SparseOperator,
}

impl SpaceOperators {
    pub fn new(space: &Arc<FeSpace>) -> Arc<Self> {
        Arc::new(Self {
            space: space.clone(),
            mass: assemble_mass(space, FieldKind::Velocity),
            stiffness: assemble_stiffness(space),
            divergence: assemble_divergence(space),
        })
    }

    pub fn l2_sq(&self, v: &[f64]) -> f64 {
        self.mass.quad_form(v)
    }

    pub fn gradient_sq(&self, v: &[f64]) -> f64 {
        self.stiffness.quad_form(v)
    }

    pub fn h1_sq(&self, v: &[f64]) -> f64 {
        self.l2_sq(v) + self.gradient_sq(v)
    }

    /// `max_q |int div(v) q|` over the pressure basis.
    pub fn divergence_residual(&self, v: &[f64]) -> f64 {
        self.divergence.apply(v).iter().fold(0.0, |a, b| a.max(b.abs()))
    }
}

/// Per-step diagnostics of a trajectory, for steps `1..=M`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StepDiagnostics {
    /// `||u_m||^2`
    pub energy: f64,
    /// `||grad u_m||^2`
    pub gradient: f64,
    /// `||u_m - u_{m-1}||^2`
    pub increment: f64,
    /// `||u_m - u_{m-1}||^2_{W^{1,2}}`
    pub increment_h1: f64,
    pub divergence_residual: f64,
    pub sweeps: usize,
    pub solver_iterations: usize,
}

#[derive(Debug, Clone)]
pub struct StepOutput {
    pub velocity: Vec<f64>,
    pub pressure: Vec<f64>,
    pub sweeps: usize,
    pub solver_iterations: usize,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub operators: Arc<SpaceOperators>,
    pub scheme: SchemeKind,
    pub dt: f64,
    /// `u_0, ..., u_M`
    pub velocities: Vec<Vec<f64>>,
    /// `p_1, ..., p_M`
    pub pressures: Vec<Vec<f64>>,
    pub diagnostics: Vec<StepDiagnostics>,
    pub seed: SeedRecord,
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.velocities.len() - 1
    }

    pub fn space(&self) -> &Arc<FeSpace> {
        &self.operators.space
    }
}

/// Left-hand-side building blocks of the discrete stability estimates.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyReport {
    /// `max_{m>=1} ||u_m||^2`
    pub max_energy: f64,
    /// `dt sum_{m>=1} ||grad u_m||^2`
    pub dissipation: f64,
    /// `sum_{m>=1} ||u_m - u_{m-1}||^2_{W^{1,2}}`
    pub increments: f64,
    /// `max_{m>=1} ||grad u_m||^2`
    pub max_gradient: f64,
}

/// Recomputes the stability statistics from the iterates.
pub fn energy_report(traj: &Trajectory) -> EnergyReport {
    let ops = &traj.operators;
    let mut r = EnergyReport::default();
    for m in 1..traj.velocities.len() {
        let u = &traj.velocities[m];
        let g = ops.gradient_sq(u);
        r.max_energy = r.max_energy.max(ops.l2_sq(u));
        r.max_gradient = r.max_gradient.max(g);
        r.dissipation += traj.dt * g;
        let d: Vec<f64> = u.iter().zip(&traj.velocities[m - 1]).map(|(a, b)| a - b).collect();
        r.increments += ops.h1_sq(&d);
    }
    r
}

/// Initial velocity before projection into the discrete space. Every option
/// is a stream-function field `curl psi`, hence already divergence-free.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum InitialData {
    #[default]
    Zero,
    /// `amplitude * curl(sin x sin y) = amplitude * (sin x cos y, -cos x sin y)`
    TaylorGreen { amplitude: f64 },
    /// Random stream function with modes up to `max_wavenumber` and
    /// coefficient decay `|kappa|^{-slope}`, rescaled to RMS speed `amplitude`.
    RandomBandLimited {
        seed: u64,
        max_wavenumber: i32,
        slope: f64,
        amplitude: f64,
    },
}

/// Taylor-Green vortex `e^{-2 mu t} (sin x cos y, -cos x sin y)`, an exact
/// solution of the unforced equations.
pub fn taylor_green(x: [f64; 2], t: f64, viscosity: f64, amplitude: f64) -> [f64; 2] {
    let d = amplitude * (-2.0 * viscosity * t).exp();
    [d * x[0].sin() * x[1].cos(), -d * x[0].cos() * x[1].sin()]
}

/// Jacobian `J[i][j] = d u_i / d x_j` of [`taylor_green`].
pub fn taylor_green_jacobian(x: [f64; 2], t: f64, viscosity: f64, amplitude: f64) -> [[f64; 2]; 2] {
    let d = amplitude * (-2.0 * viscosity * t).exp();
    let (s0, c0) = x[0].sin_cos();
    let (s1, c1) = x[1].sin_cos();
    [[d * c0 * c1, -d * s0 * s1], [d * s0 * s1, -d * c0 * c1]]
}

impl InitialData {
    /// Pointwise field.
    pub fn field(&self) -> Result<Box<dyn Fn([f64; 2]) -> [f64; 2] + Send + Sync>> {
        match *self {
            InitialData::Zero => Ok(Box::new(|_| [0.0; 2])),
            InitialData::TaylorGreen { amplitude } => Ok(Box::new(move |x| taylor_green(x, 0.0, 1.0, amplitude))),
            InitialData::RandomBandLimited {
                seed,
                max_wavenumber,
                slope,
                amplitude,
            } => {
                if max_wavenumber < 1 || !slope.is_finite() || !amplitude.is_finite() {
                    return Err(Error::Config(format!(
                        "random initial data needs max_wavenumber >= 1 and finite slope/amplitude, got {max_wavenumber}, {slope}, {amplitude}"
                    )));
                }
                let record = SeedRecord {
                    master_seed: seed,
                    path_id: u64::MAX,
                };
                // (kappa, a, b) for psi = sum a cos(kappa.x) + b sin(kappa.x)
                let mut terms = Vec::new();
                let mut energy = 0.0;
                for k1 in 0..=max_wavenumber {
                    for k2 in -max_wavenumber..=max_wavenumber {
                        if k1 == 0 && k2 <= 0 {
                            continue;
                        }
                        let k2sq = (k1 * k1 + k2 * k2) as f64;
                        let decay = k2sq.sqrt().powf(-slope);
                        let idx = 2 * terms.len();
                        let a = decay * standard_normal(record, idx, 0);
                        let b = decay * standard_normal(record, idx + 1, 0);
                        // ||curl(a cos + b sin)||^2 = 2 pi^2 |kappa|^2 (a^2 + b^2)
                        energy += 2.0 * std::f64::consts::PI.powi(2) * k2sq * (a * a + b * b);
                        terms.push(([k1 as f64, k2 as f64], a, b));
                    }
                }
                let target = amplitude * amplitude * 4.0 * std::f64::consts::PI.powi(2);
                let scale = if energy > 0.0 { (target / energy).sqrt() } else { 0.0 };
                Ok(Box::new(move |x| {
                    let mut u = [0.0; 2];
                    for &(k, a, b) in &terms {
                        let (s, c) = (k[0] * x[0] + k[1] * x[1]).sin_cos();
                        // d psi / d phase
                        let dpsi = scale * (-a * s + b * c);
                        u[0] += dpsi * k[1];
                        u[1] -= dpsi * k[0];
                    }
                    u
                }))
            }
        }
    }

    /// `Pi_h u_0`: the L² projection onto the discretely divergence-free space.
    pub fn project(&self, space: &Arc<FeSpace>) -> Result<Vec<f64>> {
        if *self == InitialData::Zero {
            return Ok(vec![0.0; space.n_velocity()]);
        }
        let f = self.field()?;
        Ok(VelocityProjector::new(space)?.project_fn(f)?.coeffs)
    }
}

/// One scheme on one space with one step size. Immutable; share across paths.
pub struct Scheme {
    operators: Arc<SpaceOperators>,
    config: SchemeConfig,
    noise: NoiseAssembler,
    system: SaddleSystem,
    convection: ConvectionAssembler,
}

impl fmt::Debug for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Scheme")
            .field("n_velocity", &self.operators.space.n_velocity())
            .field("config", &self.config)
            .finish()
    }
}

impl Scheme {
    pub fn new(operators: &Arc<SpaceOperators>, config: &SchemeConfig, noise: &NoiseModel) -> Result<Self> {
        config.validate()?;
        let space = &operators.space;
        let a = SparseOperator::linear_combination(
            1.0,
            &operators.mass,
            config.viscosity * config.dt(),
            &operators.stiffness,
        );
        let system = SaddleSystem::new(a, operators.divergence.clone(), pressure_weights(space))?;
        Ok(Self {
            operators: operators.clone(),
            config: config.clone(),
            noise: NoiseAssembler::new(noise, space),
            system,
            convection: ConvectionAssembler::new(space),
        })
    }

    pub fn operators(&self) -> &Arc<SpaceOperators> {
        &self.operators
    }

    pub fn config(&self) -> &SchemeConfig {
        &self.config
    }

    pub fn noise(&self) -> &NoiseModel {
        self.noise.model()
    }

    pub fn dt(&self) -> f64 {
        self.config.dt()
    }

    /// Solves the linear step with transport `b` (or none) and load `f`.
    fn solve_linear(&self, transport: Option<&[f64]>, f: &[f64]) -> Result<(Vec<f64>, Vec<f64>, usize)> {
        let g = vec![0.0; self.operators.space.n_pressure()];
        let transport = transport.filter(|b| self.config.include_convection && b.iter().any(|&v| v != 0.0));
        let sol = match transport {
            None => self.system.solve(f, &g)?,
            Some(b) => {
                let mut block = self.convection.pattern().clone();
                self.convection
                    .assemble_into(&self.operators.space, b, self.config.convection, block.values_mut());
                let dt = self.dt();
                let perturb = |x: &[f64], y: &mut [f64]| apply_block_scalar(&block, dt, x, y);
                self.system.solve_perturbed(Some(&perturb), f, &g)?
            }
        };
        Ok((sol.velocity, sol.pressure, sol.iterations))
    }

    fn load(&self, previous: &[f64], increments: &[f64]) -> Result<Vec<f64>> {
        let mut f = self.operators.mass.apply(previous);
        if self.noise.model().scale() != 0.0 {
            let noise = self.noise.apply(previous, increments)?;
            f.iter_mut().zip(&noise).for_each(|(a, b)| *a += b);
        }
        Ok(f)
    }

    /// One step of the linearized scheme.
    pub fn step_fully_discrete(&self, previous: &[f64], increments: &[f64]) -> Result<StepOutput> {
        let f = self.load(previous, increments)?;
        let (velocity, pressure, solver_iterations) = self.solve_linear(Some(previous), &f)?;
        Ok(StepOutput {
            velocity,
            pressure,
            sweeps: 1,
            solver_iterations,
        })
    }

    /// One step of the fully implicit scheme. Sweeps stop once the `W^{1,2}`
    /// norm of the update is below the tolerance, taken relative to the
    /// iterate when that exceeds one.
    pub fn step_time_discrete(&self, previous: &[f64], increments: &[f64]) -> Result<StepOutput> {
        let f = self.load(previous, increments)?;
        let mut iterate = previous.to_vec();
        let mut solver_iterations = 0;
        let mut update = f64::INFINITY;
        for sweep in 1..=self.config.picard_max_sweeps {
            let (next, pressure, its) = self.solve_linear(Some(&iterate), &f)?;
            solver_iterations += its;
            let diff: Vec<f64> = next.iter().zip(&iterate).map(|(a, b)| a - b).collect();
            update = self.operators.h1_sq(&diff).sqrt();
            let size = self.operators.h1_sq(&next).sqrt().max(1.0);
            iterate = next;
            if update <= self.config.picard_tolerance * size {
                return Ok(StepOutput {
                    velocity: iterate,
                    pressure,
                    sweeps: sweep,
                    solver_iterations,
                });
            }
        }
        Err(Error::PicardNotConverged {
            sweeps: self.config.picard_max_sweeps,
            update,
        })
    }

    pub fn step(&self, which: SchemeKind, previous: &[f64], increments: &[f64]) -> Result<StepOutput> {
        match which {
            SchemeKind::FullyDiscrete => self.step_fully_discrete(previous, increments),
            SchemeKind::TimeDiscrete => self.step_time_discrete(previous, increments),
        }
    }

    /// Advances `u_0` through all increments of `path`.
    pub fn run(&self, which: SchemeKind, u0: &[f64], path: &WienerPath) -> Result<Trajectory> {
        if path.steps() != self.config.steps
            || path.modes() != self.noise.model().modes()
            || (path.horizon() - self.config.horizon).abs() > 1e-12 * self.config.horizon
        {
            return Err(Error::InvalidArgument(format!(
                "path with {} steps, {} modes and horizon {} does not match the scheme ({} steps, {} modes, horizon {})",
                path.steps(),
                path.modes(),
                path.horizon(),
                self.config.steps,
                self.noise.model().modes(),
                self.config.horizon
            )));
        }
        if u0.len() != self.operators.space.n_velocity() {
            return Err(Error::InvalidArgument("initial velocity has the wrong length".into()));
        }
        let ops = &self.operators;
        let mut velocities = Vec::with_capacity(path.steps() + 1);
        let mut pressures = Vec::with_capacity(path.steps());
        let mut diagnostics = Vec::with_capacity(path.steps());
        velocities.push(u0.to_vec());
        for m in 1..=path.steps() {
            let prev = &velocities[m - 1];
            let out = self.step(which, prev, path.row(m)).map_err(|e| Error::Step {
                step: m,
                source: Box::new(e),
            })?;
            let d: Vec<f64> = out.velocity.iter().zip(prev).map(|(a, b)| a - b).collect();
            let increment = ops.l2_sq(&d);
            diagnostics.push(StepDiagnostics {
                energy: ops.l2_sq(&out.velocity),
                gradient: ops.gradient_sq(&out.velocity),
                increment,
                increment_h1: increment + ops.gradient_sq(&d),
                divergence_residual: ops.divergence_residual(&out.velocity),
                sweeps: out.sweeps,
                solver_iterations: out.solver_iterations,
            });
            velocities.push(out.velocity);
            pressures.push(out.pressure);
        }
        Ok(Trajectory {
            operators: ops.clone(),
            scheme: which,
            dt: self.dt(),
            velocities,
            pressures,
            diagnostics,
            seed: path.seed(),
        })
    }
}

/// Builds the scheme and runs it once.
pub fn run_scheme(
    operators: &Arc<SpaceOperators>,
    u0: &[f64],
    path: &WienerPath,
    config: &SchemeConfig,
    noise: &NoiseModel,
    which: SchemeKind,
) -> Result<Trajectory> {
    Scheme::new(operators, config, noise)?.run(which, u0, path)
}

const CHECKPOINT_MAGIC: &str = "stochns-checkpoint";

/// Writes iterate `m` as a one-line text header followed by little-endian
/// `f64` coefficients.
pub fn write_checkpoint(traj: &Trajectory, m: usize, path: &Path) -> Result<()> {
    let u = traj
        .velocities
        .get(m)
        .ok_or_else(|| Error::InvalidArgument(format!("no iterate {m} in a trajectory of {} steps", traj.steps())))?;
    let space = traj.space();
    let pair = space.pair();
    let header = format!(
        "{CHECKPOINT_MAGIC} step={m} dt={:e} scheme={} n={} pair={}/{} len={}\n",
        traj.dt,
        traj.scheme,
        space.mesh().n(),
        pair.velocity_degree,
        pair.pressure_degree,
        u.len()
    );
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut bytes = header.into_bytes();
    bytes.reserve(8 * u.len());
    for v in u {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    file.write_all(&bytes).map_err(|e| Error::io(path, e))
}

/// Header fields and coefficients of a checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub step: usize,
    pub dt: f64,
    pub mesh_n: usize,
    pub coeffs: Vec<f64>,
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let mut header = String::new();
    reader.read_line(&mut header).map_err(|e| Error::io(path, e))?;
    let bad = |what: &str| Error::Config(format!("{}: malformed checkpoint header ({what})", path.display()));
    let mut fields = header.split_whitespace();
    if fields.next() != Some(CHECKPOINT_MAGIC) {
        return Err(bad("magic"));
    }
    let mut step = None;
    let mut dt = None;
    let mut mesh_n = None;
    let mut len = None;
    for f in fields {
        let (key, value) = f.split_once('=').ok_or_else(|| bad(f))?;
        match key {
            "step" => step = value.parse().ok(),
            "dt" => dt = value.parse().ok(),
            "n" => mesh_n = value.parse().ok(),
            "len" => len = value.parse::<usize>().ok(),
            _ => {}
        }
    }
    let (step, dt, mesh_n, len) = match (step, dt, mesh_n, len) {
        (Some(a), Some(b), Some(c), Some(d)) => (a, b, c, d),
        _ => return Err(bad("missing field")),
    };
    let mut raw = Vec::new();
    reader.read_to_end(&mut raw).map_err(|e| Error::io(path, e))?;
    if raw.len() != 8 * len {
        return Err(bad("payload length"));
    }
    let coeffs = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Ok(Checkpoint {
        step,
        dt,
        mesh_n,
        coeffs,
    })
}
