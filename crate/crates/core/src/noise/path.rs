//! Brownian increments from a counter-based generator.
//!
//! The draw for mode `k` at step `m` of path `path_id` is taken from ChaCha8
//! block `(m << 32) | k` of stream `path_id` under the master seed, so every
//! increment is addressable without generating the ones before it.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedRecord {
    pub master_seed: u64,
    pub path_id: u64,
}

/// Standard normal draw keyed by `(seed, path, mode, step)`.
pub fn standard_normal(seed: SeedRecord, mode: usize, step: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.master_seed);
    rng.set_stream(seed.path_id);
    let block = ((step as u128) << 32) | mode as u128;
    rng.set_word_pos(block * 16);
    let a = rng.next_u64();
    let b = rng.next_u64();
    // u1 in (0, 1], u2 in [0, 1)
    let u1 = ((a >> 11) + 1) as f64 * f64::EPSILON / 2.0;
    let u2 = (b >> 11) as f64 * f64::EPSILON / 2.0;
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Increments `beta_k(t_m) - beta_k(t_{m-1})` for `M` steps and `K` modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WienerPath {
    steps: usize,
    modes: usize,
    horizon: f64,
    /// Row-major `steps x modes`.
    increments: Vec<f64>,
    seed: SeedRecord,
}

impl WienerPath {
    pub fn from_increments(steps: usize, modes: usize, horizon: f64, increments: Vec<f64>, seed: SeedRecord) -> Result<Self> {
        if steps == 0 || modes == 0 || increments.len() != steps * modes || !(horizon > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "inconsistent Wiener path: {steps} steps, {modes} modes, {} increments, horizon {horizon}",
                increments.len()
            )));
        }
        Ok(Self {
            steps,
            modes,
            horizon,
            increments,
            seed,
        })
    }

    /// A path with all increments zero (deterministic runs).
    pub fn zeros(steps: usize, modes: usize, horizon: f64) -> Result<Self> {
        let seed = SeedRecord { master_seed: 0, path_id: 0 };
        Self::from_increments(steps, modes, horizon, vec![0.0; steps * modes], seed)
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn seed(&self) -> SeedRecord {
        self.seed
    }

    /// Increments of step `m` (1-based, as in `t_{m-1} -> t_m`).
    pub fn row(&self, m: usize) -> &[f64] {
        assert!(m >= 1 && m <= self.steps, "step {m} out of range 1..={}", self.steps);
        &self.increments[(m - 1) * self.modes..m * self.modes]
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    /// Brownian values `beta_k(t_m)`.
    pub fn brownian_at(&self, m: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.modes];
        for step in 1..=m {
            for (o, d) in out.iter_mut().zip(self.row(step)) {
                *o += d;
            }
        }
        out
    }

    /// The first `m` steps of the path.
    pub fn truncate(&self, m: usize) -> Result<Self> {
        if m == 0 || m > self.steps {
            return Err(Error::InvalidArgument(format!("cannot truncate {} steps to {m}", self.steps)));
        }
        Self::from_increments(
            m,
            self.modes,
            self.dt() * m as f64,
            self.increments[..m * self.modes].to_vec(),
            self.seed,
        )
    }
}

/// Samples `steps x modes` increments with variance `horizon / steps`.
pub fn sample_path(steps: usize, modes: usize, horizon: f64, master_seed: u64, path_id: u64) -> Result<WienerPath> {
    if steps == 0 || modes == 0 {
        return Err(Error::InvalidArgument("a Wiener path needs at least one step and one mode".into()));
    }
    let seed = SeedRecord { master_seed, path_id };
    let sd = (horizon / steps as f64).sqrt();
    let mut increments = Vec::with_capacity(steps * modes);
    for m in 0..steps {
        for k in 0..modes {
            increments.push(sd * standard_normal(seed, k, m));
        }
    }
    WienerPath::from_increments(steps, modes, horizon, increments, seed)
}

/// Sums `factor` consecutive increments: the same Brownian path on a coarser grid.
pub fn coarsen_path(path: &WienerPath, factor: usize) -> Result<WienerPath> {
    if factor == 0 || !path.steps.is_multiple_of(factor) {
        return Err(Error::InvalidArgument(format!(
            "coarsening factor {factor} does not divide {} steps",
            path.steps
        )));
    }
    let steps = path.steps / factor;
    let k = path.modes;
    let mut increments = vec![0.0; steps * k];
    for m in 0..steps {
        for fine in m * factor..(m + 1) * factor {
            for j in 0..k {
                increments[m * k + j] += path.increments[fine * k + j];
            }
        }
    }
    WienerPath::from_increments(steps, k, path.horizon, increments, path.seed)
}
