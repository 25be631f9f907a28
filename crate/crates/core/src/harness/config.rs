//! Experiment configuration, read from and echoed to flat TOML files.
//!
//! Every key is optional except `levels` and `reference`:
//!
//! ```toml
//! label = "stochastic"
//! levels = [[32, 16], [32, 32], [32, 64]]   # (mesh n, time steps M)
//! reference = [32, 512]
//! reference_kind = "same_path"              # or "taylor_green"
//! scheme = "txdiscr"                        # scheme of the tested levels
//! reference_scheme = "txdiscr"              # or "tdiscr" (Picard)
//! paths = 32
//! master_seed = 2024
//! epsilon = 1.0
//! coupling_constant = 1.0
//! viscosity = 1.0
//! horizon = 0.5
//! convection = "skew"                       # or "full" (unhalved divergence term)
//! noise_kind = "additive"                   # linear_mult, nonlinear_mult
//! noise_decay = 2.0
//! noise_scale = 0.15
//! noise_modes = 16
//! initial = "zero"                          # taylor_green, random
//! initial_amplitude = 1.0
//! initial_seed = 0
//! initial_max_wavenumber = 4
//! initial_slope = 2.0
//! picard_tolerance = 1e-10
//! picard_max_sweeps = 50
//! pressure_diagnostics = true
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::ConvectionForm;
use crate::noise::{make_default_family, NoiseKind, NoiseModel};
use crate::schemes::{InitialData, SchemeConfig, SchemeKind};

/// Coarsest mesh accepted in a level schedule.
pub const MIN_MESH_N: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceKind {
    /// Finest level run on the same Brownian path.
    #[default]
    SamePath,
    /// Closed-form Taylor-Green vortex (noise-free runs only).
    TaylorGreen,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InitialKind {
    #[default]
    Zero,
    TaylorGreen,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "defaults::label")]
    pub label: String,
    /// `(n, M)` pairs of the tested levels.
    pub levels: Vec<[usize; 2]>,
    pub reference: [usize; 2],
    #[serde(default)]
    pub reference_kind: ReferenceKind,
    #[serde(default = "defaults::scheme")]
    pub scheme: SchemeKind,
    #[serde(default = "defaults::scheme")]
    pub reference_scheme: SchemeKind,
    #[serde(default = "defaults::paths")]
    pub paths: usize,
    #[serde(default = "defaults::master_seed")]
    pub master_seed: u64,
    #[serde(default = "defaults::one")]
    pub epsilon: f64,
    #[serde(default = "defaults::one")]
    pub coupling_constant: f64,
    #[serde(default = "defaults::one")]
    pub viscosity: f64,
    #[serde(default = "defaults::horizon")]
    pub horizon: f64,
    #[serde(default)]
    pub convection: ConvectionForm,
    #[serde(default)]
    pub noise_kind: NoiseKind,
    #[serde(default = "defaults::decay")]
    pub noise_decay: f64,
    #[serde(default = "defaults::noise_scale")]
    pub noise_scale: f64,
    #[serde(default = "defaults::modes")]
    pub noise_modes: usize,
    #[serde(default)]
    pub initial: InitialKind,
    #[serde(default = "defaults::one")]
    pub initial_amplitude: f64,
    #[serde(default)]
    pub initial_seed: u64,
    #[serde(default = "defaults::max_wavenumber")]
    pub initial_max_wavenumber: i32,
    #[serde(default = "defaults::decay")]
    pub initial_slope: f64,
    #[serde(default = "defaults::picard_tolerance")]
    pub picard_tolerance: f64,
    #[serde(default = "defaults::picard_sweeps")]
    pub picard_max_sweeps: usize,
    #[serde(default = "defaults::yes")]
    pub pressure_diagnostics: bool,
}

mod defaults {
    use crate::schemes::SchemeKind;

    pub fn label() -> String {
        "experiment".into()
    }
    pub fn scheme() -> SchemeKind {
        SchemeKind::FullyDiscrete
    }
    pub fn paths() -> usize {
        32
    }
    pub fn master_seed() -> u64 {
        2024
    }
    pub fn one() -> f64 {
        1.0
    }
    pub fn horizon() -> f64 {
        0.5
    }
    pub fn decay() -> f64 {
        2.0
    }
    pub fn noise_scale() -> f64 {
        0.15
    }
    pub fn modes() -> usize {
        16
    }
    pub fn max_wavenumber() -> i32 {
        4
    }
    pub fn picard_tolerance() -> f64 {
        1e-10
    }
    pub fn picard_sweeps() -> usize {
        50
    }
    pub fn yes() -> bool {
        true
    }
}

impl ExperimentConfig {
    /// A config with every optional key at its default.
    pub fn new(levels: Vec<[usize; 2]>, reference: [usize; 2]) -> Self {
        Self {
            label: defaults::label(),
            levels,
            reference,
            reference_kind: ReferenceKind::SamePath,
            scheme: defaults::scheme(),
            reference_scheme: defaults::scheme(),
            paths: defaults::paths(),
            master_seed: defaults::master_seed(),
            epsilon: 1.0,
            coupling_constant: 1.0,
            viscosity: 1.0,
            horizon: defaults::horizon(),
            convection: ConvectionForm::default(),
            noise_kind: NoiseKind::Additive,
            noise_decay: defaults::decay(),
            noise_scale: defaults::noise_scale(),
            noise_modes: defaults::modes(),
            initial: InitialKind::Zero,
            initial_amplitude: 1.0,
            initial_seed: 0,
            initial_max_wavenumber: defaults::max_wavenumber(),
            initial_slope: defaults::decay(),
            picard_tolerance: defaults::picard_tolerance(),
            picard_max_sweeps: defaults::picard_sweeps(),
            pressure_diagnostics: true,
        }
    }

    /// Temporal sweep with additive noise on a fixed mesh against a
    /// same-path reference with many more steps.
    pub fn stochastic_default() -> Self {
        let mut c = Self::new(vec![[32, 16], [32, 32], [32, 64]], [32, 512]);
        c.label = "stochastic".into();
        c
    }

    /// Noise-free Taylor-Green runs against the closed form, varying `M` on a fine mesh.
    pub fn deterministic_temporal() -> Self {
        let mut c = Self::new(vec![[64, 8], [64, 16], [64, 32], [64, 64]], [64, 64]);
        c.label = "deterministic-temporal".into();
        c.deterministic_taylor_green();
        c
    }

    /// Noise-free Taylor-Green runs against the closed form, varying `n` with many steps.
    pub fn deterministic_spatial() -> Self {
        let mut c = Self::new(vec![[8, 512], [16, 512], [32, 512]], [32, 512]);
        c.label = "deterministic-spatial".into();
        c.deterministic_taylor_green();
        c
    }

    fn deterministic_taylor_green(&mut self) {
        self.reference_kind = ReferenceKind::TaylorGreen;
        self.paths = 1;
        self.noise_scale = 0.0;
        self.initial = InitialKind::TaylorGreen;
        self.initial_amplitude = 1.0;
        self.viscosity = 1.0;
        self.horizon = 0.5;
        self.pressure_diagnostics = false;
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn noise(&self) -> Result<NoiseModel> {
        make_default_family(self.noise_decay, self.noise_scale, self.noise_kind, self.noise_modes)
    }

    pub fn initial_data(&self) -> InitialData {
        match self.initial {
            InitialKind::Zero => InitialData::Zero,
            InitialKind::TaylorGreen => InitialData::TaylorGreen {
                amplitude: self.initial_amplitude,
            },
            InitialKind::Random => InitialData::RandomBandLimited {
                seed: self.initial_seed,
                max_wavenumber: self.initial_max_wavenumber,
                slope: self.initial_slope,
                amplitude: self.initial_amplitude,
            },
        }
    }

    pub fn scheme_config(&self, steps: usize) -> SchemeConfig {
        SchemeConfig {
            viscosity: self.viscosity,
            horizon: self.horizon,
            steps,
            convection: self.convection,
            include_convection: true,
            picard_tolerance: self.picard_tolerance,
            picard_max_sweeps: self.picard_max_sweeps,
        }
    }

    /// Mesh size `h` of level `n`.
    pub fn mesh_size(n: usize) -> f64 {
        std::f64::consts::SQRT_2 * crate::mesh::PERIOD / n as f64
    }

    /// Checks the config and returns warnings about violated (but
    /// non-fatal) hypotheses.
    pub fn validate(&self) -> Result<Vec<String>> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.levels.is_empty() {
            return bad("at least one level is required".into());
        }
        if self.paths == 0 {
            return bad("paths must be at least 1".into());
        }
        if !(self.epsilon > 0.0) || !(self.coupling_constant > 0.0) {
            return bad("epsilon and coupling_constant must be positive".into());
        }
        let [nr, mr] = self.reference;
        for &[n, m] in self.levels.iter().chain(std::iter::once(&self.reference)) {
            if n < MIN_MESH_N || m == 0 {
                return bad(format!("level ({n}, {m}) needs n >= {} and M >= 1", MIN_MESH_N));
            }
        }
        self.scheme_config(mr).validate()?;
        let mut warnings = Vec::new();
        match self.reference_kind {
            ReferenceKind::SamePath => {
                for &[n, m] in &self.levels {
                    if n > nr || m > mr || nr % n != 0 || mr % m != 0 {
                        return bad(format!(
                            "level ({n}, {m}) is not nested in the reference ({nr}, {mr}); both n and M must divide the reference values"
                        ));
                    }
                    if n == nr && m == mr {
                        warnings.push(format!("level ({n}, {m}) coincides with the reference; its error is zero"));
                    }
                }
            }
            ReferenceKind::TaylorGreen => {
                if self.noise_scale != 0.0 || self.initial != InitialKind::TaylorGreen {
                    return bad("the closed-form reference needs noise_scale = 0 and initial = \"taylor_green\"".into());
                }
            }
        }
        for &[n, m] in &self.levels {
            let h = Self::mesh_size(n);
            let dt = self.horizon / m as f64;
            if h >= 1.0 {
                warnings.push(format!(
                    "level ({n}, {m}): h = {h:.4} >= 1, the space indicator is not applicable and is left out"
                ));
            } else if self.coupling_constant * dt > 1.0 / (-self.epsilon * h.ln()) {
                warnings.push(format!(
                    "level ({n}, {m}): L dt = {:.4e} exceeds 1 / (-eps log h) = {:.4e}",
                    self.coupling_constant * dt,
                    1.0 / (-self.epsilon * h.ln())
                ));
            }
            if dt >= 1.0 {
                warnings.push(format!("level ({n}, {m}): dt = {dt} >= 1, the time indicator is not applicable"));
            }
        }
        Ok(warnings)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_roundtrip() {
        let c = ExperimentConfig::stochastic_default();
        let text = c.to_toml().unwrap();
        assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), c);
    }

    #[test]
    fn minimal_file_uses_defaults() {
        let c = ExperimentConfig::from_toml("levels = [[8, 4], [8, 8]]\nreference = [16, 16]\nnoise_kind = \"linear_mult\"\n").unwrap();
        assert_eq!(c.paths, 32);
        assert_eq!(c.noise_kind, NoiseKind::LinearMult);
        assert_eq!(c.convection, ConvectionForm::Skew);
        assert!(ExperimentConfig::from_toml("levels = []\nreference = [4, 4]\nbogus = 1\n").is_err());
    }

    #[test]
    fn validation() {
        assert!(ExperimentConfig::stochastic_default().validate().unwrap().is_empty());
        let mut c = ExperimentConfig::new(vec![[8, 4]], [12, 8]);
        assert!(c.validate().is_err());
        c.reference = [16, 6];
        assert!(c.validate().is_err());
        c.reference = [8, 4];
        let w = c.validate().unwrap();
        assert!(w.iter().any(|s| s.contains("coincides")));
        assert!(w.iter().any(|s| s.contains("not applicable")));
        c.reference_kind = ReferenceKind::TaylorGreen;
        assert!(c.validate().is_err());
        c.viscosity = 0.0;
        assert!(c.validate().is_err());
        assert!(ExperimentConfig::deterministic_temporal().validate().is_ok());
    }

    #[test]
    fn coupling_warning() {
        let mut c = ExperimentConfig::new(vec![[16, 2]], [16, 4]);
        c.horizon = 1.0;
        c.coupling_constant = 10.0;
        assert!(c.validate().unwrap().iter().any(|s| s.contains("exceeds")));
    }
}
