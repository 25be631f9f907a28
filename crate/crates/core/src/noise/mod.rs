//! Truncated cylindrical Wiener noise.
//!
//! Mode `k = 1, 2, ...` of the default family is
//!
//! ```text
//! g_k(x, xi) = scale * j^{-s} * rho_j(x) * psi_c(xi) * e_c,   j = ceil(k / 2), c = (k - 1) mod 2
//! ```
//!
//! where `rho_1, rho_2, ...` is the real trigonometric basis `cos(kappa.x)`,
//! `sin(kappa.x)` over half-plane wavevectors sorted by `|kappa|`, and
//! `psi_c` is `1`, `xi_c` or `sqrt(1 + |xi|^2)` for additive, linear and
//! nonlinear multiplicative noise. So mode 1 is `(cos x, 0)`, mode 2 is
//! `(0, cos x)`, mode 3 is `(sin x, 0)`.

mod load;
mod path;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use load::{apply_noise, holder_exponent, NoiseAssembler};
pub use path::{coarsen_path, sample_path, standard_normal, SeedRecord, WienerPath};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    #[default]
    Additive,
    LinearMult,
    NonlinearMult,
}

impl std::str::FromStr for NoiseKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "additive" => Ok(Self::Additive),
            "linear_mult" => Ok(Self::LinearMult),
            "nonlinear_mult" => Ok(Self::NonlinearMult),
            other => Err(format!("unknown noise kind '{other}'")),
        }
    }
}

impl fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NoiseKind::Additive => "additive",
            NoiseKind::LinearMult => "linear_mult",
            NoiseKind::NonlinearMult => "nonlinear_mult",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trig {
    Cos,
    Sin,
}

/// Spatial shape of one noise mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeShape {
    pub wavevector: [i32; 2],
    pub trig: Trig,
    pub component: usize,
    /// `scale * j^{-s}`
    pub weight: f64,
}

impl ModeShape {
    fn phase(&self, x: [f64; 2]) -> f64 {
        self.wavevector[0] as f64 * x[0] + self.wavevector[1] as f64 * x[1]
    }

    /// `rho(x)` and `d rho / d phase`.
    pub fn profile(&self, x: [f64; 2]) -> (f64, f64) {
        let (s, c) = self.phase(x).sin_cos();
        match self.trig {
            Trig::Cos => (c, -s),
            Trig::Sin => (s, c),
        }
    }

    fn wavenumber_sq(&self) -> f64 {
        let [a, b] = self.wavevector;
        (a * a + b * b) as f64
    }
}

/// Half-plane wavevectors ordered by `(|kappa|^2, -kappa_1, -kappa_2)`.
fn wavevectors(count: usize) -> Vec<[i32; 2]> {
    let mut radius = 1i32;
    loop {
        let mut all: Vec<[i32; 2]> = (0..=radius)
            .flat_map(|a| (-radius..=radius).map(move |b| [a, b]))
            .filter(|&[a, b]| a > 0 || (a == 0 && b > 0))
            .filter(|&[a, b]| a * a + b * b <= radius * radius)
            .collect();
        if all.len() >= count {
            all.sort_by_key(|&[a, b]| (a * a + b * b, -a, -b));
            all.truncate(count);
            return all;
        }
        radius *= 2;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    modes: usize,
    decay: f64,
    scale: f64,
    kind: NoiseKind,
    #[serde(skip)]
    shapes: Vec<ModeShape>,
}

/// Builds the default family, rejecting decay exponents below 2.
pub fn make_default_family(decay: f64, scale: f64, kind: NoiseKind, modes: usize) -> Result<NoiseModel> {
    if !(decay >= 2.0) {
        return Err(Error::InvalidArgument(format!(
            "decay exponent {decay} is below 2; the gradient sums would not be bounded"
        )));
    }
    NoiseModel::unchecked(decay, scale, kind, modes)
}

impl NoiseModel {
    /// Builds the family for any decay, including ones that violate the
    /// growth conditions (useful as a negative control).
    pub fn unchecked(decay: f64, scale: f64, kind: NoiseKind, modes: usize) -> Result<Self> {
        if modes == 0 {
            return Err(Error::InvalidArgument("noise needs at least one mode".into()));
        }
        if !scale.is_finite() || scale < 0.0 || !decay.is_finite() {
            return Err(Error::InvalidArgument(format!("invalid noise scale {scale} or decay {decay}")));
        }
        let kappas = wavevectors(modes.div_ceil(4));
        let shapes = (0..modes)
            .map(|k| {
                let j = k / 2;
                ModeShape {
                    wavevector: kappas[j / 2],
                    trig: if j % 2 == 0 { Trig::Cos } else { Trig::Sin },
                    component: k % 2,
                    weight: scale * ((j + 1) as f64).powf(-decay),
                }
            })
            .collect();
        Ok(Self {
            modes,
            decay,
            scale,
            kind,
            shapes,
        })
    }

    /// Rebuilds the mode table after deserialization.
    pub fn rebuild(&self) -> Result<Self> {
        Self::unchecked(self.decay, self.scale, self.kind, self.modes)
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn decay(&self) -> f64 {
        self.decay
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn kind(&self) -> NoiseKind {
        self.kind
    }

    pub fn shape(&self, k: usize) -> &ModeShape {
        &self.shapes[k]
    }

    pub fn with_modes(&self, modes: usize) -> Result<Self> {
        Self::unchecked(self.decay, self.scale, self.kind, modes)
    }

    /// True when `g_k` does not depend on the state.
    pub fn is_state_independent(&self) -> bool {
        self.kind == NoiseKind::Additive || self.scale == 0.0
    }

    /// `psi_c(xi)`.
    pub fn amplitude(&self, component: usize, xi: [f64; 2]) -> f64 {
        match self.kind {
            NoiseKind::Additive => 1.0,
            NoiseKind::LinearMult => xi[component],
            NoiseKind::NonlinearMult => (1.0 + xi[0] * xi[0] + xi[1] * xi[1]).sqrt(),
        }
    }

    /// Gradient of `psi_c` with respect to `xi`.
    fn amplitude_gradient(&self, component: usize, xi: [f64; 2]) -> [f64; 2] {
        match self.kind {
            NoiseKind::Additive => [0.0; 2],
            NoiseKind::LinearMult => {
                let mut g = [0.0; 2];
                g[component] = 1.0;
                g
            }
            NoiseKind::NonlinearMult => {
                let q = (1.0 + xi[0] * xi[0] + xi[1] * xi[1]).sqrt();
                [xi[0] / q, xi[1] / q]
            }
        }
    }

    /// Squared Frobenius norm of the `xi`-Hessian of `psi_c`.
    fn amplitude_hessian_sq(&self, xi: [f64; 2]) -> f64 {
        match self.kind {
            NoiseKind::Additive | NoiseKind::LinearMult => 0.0,
            NoiseKind::NonlinearMult => {
                let q2 = 1.0 + xi[0] * xi[0] + xi[1] * xi[1];
                let q3 = q2 * q2.sqrt();
                let h = [
                    (q2 - xi[0] * xi[0]) / q3,
                    -xi[0] * xi[1] / q3,
                    -xi[0] * xi[1] / q3,
                    (q2 - xi[1] * xi[1]) / q3,
                ];
                h.iter().map(|v| v * v).sum()
            }
        }
    }

    /// `g_k(x, xi)`.
    pub fn value(&self, k: usize, x: [f64; 2], xi: [f64; 2]) -> [f64; 2] {
        let m = &self.shapes[k];
        let mut out = [0.0; 2];
        out[m.component] = m.weight * m.profile(x).0 * self.amplitude(m.component, xi);
        out
    }

    /// Mode `k` evaluated at `points` with state values `state` (one entry per point).
    pub fn sample_mode(&self, k: usize, points: &[[f64; 2]], state: &[Vec<f64>; 2]) -> [Vec<f64>; 2] {
        let m = &self.shapes[k];
        let mut out = [vec![0.0; points.len()], vec![0.0; points.len()]];
        for (i, &x) in points.iter().enumerate() {
            let xi = [state[0][i], state[1][i]];
            out[m.component][i] = m.weight * m.profile(x).0 * self.amplitude(m.component, xi);
        }
        out
    }

    /// The six pointwise sums of the growth conditions at `(x, xi)`, in the
    /// order of [`ConditionReport::LABELS`], unnormalized.
    fn condition_sums(&self, x: [f64; 2], xi: [f64; 2]) -> [f64; 6] {
        let mut s = [0.0; 6];
        for m in &self.shapes {
            let (rho, drho) = m.profile(x);
            let k2 = m.wavenumber_sq();
            let w2 = m.weight * m.weight;
            let psi = self.amplitude(m.component, xi);
            let dpsi = self.amplitude_gradient(m.component, xi);
            let dpsi2 = dpsi[0] * dpsi[0] + dpsi[1] * dpsi[1];
            s[0] += w2 * rho * rho * psi * psi;
            s[1] += w2 * rho * rho * dpsi2;
            s[2] += w2 * drho * drho * k2 * psi * psi;
            s[3] += w2 * rho * rho * k2 * k2 * psi * psi;
            s[4] += w2 * rho * rho * self.amplitude_hessian_sq(xi);
            s[5] += w2 * drho * drho * k2 * dpsi2;
        }
        s
    }
}

/// Suprema of the normalized growth sums over the sample grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub modes: usize,
    pub include_second_order: bool,
    /// Constants with `K` modes.
    pub constants: Vec<f64>,
    /// Constants with `2K` modes.
    pub doubled: Vec<f64>,
    pub relative_change: Vec<f64>,
    pub passed: bool,
}

impl ConditionReport {
    pub const LABELS: [&'static str; 6] = [
        "sum |g|^2 / (1+|xi|^2)",
        "sum |grad_xi g|^2",
        "sum |grad_x g|^2 / (1+|xi|^2)",
        "sum |grad_x^2 g|^2 / (1+|xi|^2)",
        "sum |grad_xi^2 g|^2 * (1+|xi|^2)",
        "sum |grad_x grad_xi g|^2",
    ];
}

impl fmt::Display for ConditionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "modes K = {} (compared with 2K = {})", self.modes, 2 * self.modes)?;
        for i in 0..self.constants.len() {
            writeln!(
                f,
                "  {:<36} c(K) = {:<12.6e} c(2K) = {:<12.6e} change = {:.3}%",
                Self::LABELS[i],
                self.constants[i],
                self.doubled[i],
                100.0 * self.relative_change[i]
            )?;
        }
        write!(f, "result: {}", if self.passed { "PASS" } else { "FAIL" })
    }
}

/// Largest relative change of a constant tolerated when `K` doubles.
pub const STABILITY_TOLERANCE: f64 = 0.05;
/// Largest `|xi|` on the sample grid.
pub const SAMPLE_XI_MAX: f64 = 1e3;

fn sample_constants(model: &NoiseModel, count: usize) -> Vec<f64> {
    const GRID: usize = 32;
    const RADII: [f64; 6] = [0.0, 0.1, 1.0, 10.0, 100.0, SAMPLE_XI_MAX];
    const DIRECTIONS: usize = 8;
    let mut best = vec![0.0f64; count];
    for &r in &RADII {
        for d in 0..DIRECTIONS {
            let th = 2.0 * std::f64::consts::PI * d as f64 / DIRECTIONS as f64;
            let xi = [r * th.cos(), r * th.sin()];
            let n = 1.0 + r * r;
            for i in 0..GRID {
                for j in 0..GRID {
                    let h = 2.0 * std::f64::consts::PI / GRID as f64;
                    let x = [-std::f64::consts::PI + h * i as f64, -std::f64::consts::PI + h * j as f64];
                    let s = model.condition_sums(x, xi);
                    let normalized = [s[0] / n, s[1], s[2] / n, s[3] / n, s[4] * n, s[5]];
                    for c in 0..count {
                        best[c] = best[c].max(normalized[c]);
                    }
                }
            }
        }
    }
    best
}

/// Checks the growth conditions numerically and their stability under doubling `K`.
pub fn validate_conditions(model: &NoiseModel, include_second_order: bool) -> Result<ConditionReport> {
    let count = if include_second_order { 6 } else { 3 };
    let constants = sample_constants(model, count);
    let doubled = sample_constants(&model.with_modes(2 * model.modes)?, count);
    let relative_change: Vec<f64> = constants
        .iter()
        .zip(&doubled)
        .map(|(&a, &b)| {
            if a == b {
                0.0
            } else {
                (b - a).abs() / a.abs().max(b.abs())
            }
        })
        .collect();
    let passed = constants.iter().chain(&doubled).all(|c| c.is_finite())
        && relative_change.iter().all(|&r| r <= STABILITY_TOLERANCE);
    Ok(ConditionReport {
        modes: model.modes,
        include_second_order,
        constants,
        doubled,
        relative_change,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn wavevector_order() {
        assert_eq!(wavevectors(6), vec![[1, 0], [0, 1], [1, 1], [1, -1], [2, 0], [0, 2]]);
        assert_eq!(&wavevectors(10)[6..], &[[2, 1], [2, -1], [1, 2], [1, -2]]);
    }

    #[test]
    fn first_modes() {
        let m = make_default_family(2.0, 1.0, NoiseKind::Additive, 6).unwrap();
        let x = [0.3, -1.1];
        assert_eq!(m.value(0, x, [0.0; 2]), [x[0].cos(), 0.0]);
        assert_eq!(m.value(1, x, [0.0; 2]), [0.0, x[0].cos()]);
        assert_eq!(m.value(2, x, [0.0; 2]), [0.5f64.powi(2) * x[0].sin(), 0.0]);
        assert_eq!(m.shape(4).wavevector, [0, 1]);
        assert!((m.value(5, x, [0.0; 2])[1] - x[1].cos() / 9.0).abs() < 1e-15);
    }

    #[test]
    fn construction_errors() {
        assert!(make_default_family(1.0, 1.0, NoiseKind::LinearMult, 16).is_err());
        assert!(make_default_family(1.99, 1.0, NoiseKind::Additive, 16).is_err());
        assert!(NoiseModel::unchecked(1.0, 1.0, NoiseKind::LinearMult, 16).is_ok());
        assert!(NoiseModel::unchecked(2.0, 1.0, NoiseKind::Additive, 0).is_err());
        assert!(NoiseModel::unchecked(2.0, -1.0, NoiseKind::Additive, 4).is_err());
    }

    #[test]
    fn additive_has_no_state_derivative() {
        let m = make_default_family(2.0, 1.0, NoiseKind::Additive, 16).unwrap();
        let r = validate_conditions(&m, true).unwrap();
        assert_eq!(r.constants[1], 0.0);
        assert_eq!(r.constants[4], 0.0);
        assert_eq!(r.constants[5], 0.0);
        assert!(r.passed, "{r}");
    }

    #[test]
    fn default_families_pass() {
        for kind in [NoiseKind::Additive, NoiseKind::LinearMult, NoiseKind::NonlinearMult] {
            let m = make_default_family(2.0, 0.1, kind, 16).unwrap();
            let r = validate_conditions(&m, true).unwrap();
            assert!(r.passed, "{kind}: {r}");
            assert!(r.constants.iter().all(|c| c.is_finite()));
        }
    }

    #[test]
    fn slow_decay_fails() {
        let m = NoiseModel::unchecked(1.0, 1.0, NoiseKind::LinearMult, 16).unwrap();
        let r = validate_conditions(&m, false).unwrap();
        assert!(!r.passed, "{r}");
        // the x-gradient sum is the one that keeps growing
        assert!(r.relative_change[2] > STABILITY_TOLERANCE);
    }

    #[test]
    fn zero_scale_gives_zero_sums() {
        let m = make_default_family(2.0, 0.0, NoiseKind::NonlinearMult, 8).unwrap();
        let r = validate_conditions(&m, true).unwrap();
        assert!(r.constants.iter().all(|&c| c == 0.0));
        assert!(r.passed);
    }

    proptest! {
        #[test]
        fn nonlinear_amplitude_has_bounded_slope(a in -1e3f64..1e3, b in -1e3f64..1e3) {
            let m = make_default_family(2.0, 1.0, NoiseKind::NonlinearMult, 2).unwrap();
            let g = m.amplitude_gradient(0, [a, b]);
            let n = (g[0] * g[0] + g[1] * g[1]).sqrt();
            prop_assert!(n <= 1.0);
            let expected = (a * a + b * b).sqrt() / (1.0 + a * a + b * b).sqrt();
            prop_assert!((n - expected).abs() < 1e-12);
        }

        #[test]
        fn mode_sum_is_bounded_by_weights(x0 in -3.2f64..3.2, x1 in -3.2f64..3.2) {
            let m = make_default_family(2.0, 1.0, NoiseKind::Additive, 16).unwrap();
            let total: f64 = (0..16).map(|k| { let v = m.value(k, [x0, x1], [0.0; 2]); v[0] * v[0] + v[1] * v[1] }).sum();
            let bound: f64 = (0..16).map(|k| m.shape(k).weight.powi(2)).sum();
            prop_assert!(total <= bound + 1e-12);
        }
    }
}
