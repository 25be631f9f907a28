//! Fourier calculus on the periodic square: inverse Laplacian, Leray
//! projection and the deterministic/stochastic pressure splitting.
//!
//! Fields are sampled on the uniform `N x N` grid `x_i = -pi + 2 pi i / N`,
//! stored with the x index fastest. First derivatives drop the Nyquist
//! modes so that every projector built from them is exactly idempotent.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::fem::{FeSpace, SparseOperator};
use crate::noise::NoiseModel;

/// Tolerance on the mean of inputs to the inverse Laplacian, relative to
/// `max(1, max |f|)`.
pub const MEAN_TOLERANCE: f64 = 1e-10;

pub type VectorGridField = [Vec<f64>; 2];

#[derive(Clone)]
pub struct SpectralGrid {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for SpectralGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralGrid").field("n", &self.n).finish()
    }
}

impl SpectralGrid {
    pub fn new(n: usize) -> Result<Self> {
        if n < 4 || !n.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "spectral resolution must be even and at least 4, got {n}"
            )));
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        })
    }

    /// Grid oversampling a mesh with `mesh_n` cells per axis four times.
    pub fn for_mesh(mesh_n: usize) -> Result<Self> {
        Self::new((4 * mesh_n).max(4))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn point(&self, i: usize, j: usize) -> [f64; 2] {
        let d = 2.0 * PI / self.n as f64;
        [-PI + d * i as f64, -PI + d * j as f64]
    }

    pub fn points(&self) -> impl Iterator<Item = [f64; 2]> + '_ {
        (0..self.n).flat_map(move |j| (0..self.n).map(move |i| self.point(i, j)))
    }

    pub fn sample(&self, f: impl Fn([f64; 2]) -> f64) -> Vec<f64> {
        self.points().map(f).collect()
    }

    pub fn sample_vector(&self, f: impl Fn([f64; 2]) -> [f64; 2]) -> VectorGridField {
        let mut out = [Vec::with_capacity(self.len()), Vec::with_capacity(self.len())];
        for x in self.points() {
            let v = f(x);
            out[0].push(v[0]);
            out[1].push(v[1]);
        }
        out
    }

    fn transform(&self, data: &mut [Complex<f64>], plan: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        plan.process(data);
        let mut column = vec![Complex::new(0.0, 0.0); n];
        for i in 0..n {
            for j in 0..n {
                column[j] = data[i + n * j];
            }
            plan.process(&mut column);
            for j in 0..n {
                data[i + n * j] = column[j];
            }
        }
    }

    pub fn forward(&self, f: &[f64]) -> Vec<Complex<f64>> {
        assert_eq!(f.len(), self.len());
        let mut data: Vec<Complex<f64>> = f.iter().map(|&v| Complex::new(v, 0.0)).collect();
        self.transform(&mut data, &self.forward);
        data
    }

    pub fn inverse(&self, mut spec: Vec<Complex<f64>>) -> Vec<f64> {
        self.transform(&mut spec, &self.inverse);
        let scale = 1.0 / self.len() as f64;
        spec.into_iter().map(|c| c.re * scale).collect()
    }

    /// Signed integer wavenumber of FFT index `j`.
    fn wavenumber(&self, j: usize) -> f64 {
        if j <= self.n / 2 {
            j as f64
        } else {
            j as f64 - self.n as f64
        }
    }

    /// Wavenumber used for first derivatives (zero at Nyquist).
    fn derivative_wavenumber(&self, j: usize) -> f64 {
        if j == self.n / 2 {
            0.0
        } else {
            self.wavenumber(j)
        }
    }

    fn modes(&self) -> impl Iterator<Item = (usize, [f64; 2], [f64; 2])> + '_ {
        let n = self.n;
        (0..n).flat_map(move |j| {
            (0..n).map(move |i| {
                (
                    i + n * j,
                    [self.wavenumber(i), self.wavenumber(j)],
                    [self.derivative_wavenumber(i), self.derivative_wavenumber(j)],
                )
            })
        })
    }

    pub fn mean(&self, f: &[f64]) -> f64 {
        f.iter().sum::<f64>() / self.len() as f64
    }

    pub fn laplacian(&self, f: &[f64]) -> Vec<f64> {
        let mut s = self.forward(f);
        for (idx, k, _) in self.modes() {
            s[idx] *= -(k[0] * k[0] + k[1] * k[1]);
        }
        self.inverse(s)
    }

    /// Solves `Laplacian(w) = f` with zero-mean `w`.
    pub fn inv_laplacian(&self, f: &[f64]) -> Result<Vec<f64>> {
        let scale = f.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let mean = self.mean(f);
        if mean.abs() > MEAN_TOLERANCE * scale {
            return Err(Error::InvalidArgument(format!(
                "inverse Laplacian needs zero-mean data, mean is {mean:e}"
            )));
        }
        let mut s = self.forward(f);
        for (idx, k, _) in self.modes() {
            let k2 = k[0] * k[0] + k[1] * k[1];
            s[idx] = if k2 == 0.0 { Complex::new(0.0, 0.0) } else { -s[idx] / k2 };
        }
        Ok(self.inverse(s))
    }

    pub fn gradient(&self, f: &[f64]) -> VectorGridField {
        let s = self.forward(f);
        let mut gx = s.clone();
        let mut gy = s;
        for (idx, _, d) in self.modes() {
            gx[idx] *= Complex::new(0.0, d[0]);
            gy[idx] *= Complex::new(0.0, d[1]);
        }
        [self.inverse(gx), self.inverse(gy)]
    }

    pub fn divergence(&self, v: &VectorGridField) -> Vec<f64> {
        let sx = self.forward(&v[0]);
        let sy = self.forward(&v[1]);
        let mut out = sx;
        for (idx, _, d) in self.modes() {
            out[idx] = Complex::new(0.0, d[0]) * out[idx] + Complex::new(0.0, d[1]) * sy[idx];
        }
        self.inverse(out)
    }

    /// Gradient part `grad Laplacian^{-1} div v` in Fourier space.
    fn gradient_part(&self, v: &VectorGridField) -> [Vec<Complex<f64>>; 2] {
        let sx = self.forward(&v[0]);
        let sy = self.forward(&v[1]);
        let mut px = vec![Complex::new(0.0, 0.0); self.len()];
        let mut py = px.clone();
        for (idx, _, d) in self.modes() {
            let d2 = d[0] * d[0] + d[1] * d[1];
            if d2 == 0.0 {
                continue;
            }
            let proj = (d[0] * sx[idx] + d[1] * sy[idx]) / d2;
            px[idx] = d[0] * proj;
            py[idx] = d[1] * proj;
        }
        [px, py]
    }

    /// `v - grad Laplacian^{-1} div v`: divergence-free part plus the mean.
    pub fn leray_project(&self, v: &VectorGridField) -> VectorGridField {
        let g = self.pressure_stoch(v);
        [
            v[0].iter().zip(&g[0]).map(|(a, b)| a + b).collect(),
            v[1].iter().zip(&g[1]).map(|(a, b)| a + b).collect(),
        ]
    }

    /// `-Laplacian^{-1} div div (u (x) u)`, zero mean.
    pub fn pressure_det(&self, u: &VectorGridField) -> Vec<f64> {
        let uu = self.forward(&u[0].iter().map(|a| a * a).collect::<Vec<_>>());
        let uv = self.forward(&u[0].iter().zip(&u[1]).map(|(a, b)| a * b).collect::<Vec<_>>());
        let vv = self.forward(&u[1].iter().map(|b| b * b).collect::<Vec<_>>());
        let mut out = vec![Complex::new(0.0, 0.0); self.len()];
        for (idx, k, d) in self.modes() {
            let k2 = k[0] * k[0] + k[1] * k[1];
            if k2 == 0.0 {
                continue;
            }
            // div div T = -(d_x^2 T_xx + 2 d_x d_y T_xy + d_y^2 T_yy)
            let dd = -(d[0] * d[0] * uu[idx] + 2.0 * d[0] * d[1] * uv[idx] + d[1] * d[1] * vv[idx]);
            out[idx] = dd / k2;
        }
        self.inverse(out)
    }

    /// `-grad Laplacian^{-1} div g`.
    pub fn pressure_stoch(&self, g: &VectorGridField) -> VectorGridField {
        let [px, py] = self.gradient_part(g);
        [
            self.inverse(px).into_iter().map(|v| -v).collect(),
            self.inverse(py).into_iter().map(|v| -v).collect(),
        ]
    }

    /// `||grad Laplacian^{-1} div g||^2_{W^{1,2}}` computed directly in Fourier space.
    pub fn pressure_stoch_h1_norm_sq(&self, g: &VectorGridField) -> f64 {
        let [px, py] = self.gradient_part(g);
        let mut total = 0.0;
        for (idx, _, d) in self.modes() {
            let weight = 1.0 + d[0] * d[0] + d[1] * d[1];
            total += weight * (px[idx].norm_sqr() + py[idx].norm_sqr());
        }
        self.parseval_scale() * total
    }

    fn parseval_scale(&self) -> f64 {
        let n2 = self.len() as f64;
        4.0 * PI * PI / (n2 * n2)
    }

    pub fn l2_norm_sq(&self, f: &[f64]) -> f64 {
        let d = 2.0 * PI / self.n as f64;
        d * d * f.iter().map(|v| v * v).sum::<f64>()
    }

    pub fn gradient_norm_sq(&self, f: &[f64]) -> f64 {
        let s = self.forward(f);
        let total: f64 = self
            .modes()
            .map(|(idx, _, d)| (d[0] * d[0] + d[1] * d[1]) * s[idx].norm_sqr())
            .sum();
        self.parseval_scale() * total
    }

    pub fn vector_l2_norm_sq(&self, v: &VectorGridField) -> f64 {
        self.l2_norm_sq(&v[0]) + self.l2_norm_sq(&v[1])
    }

    pub fn vector_h1_norm_sq(&self, v: &VectorGridField) -> f64 {
        self.vector_l2_norm_sq(v) + self.gradient_norm_sq(&v[0]) + self.gradient_norm_sq(&v[1])
    }
}

/// Samples velocity FE functions of one space on a spectral grid by point
/// evaluation. The evaluation weights are computed once.
#[derive(Debug, Clone)]
pub struct FeGridTransfer {
    values: SparseOperator,
}

impl FeGridTransfer {
    pub fn new(space: &FeSpace, grid: &SpectralGrid) -> Self {
        let map = space.velocity_map();
        let element = map.element();
        let mut entries = Vec::with_capacity(grid.len() * map.local_size());
        let mut v = [0.0; 6];
        for (row, x) in grid.points().enumerate() {
            let (t, p) = space.mesh().locate(x);
            element.values(p, &mut v);
            for (a, &g) in map.cell(t).iter().enumerate() {
                if v[a] != 0.0 {
                    entries.push((row, g, v[a]));
                }
            }
        }
        Self {
            values: SparseOperator::from_triplets(grid.len(), map.ndofs(), entries, false),
        }
    }

    pub fn velocity(&self, coeffs: &[f64]) -> VectorGridField {
        let ns = self.values.ncols();
        [self.values.apply(&coeffs[..ns]), self.values.apply(&coeffs[ns..])]
    }
}

/// Pressure diagnostics of one trajectory: `dt * sum_{m>=1} ||grad pi_det(u_m)||^2`
/// and `dt * sum_{m<M} sum_k ||grad Laplacian^{-1} div g_k(u_m)||^2_{W^{1,2}}`.
#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize)]
pub struct PressureNorms {
    pub deterministic: f64,
    pub stochastic: f64,
}

/// Computes the pressure diagnostics from the iterates `u_0, ..., u_M`
/// sampled on `grid`.
pub fn monitor_pressure_norms(
    grid: &SpectralGrid,
    iterates: &[VectorGridField],
    dt: f64,
    noise: &NoiseModel,
) -> PressureNorms {
    if iterates.len() < 2 {
        return PressureNorms::default();
    }
    let deterministic: f64 = iterates[1..]
        .iter()
        .map(|u| grid.gradient_norm_sq(&grid.pressure_det(u)))
        .sum::<f64>()
        * dt;
    let points: Vec<[f64; 2]> = grid.points().collect();
    let stoch_at = |u: &VectorGridField| -> f64 {
        (0..noise.modes())
            .map(|k| {
                let g = noise.sample_mode(k, &points, u);
                grid.pressure_stoch_h1_norm_sq(&g)
            })
            .sum()
    };
    let previous = &iterates[..iterates.len() - 1];
    let stochastic = if noise.is_state_independent() {
        stoch_at(&previous[0]) * previous.len() as f64 * dt
    } else {
        previous.iter().map(stoch_at).sum::<f64>() * dt
    };
    PressureNorms {
        deterministic,
        stochastic,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{make_default_family, NoiseKind};
    use proptest::prelude::*;

    fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    fn band_limited(grid: &SpectralGrid, coeffs: &[(i32, i32, f64, f64)]) -> Vec<f64> {
        grid.sample(|x| {
            coeffs
                .iter()
                .map(|&(a, b, c, s)| {
                    let ph = a as f64 * x[0] + b as f64 * x[1];
                    c * ph.cos() + s * ph.sin()
                })
                .sum()
        })
    }

    #[test]
    fn rejects_bad_resolution() {
        assert!(SpectralGrid::new(5).is_err());
        assert!(SpectralGrid::new(2).is_err());
        assert!(SpectralGrid::new(4).is_ok());
    }

    #[test]
    fn inverse_laplacian_eigenfunctions() {
        let g = SpectralGrid::new(16).unwrap();
        let sx = g.sample(|x| x[0].sin());
        let r = g.inv_laplacian(&sx).unwrap();
        assert!(max_abs_diff(&r, &sx.iter().map(|v| -v).collect::<Vec<_>>()) < 1e-13);
        let cc = g.sample(|x| x[0].cos() * x[1].cos());
        let r = g.inv_laplacian(&cc).unwrap();
        assert!(max_abs_diff(&r, &cc.iter().map(|v| -0.5 * v).collect::<Vec<_>>()) < 1e-13);
        let z = g.inv_laplacian(&vec![0.0; g.len()]).unwrap();
        assert!(z.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn inverse_laplacian_rejects_mean() {
        let g = SpectralGrid::new(8).unwrap();
        let f = g.sample(|x| 1.0 + x[0].sin());
        assert!(matches!(g.inv_laplacian(&f), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn leray_examples() {
        let g = SpectralGrid::new(16).unwrap();
        let grad = g.sample_vector(|x| [-x[0].sin(), 0.0]);
        let p = g.leray_project(&grad);
        assert!(p[0].iter().chain(&p[1]).all(|v| v.abs() < 1e-13));
        let tg = g.sample_vector(|x| [-x[0].sin() * x[1].cos(), x[0].cos() * x[1].sin()]);
        let p = g.leray_project(&tg);
        assert!(max_abs_diff(&p[0], &tg[0]) < 1e-13 && max_abs_diff(&p[1], &tg[1]) < 1e-13);
        let c = g.sample_vector(|x| [2.0 + x[1].sin(), -1.0]);
        let p = g.leray_project(&c);
        assert!(max_abs_diff(&p[0], &c[0]) < 1e-13 && max_abs_diff(&p[1], &c[1]) < 1e-13);
    }

    #[test]
    fn pressure_det_examples() {
        let g = SpectralGrid::new(16).unwrap();
        let shear = g.sample_vector(|x| [x[1].cos(), 0.0]);
        assert!(g.pressure_det(&shear).iter().all(|v| v.abs() < 1e-13));
        let u = g.sample_vector(|x| [x[1].sin(), x[0].sin()]);
        let expected = g.sample(|x| x[0].cos() * x[1].cos());
        assert!(max_abs_diff(&g.pressure_det(&u), &expected) < 1e-13);
        let c = g.sample_vector(|_| [0.7, -0.2]);
        assert!(g.pressure_det(&c).iter().all(|v| v.abs() < 1e-13));
    }

    #[test]
    fn pressure_stoch_examples() {
        let g = SpectralGrid::new(16).unwrap();
        let tg = g.sample_vector(|x| [-x[0].sin() * x[1].cos(), x[0].cos() * x[1].sin()]);
        let r = g.pressure_stoch(&tg);
        assert!(r[0].iter().chain(&r[1]).all(|v| v.abs() < 1e-13));
        let s = g.sample_vector(|x| [x[0].sin(), 0.0]);
        let r = g.pressure_stoch(&s);
        assert!(max_abs_diff(&r[0], &s[0].iter().map(|v| -v).collect::<Vec<_>>()) < 1e-13);
        assert!(r[1].iter().all(|v| v.abs() < 1e-13));
    }

    #[test]
    fn norms_by_parseval() {
        let g = SpectralGrid::new(16).unwrap();
        let f = g.sample(|x| x[0].sin());
        assert!((g.l2_norm_sq(&f) - 2.0 * PI * PI).abs() < 1e-12);
        let c = g.sample(|x| x[0].cos() * x[1].cos());
        // grad(cos x cos y) has squared norm 2 pi^2
        assert!((g.gradient_norm_sq(&c) - 2.0 * PI * PI).abs() < 1e-11);
        let v = g.sample_vector(|x| [x[0].sin(), 0.0]);
        let h = g.pressure_stoch(&v);
        assert!((g.pressure_stoch_h1_norm_sq(&v) - g.vector_h1_norm_sq(&h)).abs() < 1e-10);
    }

    #[test]
    fn transfer_samples_fe_functions() {
        let s = FeSpace::taylor_hood(4).unwrap();
        let grid = SpectralGrid::for_mesh(4).unwrap();
        let coeffs = s.interpolate_velocity(|x| [x[0].cos(), x[1].sin()]);
        let t = FeGridTransfer::new(&s, &grid);
        let v = t.velocity(&coeffs);
        for (idx, x) in grid.points().enumerate().step_by(37) {
            let e = s.eval_velocity(&coeffs, x).0;
            assert!((v[0][idx] - e[0]).abs() < 1e-13 && (v[1][idx] - e[1]).abs() < 1e-13);
        }
    }

    #[test]
    fn monitor_examples() {
        let g = SpectralGrid::new(16).unwrap();
        let quiet = make_default_family(2.0, 0.0, NoiseKind::Additive, 4).unwrap();
        let u = g.sample_vector(|x| [x[1].sin(), x[0].sin()]);
        let zero = [vec![0.0; g.len()], vec![0.0; g.len()]];
        let norms = monitor_pressure_norms(&g, &[zero.clone(), u.clone()], 1.0, &quiet);
        // ||grad(cos x cos y)||^2 = int sin^2 x cos^2 y + cos^2 x sin^2 y = 2 pi^2
        assert!((norms.deterministic - 2.0 * PI * PI).abs() < 1e-10);
        assert_eq!(norms.stochastic, 0.0);

        let additive = make_default_family(2.0, 0.5, NoiseKind::Additive, 6).unwrap();
        let zn = monitor_pressure_norms(&g, &[zero.clone(), zero.clone()], 0.1, &additive);
        assert_eq!(zn.deterministic, 0.0);
        assert!(zn.stochastic > 0.0);
        let traj = [u.clone(), u.clone(), u.clone()];
        let a = monitor_pressure_norms(&g, &traj, 0.1, &additive);
        let b = monitor_pressure_norms(&g, &traj, 0.2, &additive);
        assert!((b.deterministic - 2.0 * a.deterministic).abs() < 1e-10 * b.deterministic);
        assert!((b.stochastic - 2.0 * a.stochastic).abs() < 1e-12 * b.stochastic);

        let mult = make_default_family(2.0, 0.5, NoiseKind::NonlinearMult, 6).unwrap();
        let a = monitor_pressure_norms(&g, &traj, 0.1, &mult);
        let b = monitor_pressure_norms(&g, &traj, 0.2, &mult);
        assert!((b.stochastic - 2.0 * a.stochastic).abs() < 1e-12 * b.stochastic);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn laplacian_inverts(coeffs in prop::collection::vec((-5i32..=5, -5i32..=5, -1.0f64..1.0, -1.0f64..1.0), 1..6),
                             nexp in 4u32..7) {
            let g = SpectralGrid::new(1 << nexp).unwrap();
            let nz: Vec<_> = coeffs.into_iter().filter(|c| c.0 != 0 || c.1 != 0).collect();
            let f = band_limited(&g, &nz);
            let back = g.laplacian(&g.inv_laplacian(&f).unwrap());
            let scale = f.iter().fold(1e-300f64, |m, v| m.max(v.abs()));
            prop_assert!(max_abs_diff(&back, &f) <= 1e-10 * scale.max(1.0));
        }

        #[test]
        fn leray_and_gradient_parts_reconstruct(seed in 0u64..1000) {
            let g = SpectralGrid::new(16).unwrap();
            let mut s = seed.wrapping_mul(0x9E3779B97F4A7C15) | 1;
            let mut next = || { s ^= s << 13; s ^= s >> 7; s ^= s << 17; (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5 };
            let v = [(0..g.len()).map(|_| next()).collect::<Vec<_>>(), (0..g.len()).map(|_| next()).collect::<Vec<_>>()];
            let p = g.leray_project(&v);
            let q = g.pressure_stoch(&v);
            for c in 0..2 {
                for i in 0..g.len() {
                    prop_assert!((p[c][i] - q[c][i] - v[c][i]).abs() < 1e-12);
                }
            }
            let pp = g.leray_project(&p);
            prop_assert!(max_abs_diff(&pp[0], &p[0]) < 1e-10 && max_abs_diff(&pp[1], &p[1]) < 1e-10);
            let div = g.divergence(&p);
            prop_assert!(div.iter().all(|d| d.abs() < 1e-10));
            // linearity
            let w = [v[1].clone(), v[0].clone()];
            let comb = [v[0].iter().zip(&w[0]).map(|(a, b)| 2.0 * a - 3.0 * b).collect::<Vec<_>>(),
                        v[1].iter().zip(&w[1]).map(|(a, b)| 2.0 * a - 3.0 * b).collect::<Vec<_>>()];
            let qc = g.pressure_stoch(&comb);
            let qw = g.pressure_stoch(&w);
            for c in 0..2 {
                for i in 0..g.len() {
                    prop_assert!((qc[c][i] - (2.0 * q[c][i] - 3.0 * qw[c][i])).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn pressure_det_matches_composition(coeffs in prop::collection::vec((-3i32..=3, -3i32..=3, -1.0f64..1.0, -1.0f64..1.0), 1..4)) {
            let g = SpectralGrid::new(32).unwrap();
            let u0 = band_limited(&g, &coeffs);
            let u1 = band_limited(&g, &coeffs.iter().map(|&(a, b, c, s)| (b, -a, s, c)).collect::<Vec<_>>());
            let u = [u0, u1];
            let prod = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).collect::<Vec<_>>();
            let row0 = g.divergence(&[prod(&u[0], &u[0]), prod(&u[0], &u[1])]);
            let row1 = g.divergence(&[prod(&u[1], &u[0]), prod(&u[1], &u[1])]);
            let dd = g.divergence(&[row0, row1]);
            let brute: Vec<f64> = g.inv_laplacian(&dd).unwrap().into_iter().map(|v| -v).collect();
            let p = g.pressure_det(&u);
            let scale = p.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            prop_assert!(max_abs_diff(&p, &brute) < 1e-10 * scale);
        }
    }
}
