//! Noise forcing as a load vector against the velocity test functions.

use std::sync::Arc;

use super::{NoiseModel, WienerPath};
use crate::error::{Error, Result};
use crate::fem::space::kind_index;
use crate::fem::FeSpace;

/// Evaluates `sum_k g_k(., u) dbeta_k` against the velocity basis of one
/// space, at the quadrature points of the space's own rule.
#[derive(Debug, Clone)]
pub struct NoiseAssembler {
    model: NoiseModel,
    space: Arc<FeSpace>,
    /// `area * w_q` per (triangle, point).
    weights: Vec<f64>,
    /// `weight_k * rho_k(x_q)`, mode-major.
    profiles: Vec<f64>,
    /// Per-mode loads when the noise does not depend on the state.
    fixed_loads: Option<Vec<Vec<f64>>>,
}

impl NoiseAssembler {
    pub fn new(model: &NoiseModel, space: &Arc<FeSpace>) -> Self {
        let rule = space.rule();
        let areas = space.areas();
        let mut weights = Vec::new();
        let mut points = Vec::new();
        for (t, tri) in space.mesh().triangles().iter().enumerate() {
            let area = areas[kind_index(tri.kind)];
            for (q, &p) in rule.points.iter().enumerate() {
                weights.push(area * rule.weights[q]);
                points.push(space.map_point(t, p));
            }
        }
        let mut profiles = Vec::with_capacity(model.modes() * points.len());
        for k in 0..model.modes() {
            let shape = model.shape(k);
            profiles.extend(points.iter().map(|&x| shape.weight * shape.profile(x).0));
        }
        let mut out = Self {
            model: model.clone(),
            space: space.clone(),
            weights,
            profiles,
            fixed_loads: None,
        };
        if model.is_state_independent() {
            let zero = vec![0.0; space.n_velocity()];
            let loads = (0..model.modes())
                .map(|k| {
                    let mut inc = vec![0.0; model.modes()];
                    inc[k] = 1.0;
                    out.assemble(&zero, &inc)
                })
                .collect();
            out.fixed_loads = Some(loads);
        }
        out
    }

    pub fn model(&self) -> &NoiseModel {
        &self.model
    }

    pub fn space(&self) -> &Arc<FeSpace> {
        &self.space
    }

    fn points_per_cell(&self) -> usize {
        self.space.rule().len()
    }

    /// Velocity of `u` at every quadrature point.
    fn state_at_points(&self, u: &[f64]) -> Vec<[f64; 2]> {
        let map = self.space.velocity_map();
        let ns = map.ndofs();
        let tab = self.space.velocity_tab();
        let nq = self.points_per_cell();
        let mut out = Vec::with_capacity(self.weights.len());
        for t in 0..self.space.mesh().num_triangles() {
            let dofs = map.cell(t);
            for q in 0..nq {
                let phi = &tab.values[q];
                let mut v = [0.0; 2];
                for (a, &g) in dofs.iter().enumerate() {
                    v[0] += u[g] * phi[a];
                    v[1] += u[ns + g] * phi[a];
                }
                out.push(v);
            }
        }
        out
    }

    /// Noise field `sum_k g_k(x_q, u(x_q)) c_k` at every quadrature point.
    fn field_at_points(&self, u: &[f64], coefficients: &[f64]) -> Vec<[f64; 2]> {
        let npts = self.weights.len();
        let state = if self.model.is_state_independent() {
            vec![[0.0; 2]; npts]
        } else {
            self.state_at_points(u)
        };
        let mut field = vec![[0.0; 2]; npts];
        for (k, &c) in coefficients.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let comp = self.model.shape(k).component;
            let prof = &self.profiles[k * npts..(k + 1) * npts];
            for i in 0..npts {
                field[i][comp] += c * prof[i] * self.model.amplitude(comp, state[i]);
            }
        }
        field
    }

    fn check(&self, u: &[f64], coefficients: &[f64]) -> Result<()> {
        if coefficients.len() != self.model.modes() || u.len() != self.space.n_velocity() {
            return Err(Error::InvalidArgument(format!(
                "noise load expects {} increments and {} velocity coefficients, got {} and {}",
                self.model.modes(),
                self.space.n_velocity(),
                coefficients.len(),
                u.len()
            )));
        }
        Ok(())
    }

    fn assemble(&self, u: &[f64], coefficients: &[f64]) -> Vec<f64> {
        let field = self.field_at_points(u, coefficients);
        let map = self.space.velocity_map();
        let ns = map.ndofs();
        let tab = self.space.velocity_tab();
        let nq = self.points_per_cell();
        let mut out = vec![0.0; 2 * ns];
        for t in 0..self.space.mesh().num_triangles() {
            let dofs = map.cell(t);
            for q in 0..nq {
                let i = t * nq + q;
                let w = self.weights[i];
                let phi = &tab.values[q];
                for (a, &g) in dofs.iter().enumerate() {
                    out[g] += w * field[i][0] * phi[a];
                    out[ns + g] += w * field[i][1] * phi[a];
                }
            }
        }
        out
    }

    /// Load vector of `Phi(u) dW` for one row of increments.
    pub fn apply(&self, u: &[f64], increments: &[f64]) -> Result<Vec<f64>> {
        self.check(u, increments)?;
        if let Some(loads) = &self.fixed_loads {
            let mut out = vec![0.0; self.space.n_velocity()];
            for (load, &d) in loads.iter().zip(increments) {
                if d != 0.0 {
                    out.iter_mut().zip(load).for_each(|(o, l)| *o += d * l);
                }
            }
            return Ok(out);
        }
        Ok(self.assemble(u, increments))
    }

    /// `|| sum_k g_k(., u) c_k ||^2_{L^2}` by quadrature.
    pub fn field_norm_sq(&self, u: &[f64], coefficients: &[f64]) -> Result<f64> {
        self.check(u, coefficients)?;
        let field = self.field_at_points(u, coefficients);
        Ok(field
            .iter()
            .zip(&self.weights)
            .map(|(v, w)| w * (v[0] * v[0] + v[1] * v[1]))
            .sum())
    }

    /// `sum_k || g_k(., u) ||^2_{L^2}`.
    pub fn hilbert_schmidt_sq(&self, u: &[f64]) -> Result<f64> {
        let k = self.model.modes();
        let mut total = 0.0;
        let mut unit = vec![0.0; k];
        for j in 0..k {
            unit[j] = 1.0;
            total += self.field_norm_sq(u, &unit)?;
            unit[j] = 0.0;
        }
        Ok(total)
    }
}

/// One-shot noise load; prefer [`NoiseAssembler`] inside time loops.
pub fn apply_noise(model: &NoiseModel, space: &Arc<FeSpace>, u: &[f64], increments: &[f64]) -> Result<Vec<f64>> {
    NoiseAssembler::new(model, space).apply(u, increments)
}

/// Fitted exponent `a` in `E || Z_{t+delta} - Z_t ||_{L^2} ~ C delta^a` for
/// the additive stochastic integral `Z_t = sum_k g_k beta_k(t)`, over dyadic
/// `delta` from one step to a quarter of the horizon.
///
/// The modes are `L^2`-orthogonal with `||g_k||^2 = 2 pi^2 weight_k^2`, so
/// the norm is computed from the Brownian values directly.
pub fn holder_exponent(model: &NoiseModel, paths: &[WienerPath]) -> Result<f64> {
    let first = paths
        .first()
        .ok_or_else(|| Error::InvalidArgument("no paths for the Hölder diagnostic".into()))?;
    let steps = first.steps();
    if steps < 8 || paths.iter().any(|p| p.steps() != steps || p.modes() != model.modes()) {
        return Err(Error::InvalidArgument(
            "the Hölder diagnostic needs at least 8 steps and matching path shapes".into(),
        ));
    }
    let gram: Vec<f64> = (0..model.modes())
        .map(|k| 2.0 * std::f64::consts::PI.powi(2) * model.shape(k).weight.powi(2))
        .collect();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut lag = 1;
    while 4 * lag <= steps {
        let mut total = 0.0;
        let mut count = 0usize;
        for p in paths {
            let mut beta = vec![vec![0.0; model.modes()]; steps + 1];
            for m in 1..=steps {
                let (prev, next) = beta.split_at_mut(m);
                for (k, b) in next[0].iter_mut().enumerate() {
                    *b = prev[m - 1][k] + p.row(m)[k];
                }
            }
            for m in 0..=steps - lag {
                let norm_sq: f64 = (0..model.modes())
                    .map(|k| gram[k] * (beta[m + lag][k] - beta[m][k]).powi(2))
                    .sum();
                total += norm_sq.sqrt();
                count += 1;
            }
        }
        xs.push((lag as f64 * first.dt()).ln());
        ys.push((total / count as f64).ln());
        lag *= 2;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{assemble_mass, FieldKind};
    use crate::noise::{coarsen_path, make_default_family, sample_path, NoiseKind};

    fn space(n: usize) -> Arc<FeSpace> {
        FeSpace::taylor_hood(n).unwrap()
    }

    fn smooth_state(s: &FeSpace) -> Vec<f64> {
        s.interpolate_velocity(|x| [x[1].sin() + 0.5, -x[0].cos()])
    }

    #[test]
    fn zero_increments_give_zero_load() {
        let s = space(4);
        for kind in [NoiseKind::Additive, NoiseKind::LinearMult, NoiseKind::NonlinearMult] {
            let m = make_default_family(2.0, 1.0, kind, 8).unwrap();
            let load = apply_noise(&m, &s, &smooth_state(&s), &[0.0; 8]).unwrap();
            assert!(load.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn linear_noise_vanishes_at_rest() {
        let s = space(4);
        let m = make_default_family(2.0, 1.0, NoiseKind::LinearMult, 8).unwrap();
        let load = apply_noise(&m, &s, &vec![0.0; s.n_velocity()], &[1.0; 8]).unwrap();
        assert!(load.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_mode_matches_mass_action() {
        let m = make_default_family(2.0, 1.0, NoiseKind::Additive, 1).unwrap();
        let mut gaps = Vec::new();
        for n in [4, 8, 16] {
            let s = space(n);
            let load = apply_noise(&m, &s, &vec![0.0; s.n_velocity()], &[1.0]).unwrap();
            let interp = s.interpolate_velocity(|x| [x[0].cos(), 0.0]);
            let mass = assemble_mass(&s, FieldKind::Velocity);
            let reference = mass.apply(&interp);
            let gap = load
                .iter()
                .zip(&reference)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            let scale = reference.iter().fold(0.0f64, |a, b| a.max(b.abs()));
            gaps.push(gap / scale);
        }
        assert!(gaps[0] < 5e-2 && gaps[2] < 1e-4, "{gaps:?}");
        assert!(gaps[2] < gaps[1] && gaps[1] < gaps[0], "{gaps:?}");
    }

    #[test]
    fn additive_shortcut_matches_assembly() {
        let s = space(4);
        let m = make_default_family(2.0, 0.7, NoiseKind::Additive, 6).unwrap();
        let a = NoiseAssembler::new(&m, &s);
        let inc = [0.3, -1.2, 0.5, 0.0, 2.0, -0.1];
        let u = smooth_state(&s);
        let fast = a.apply(&u, &inc).unwrap();
        let slow = a.assemble(&u, &inc);
        for (x, y) in fast.iter().zip(&slow) {
            assert!((x - y).abs() < 1e-13);
        }
        assert!(a.apply(&u, &inc[..3]).is_err());
    }

    #[test]
    fn coarsened_increments_are_linear() {
        let s = space(4);
        let u = smooth_state(&s);
        for kind in [NoiseKind::Additive, NoiseKind::NonlinearMult] {
            let m = make_default_family(2.0, 1.0, kind, 6).unwrap();
            let a = NoiseAssembler::new(&m, &s);
            let fine = sample_path(8, 6, 1.0, 5, 0).unwrap();
            let coarse = coarsen_path(&fine, 4).unwrap();
            for mc in 1..=2 {
                let direct = a.apply(&u, coarse.row(mc)).unwrap();
                let mut summed = vec![0.0; direct.len()];
                for mf in 4 * (mc - 1) + 1..=4 * mc {
                    for (o, v) in summed.iter_mut().zip(a.apply(&u, fine.row(mf)).unwrap()) {
                        *o += v;
                    }
                }
                let scale = direct.iter().fold(1.0f64, |x, y| x.max(y.abs()));
                for (x, y) in direct.iter().zip(&summed) {
                    assert!((x - y).abs() <= 1e-12 * scale);
                }
            }
        }
    }

    #[test]
    fn ito_isometry() {
        let s = space(4);
        let u = smooth_state(&s);
        let m = make_default_family(2.0, 1.0, NoiseKind::NonlinearMult, 6).unwrap();
        let a = NoiseAssembler::new(&m, &s);
        let horizon = 0.5;
        let paths = 1000;
        let mut mean = 0.0;
        for id in 0..paths {
            let p = sample_path(10, 6, horizon, 77, id).unwrap();
            mean += a.field_norm_sq(&u, &p.brownian_at(10)).unwrap();
        }
        mean /= paths as f64;
        let expected = horizon * a.hilbert_schmidt_sq(&u).unwrap();
        assert!((mean - expected).abs() < 0.15 * expected, "{mean} vs {expected}");
    }

    #[test]
    fn mode_norms_match_closed_form() {
        let s = space(8);
        let m = make_default_family(2.0, 1.0, NoiseKind::Additive, 4).unwrap();
        let a = NoiseAssembler::new(&m, &s);
        let zero = vec![0.0; s.n_velocity()];
        let expected: f64 = (0..4).map(|k| 2.0 * std::f64::consts::PI.powi(2) * m.shape(k).weight.powi(2)).sum();
        let got = a.hilbert_schmidt_sq(&zero).unwrap();
        assert!((got - expected).abs() < 1e-3 * expected, "{got} vs {expected}");
    }

    #[test]
    fn holder_diagnostic() {
        let m = make_default_family(2.0, 1.0, NoiseKind::Additive, 16).unwrap();
        let paths: Vec<_> = (0..50).map(|id| sample_path(256, 16, 1.0, 3, id).unwrap()).collect();
        let a = holder_exponent(&m, &paths).unwrap();
        assert!(a >= 0.4, "{a}");
        assert!(a < 0.6, "{a}");
        assert!(holder_exponent(&m, &[]).is_err());
    }
}
