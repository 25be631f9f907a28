//! L²-orthogonal projections onto the discretely divergence-free velocity
//! space and onto the pressure space, plus error norms against smooth fields.

use std::sync::Arc;

use super::assembly::{assemble_divergence, assemble_mass};
use super::krylov::conjugate_gradient;
use super::quadrature::TriangleRule;
use super::saddle::{pressure_weights, SaddleSystem};
use super::space::{kind_index, FeField, FeSpace, FieldKind, ScalarDofMap};
use super::sparse::SparseOperator;
use crate::error::{Error, Result};

/// Points per direction of the collapsed rule used for loads and error
/// norms of non-polynomial fields (exact to degree 10).
const FINE_POINTS: usize = 6;

/// `int f . phi_i` for every velocity basis function.
pub fn velocity_load(space: &FeSpace, f: impl Fn([f64; 2]) -> [f64; 2]) -> Vec<f64> {
    let ns = space.n_scalar_velocity();
    let mut out = vec![0.0; 2 * ns];
    integrate_basis(space, space.velocity_map(), |x, phi, dofs, wq| {
        let v = f(x);
        for (a, &g) in dofs.iter().enumerate() {
            out[g] += wq * v[0] * phi[a];
            out[ns + g] += wq * v[1] * phi[a];
        }
    });
    out
}

/// `int f psi_i` for every pressure basis function.
pub fn pressure_load(space: &FeSpace, f: impl Fn([f64; 2]) -> f64) -> Vec<f64> {
    let mut out = vec![0.0; space.n_pressure()];
    integrate_basis(space, space.pressure_map(), |x, psi, dofs, wq| {
        let v = f(x);
        for (a, &g) in dofs.iter().enumerate() {
            out[g] += wq * v * psi[a];
        }
    });
    out
}

fn integrate_basis<F>(space: &FeSpace, map: &ScalarDofMap, mut visit: F)
where
    F: FnMut([f64; 2], &[f64; 6], &[usize], f64),
{
    let rule = TriangleRule::collapsed_gauss(FINE_POINTS);
    let tab = space.tabulate(map, &rule);
    let areas = space.areas();
    for (t, tri) in space.mesh().triangles().iter().enumerate() {
        let area = areas[kind_index(tri.kind)];
        let dofs = map.cell(t);
        for (q, &p) in rule.points.iter().enumerate() {
            visit(space.map_point(t, p), &tab.values[q], dofs, rule.weights[q] * area);
        }
    }
}

/// Projector onto the discretely divergence-free velocity space.
///
/// Realized as the constrained problem `M u + B^T p = load, B u = 0`. The
/// factorization is computed once and reused.
#[derive(Debug)]
pub struct VelocityProjector {
    space: Arc<FeSpace>,
    mass: SparseOperator,
    system: SaddleSystem,
}

impl VelocityProjector {
    pub fn new(space: &Arc<FeSpace>) -> Result<Self> {
        let mass = assemble_mass(space, FieldKind::Velocity);
        let system = SaddleSystem::new(mass.clone(), assemble_divergence(space), pressure_weights(space))?;
        Ok(Self {
            space: space.clone(),
            mass,
            system,
        })
    }

    pub fn space(&self) -> &Arc<FeSpace> {
        &self.space
    }

    pub fn mass(&self) -> &SparseOperator {
        &self.mass
    }

    /// Projects the field whose L² moments against the basis are `load`.
    pub fn project_load(&self, load: &[f64]) -> Result<FeField> {
        let sol = self.system.solve(load, &vec![0.0; self.space.n_pressure()])?;
        Ok(FeField::velocity(self.space.clone(), sol.velocity))
    }

    /// Projects a velocity FE function of the same space.
    pub fn project_coeffs(&self, coeffs: &[f64]) -> Result<FeField> {
        self.project_load(&self.mass.apply(coeffs))
    }

    /// Projects a square-integrable vector field given pointwise.
    pub fn project_fn(&self, f: impl Fn([f64; 2]) -> [f64; 2]) -> Result<FeField> {
        self.project_load(&velocity_load(&self.space, f))
    }
}

/// Input to [`project_velocity`].
pub enum VelocitySource<'a> {
    Field(&'a FeField),
    Function(&'a dyn Fn([f64; 2]) -> [f64; 2]),
}

/// One-shot projection onto the discretely divergence-free velocity space.
pub fn project_velocity(space: &Arc<FeSpace>, v: VelocitySource<'_>) -> Result<FeField> {
    let proj = VelocityProjector::new(space)?;
    match v {
        VelocitySource::Field(field) => {
            if field.kind != FieldKind::Velocity {
                return Err(Error::InvalidArgument("expected a velocity field".into()));
            }
            if Arc::ptr_eq(&field.space, space) {
                proj.project_coeffs(&field.coeffs)
            } else {
                let other = field.space.clone();
                proj.project_fn(|x| other.eval_velocity(&field.coeffs, x).0)
            }
        }
        VelocitySource::Function(f) => proj.project_fn(f),
    }
}

/// Projector onto the pressure space.
#[derive(Debug)]
pub struct PressureProjector {
    space: Arc<FeSpace>,
    mass: SparseOperator,
    inv_diag: Vec<f64>,
}

impl PressureProjector {
    pub fn new(space: &Arc<FeSpace>) -> Self {
        let mass = assemble_mass(space, FieldKind::Pressure);
        let inv_diag = (0..mass.nrows()).map(|i| 1.0 / mass.get(i, i)).collect();
        Self {
            space: space.clone(),
            mass,
            inv_diag,
        }
    }

    pub fn mass(&self) -> &SparseOperator {
        &self.mass
    }

    pub fn project_load(&self, load: &[f64]) -> Result<FeField> {
        let mut x = vec![0.0; load.len()];
        let out = conjugate_gradient(|v, y| {
            y.iter_mut().for_each(|e| *e = 0.0);
            self.mass.apply_add(1.0, v, y)
        }, &self.inv_diag, load, &mut x, 1e-14, 10 * load.len() + 100);
        if !out.converged {
            return Err(Error::NotConverged {
                iterations: out.iterations,
                residual: out.relative_residual,
            });
        }
        Ok(FeField::pressure(self.space.clone(), x))
    }

    pub fn project_fn(&self, f: impl Fn([f64; 2]) -> f64) -> Result<FeField> {
        self.project_load(&pressure_load(&self.space, f))
    }
}

/// One-shot L² projection of a scalar field onto the pressure space.
pub fn project_pressure(space: &Arc<FeSpace>, p: impl Fn([f64; 2]) -> f64) -> Result<FeField> {
    PressureProjector::new(space).project_fn(p)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocityErrors {
    /// `||v - v_h||_{L2}`
    pub l2: f64,
    /// `||grad v - grad v_h||_{L2}`
    pub h1: f64,
}

/// Error norms of a velocity FE function against a smooth field with
/// Jacobian `jac[i][j] = d v_i / d x_j`.
pub fn velocity_error(
    space: &FeSpace,
    coeffs: &[f64],
    value: impl Fn([f64; 2]) -> [f64; 2],
    jac: impl Fn([f64; 2]) -> [[f64; 2]; 2],
) -> VelocityErrors {
    let map = space.velocity_map();
    let ns = space.n_scalar_velocity();
    let rule = TriangleRule::collapsed_gauss(FINE_POINTS);
    let tab = space.tabulate(map, &rule);
    let areas = space.areas();
    let (mut l2, mut h1) = (0.0, 0.0);
    for (t, tri) in space.mesh().triangles().iter().enumerate() {
        let k = kind_index(tri.kind);
        let dofs = map.cell(t);
        for (q, &p) in rule.points.iter().enumerate() {
            let x = space.map_point(t, p);
            let mut u = [0.0; 2];
            let mut g = [[0.0; 2]; 2];
            for (a, &d) in dofs.iter().enumerate() {
                let phi = tab.values[q][a];
                let dphi = tab.grads[k][q][a];
                for (c, off) in [0, ns].into_iter().enumerate() {
                    let coef = coeffs[off + d];
                    u[c] += coef * phi;
                    g[c][0] += coef * dphi[0];
                    g[c][1] += coef * dphi[1];
                }
            }
            let v = value(x);
            let j = jac(x);
            let w = rule.weights[q] * areas[k];
            l2 += w * ((v[0] - u[0]).powi(2) + (v[1] - u[1]).powi(2));
            h1 += w * (0..2).flat_map(|i| (0..2).map(move |jj| (i, jj))).map(|(i, jj)| (j[i][jj] - g[i][jj]).powi(2)).sum::<f64>();
        }
    }
    VelocityErrors {
        l2: l2.sqrt(),
        h1: h1.sqrt(),
    }
}

/// `||p - p_h||_{L2}` for a pressure FE function.
pub fn pressure_error(space: &FeSpace, coeffs: &[f64], value: impl Fn([f64; 2]) -> f64) -> f64 {
    let map = space.pressure_map();
    let rule = TriangleRule::collapsed_gauss(FINE_POINTS);
    let tab = space.tabulate(map, &rule);
    let areas = space.areas();
    let mut err = 0.0;
    for (t, tri) in space.mesh().triangles().iter().enumerate() {
        let dofs = map.cell(t);
        for (q, &p) in rule.points.iter().enumerate() {
            let x = space.map_point(t, p);
            let ph: f64 = dofs.iter().enumerate().map(|(a, &d)| coeffs[d] * tab.values[q][a]).sum();
            err += rule.weights[q] * areas[kind_index(tri.kind)] * (value(x) - ph).powi(2);
        }
    }
    err.sqrt()
}
