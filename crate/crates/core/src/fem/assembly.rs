//! Assembly of the mass, stiffness, divergence and convection operators.
//!
//! All bilinear forms are integrated with the degree-5 rule, which is exact
//! for every Taylor-Hood form including the trilinear convection term.

use serde::{Deserialize, Serialize};

use super::sparse::SparseOperator;
use super::space::{kind_index, FeSpace, FieldKind, ScalarDofMap, Tabulation};

/// Discretization of the convective term `(grad v) b + theta (div b) v`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ConvectionForm {
    /// `theta = 1`, the coefficient written in the fully discrete scheme.
    Full,
    /// `theta = 1/2`, skew-symmetric: `C[v, v] = 0`.
    #[default]
    Skew,
}

impl ConvectionForm {
    pub fn divergence_factor(self) -> f64 {
        match self {
            ConvectionForm::Full => 1.0,
            ConvectionForm::Skew => 0.5,
        }
    }
}

impl std::str::FromStr for ConvectionForm {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "skew" => Ok(Self::Skew),
            "full" => Ok(Self::Full),
            other => Err(format!("unknown convection form '{other}'")),
        }
    }
}

fn scalar_local<F>(space: &FeSpace, map: &ScalarDofMap, symmetric: bool, mut local: F) -> SparseOperator
where
    F: FnMut(usize, &mut [[f64; 6]; 6]),
{
    let mesh = space.mesh();
    let l = map.local_size();
    // local matrices only depend on the triangle kind
    let mut cache = [[[0.0; 6]; 6]; 2];
    for k in 0..2 {
        local(k, &mut cache[k]);
    }
    let mut entries = Vec::with_capacity(mesh.num_triangles() * l * l);
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let m = &cache[kind_index(tri.kind)];
        let dofs = map.cell(t);
        for a in 0..l {
            for b in 0..l {
                entries.push((dofs[a], dofs[b], m[a][b]));
            }
        }
    }
    SparseOperator::from_triplets(map.ndofs(), map.ndofs(), entries, symmetric)
}

/// Expands a scalar operator to the two-component block-diagonal operator.
pub fn block_diagonal(scalar: &SparseOperator) -> SparseOperator {
    let n = scalar.nrows();
    let m = scalar.ncols();
    let entries = scalar
        .iter()
        .flat_map(|(r, c, v)| [(r, c, v), (n + r, m + c, v)])
        .collect();
    SparseOperator::from_triplets(2 * n, 2 * m, entries, scalar.is_symmetric())
}

fn mass_local(space: &FeSpace, tab: &Tabulation, l: usize, kind: usize, out: &mut [[f64; 6]; 6]) {
    let area = space.areas()[kind];
    for (q, w) in space.rule().weights.iter().enumerate() {
        let v = &tab.values[q];
        for a in 0..l {
            for b in 0..l {
                out[a][b] += w * area * v[a] * v[b];
            }
        }
    }
}

/// Scalar mass matrix of a dof map.
pub fn scalar_mass(space: &FeSpace, map: &ScalarDofMap, tab: &Tabulation) -> SparseOperator {
    let l = map.local_size();
    scalar_local(space, map, true, |k, out| mass_local(space, tab, l, k, out))
}

/// Mass matrix of the velocity (two blocks) or pressure space.
pub fn assemble_mass(space: &FeSpace, kind: FieldKind) -> SparseOperator {
    match kind {
        FieldKind::Velocity => block_diagonal(&scalar_mass(space, space.velocity_map(), space.velocity_tab())),
        FieldKind::Pressure => scalar_mass(space, space.pressure_map(), space.pressure_tab()),
    }
}

/// Scalar Laplacian block `int grad phi_a . grad phi_b`.
pub fn scalar_stiffness(space: &FeSpace) -> SparseOperator {
    let map = space.velocity_map();
    let tab = space.velocity_tab();
    let l = map.local_size();
    let areas = space.areas();
    scalar_local(space, map, true, |k, out| {
        for (q, w) in space.rule().weights.iter().enumerate() {
            let g = &tab.grads[k][q];
            for a in 0..l {
                for b in 0..l {
                    out[a][b] += w * areas[k] * (g[a][0] * g[b][0] + g[a][1] * g[b][1]);
                }
            }
        }
    })
}

/// Vector stiffness `int grad v : grad w`.
pub fn assemble_stiffness(space: &FeSpace) -> SparseOperator {
    block_diagonal(&scalar_stiffness(space))
}

/// Divergence coupling `B[q, v] = int div(v) q`, of shape `n_pressure x n_velocity`.
pub fn assemble_divergence(space: &FeSpace) -> SparseOperator {
    let mesh = space.mesh();
    let vmap = space.velocity_map();
    let pmap = space.pressure_map();
    let vt = space.velocity_tab();
    let pt = space.pressure_tab();
    let lv = vmap.local_size();
    let lp = pmap.local_size();
    let ns = space.n_scalar_velocity();
    let mut cache = [[[[0.0; 6]; 6]; 2]; 2];
    for (k, ck) in cache.iter_mut().enumerate() {
        let area = space.areas()[k];
        for (q, w) in space.rule().weights.iter().enumerate() {
            for c in 0..2 {
                for i in 0..lp {
                    for a in 0..lv {
                        ck[c][i][a] += w * area * pt.values[q][i] * vt.grads[k][q][a][c];
                    }
                }
            }
        }
    }
    let mut entries = Vec::with_capacity(mesh.num_triangles() * 2 * lv * lp);
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let loc = &cache[kind_index(tri.kind)];
        let vd = vmap.cell(t);
        let pd = pmap.cell(t);
        for c in 0..2 {
            for i in 0..lp {
                for a in 0..lv {
                    entries.push((pd[i], c * ns + vd[a], loc[c][i][a]));
                }
            }
        }
    }
    SparseOperator::from_triplets(space.n_pressure(), space.n_velocity(), entries, false)
}

/// Assembles the convection operator with transport field `b` (velocity
/// coefficients): `C[v, w] = int ((grad v) b + theta (div b) v) . w`,
/// stored with rows indexed by the test function `w`.
pub fn assemble_convection(space: &FeSpace, b: &[f64], form: ConvectionForm) -> SparseOperator {
    let asm = ConvectionAssembler::new(space);
    let mut scalar = asm.pattern().clone();
    asm.assemble_into(space, b, form, scalar.values_mut());
    block_diagonal(&scalar)
}

/// Reusable scalar convection assembly with a fixed sparsity pattern.
///
/// The convection operator is block diagonal with identical scalar blocks;
/// only the scalar block is assembled.
#[derive(Debug, Clone)]
pub struct ConvectionAssembler {
    pattern: SparseOperator,
    /// `positions[t * l * l + a * l + b]` is the CSR slot of entry (test a, trial b).
    positions: Vec<usize>,
}

impl ConvectionAssembler {
    pub fn new(space: &FeSpace) -> Self {
        let mut pattern = scalar_stiffness(space);
        pattern.values_mut().iter_mut().for_each(|v| *v = 0.0);
        let map = space.velocity_map();
        let l = map.local_size();
        let mut positions = Vec::with_capacity(space.mesh().num_triangles() * l * l);
        for t in 0..space.mesh().num_triangles() {
            let d = map.cell(t);
            for a in 0..l {
                for b in 0..l {
                    positions.push(pattern.position(d[a], d[b]).expect("pattern covers element"));
                }
            }
        }
        Self { pattern, positions }
    }

    pub fn pattern(&self) -> &SparseOperator {
        &self.pattern
    }

    /// Writes the scalar convection block values for transport `b` into `out`.
    pub fn assemble_into(&self, space: &FeSpace, b: &[f64], form: ConvectionForm, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let theta = form.divergence_factor();
        let map = space.velocity_map();
        let tab = space.velocity_tab();
        let l = map.local_size();
        let ns = space.n_scalar_velocity();
        let rule = space.rule();
        let areas = space.areas();
        let mut loc = [[0.0; 6]; 6];
        for (t, tri) in space.mesh().triangles().iter().enumerate() {
            let k = kind_index(tri.kind);
            let d = map.cell(t);
            let mut bx = [0.0; 6];
            let mut by = [0.0; 6];
            for a in 0..l {
                bx[a] = b[d[a]];
                by[a] = b[ns + d[a]];
            }
            if bx[..l].iter().chain(&by[..l]).all(|&v| v == 0.0) {
                continue;
            }
            loc.iter_mut().for_each(|r| r.iter_mut().for_each(|v| *v = 0.0));
            for (q, w) in rule.weights.iter().enumerate() {
                let phi = &tab.values[q];
                let g = &tab.grads[k][q];
                let mut bq = [0.0; 2];
                let mut divb = 0.0;
                for a in 0..l {
                    bq[0] += bx[a] * phi[a];
                    bq[1] += by[a] * phi[a];
                    divb += bx[a] * g[a][0] + by[a] * g[a][1];
                }
                let wq = w * areas[k];
                for trial in 0..l {
                    let adv = bq[0] * g[trial][0] + bq[1] * g[trial][1] + theta * divb * phi[trial];
                    let s = wq * adv;
                    for test in 0..l {
                        loc[test][trial] += s * phi[test];
                    }
                }
            }
            let base = t * l * l;
            for test in 0..l {
                for trial in 0..l {
                    out[self.positions[base + test * l + trial]] += loc[test][trial];
                }
            }
        }
    }
}

/// Applies a scalar block to both velocity components: `y += alpha C x`.
pub fn apply_block_scalar(scalar: &SparseOperator, alpha: f64, x: &[f64], y: &mut [f64]) {
    let ns = scalar.nrows();
    let (x0, x1) = x.split_at(ns);
    let (y0, y1) = y.split_at_mut(ns);
    scalar.apply_add(alpha, x0, y0);
    scalar.apply_add(alpha, x1, y1);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::space::FeSpace;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    const AREA: f64 = 4.0 * PI * PI;

    fn lcg(seed: &mut u64) -> f64 {
        *seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((*seed >> 11) as f64) / ((1u64 << 53) as f64) - 0.5
    }

    #[test]
    fn mass_integrates_constants() {
        let s = FeSpace::taylor_hood(4).unwrap();
        let m = assemble_mass(&s, FieldKind::Velocity);
        let ns = s.n_scalar_velocity();
        let mut one_x = vec![0.0; 2 * ns];
        one_x[..ns].iter_mut().for_each(|v| *v = 1.0);
        assert_relative_eq!(m.quad_form(&one_x), AREA, max_relative = 1e-13);
        assert!(m.asymmetry() < 1e-15);
        let mp = assemble_mass(&s, FieldKind::Pressure);
        assert_relative_eq!(mp.quad_form(&vec![1.0; s.n_pressure()]), AREA, max_relative = 1e-13);
    }

    #[test]
    fn mass_row_sums_are_basis_integrals() {
        let s = FeSpace::taylor_hood(3).unwrap();
        let m = assemble_mass(&s, FieldKind::Pressure);
        // P1 hat functions integrate to (area of patch) / 3 = 6 * (dx^2/2) / 3
        let dx = s.mesh().spacing();
        for r in m.row_sums() {
            assert_relative_eq!(r, dx * dx, max_relative = 1e-13);
        }
        // P2: vertex functions integrate to zero, edge functions to 2 * (dx^2/2)/3
        let mv = scalar_mass(&s, s.velocity_map(), s.velocity_tab());
        let rs = mv.row_sums();
        let nv = s.mesh().num_vertices();
        for (k, r) in rs.iter().enumerate() {
            let expected = if k < nv { 0.0 } else { dx * dx / 3.0 };
            assert!((r - expected).abs() < 1e-13);
        }
    }

    #[test]
    fn stiffness_kernel_and_sine_energy() {
        let s = FeSpace::taylor_hood(16).unwrap();
        let a = assemble_stiffness(&s);
        let ns = s.n_scalar_velocity();
        let mut c = vec![0.0; 2 * ns];
        c[ns..].iter_mut().for_each(|v| *v = 3.0);
        assert!(a.quad_form(&c).abs() < 1e-11);
        let v = s.interpolate_velocity(|x| [x[0].sin(), 0.0]);
        // int cos^2 x = 2 pi^2
        assert_relative_eq!(a.quad_form(&v), 2.0 * PI * PI, max_relative = 1e-3);
    }

    #[test]
    fn stiffness_converges_to_closed_form() {
        let err = |n| {
            let s = FeSpace::taylor_hood(n).unwrap();
            let v = s.interpolate_velocity(|x| [x[0].sin(), 0.0]);
            (assemble_stiffness(&s).quad_form(&v) - 2.0 * PI * PI).abs()
        };
        let (e1, e2) = (err(8), err(16));
        assert!(e2 < e1 / 8.0, "{e1} {e2}");
    }

    #[test]
    fn mass_quadratic_form_converges() {
        // int (cos x cos y)^2 = pi^2
        let form = |n| {
            let s = FeSpace::taylor_hood(n).unwrap();
            let v = s.interpolate_velocity(|x| [x[0].cos() * x[1].cos(), 0.0]);
            assemble_mass(&s, FieldKind::Velocity).quad_form(&v)
        };
        let e8 = (form(8) - PI * PI).abs();
        let e16 = (form(16) - PI * PI).abs();
        assert!(e8 < 5e-2 && e16 < e8 / 8.0, "{e8} {e16}");
    }

    #[test]
    fn stiffness_translation_invariant() {
        let s = FeSpace::taylor_hood(6).unwrap();
        let a = assemble_stiffness(&s);
        let dx = s.mesh().spacing();
        let f = |x: [f64; 2]| [(x[0] + 0.3).sin() * x[1].cos(), (2.0 * x[1]).sin()];
        let v = s.interpolate_velocity(f);
        let w = s.interpolate_velocity(|x| f([x[0] + dx, x[1]]));
        assert_relative_eq!(a.quad_form(&v), a.quad_form(&w), max_relative = 1e-12);
    }

    #[test]
    fn divergence_annihilates_constants() {
        let s = FeSpace::taylor_hood(5).unwrap();
        let b = assemble_divergence(&s);
        let ns = s.n_scalar_velocity();
        let mut c = vec![0.0; 2 * ns];
        c[..ns].iter_mut().for_each(|v| *v = 1.0);
        c[ns..].iter_mut().for_each(|v| *v = -2.0);
        assert!(b.apply(&c).iter().all(|v| v.abs() < 1e-13));
        let bt1 = b.apply_transpose(&vec![1.0; s.n_pressure()]);
        assert!(bt1.iter().all(|v| v.abs() < 1e-13));
    }

    #[test]
    fn divergence_of_stream_function_field_vanishes_with_h() {
        let res = |n| {
            let s = FeSpace::taylor_hood(n).unwrap();
            // grad^perp of sin(x) sin(2y) + cos(y)
            let v = s.interpolate_velocity(|x| {
                [-2.0 * x[0].sin() * (2.0 * x[1]).cos() + x[1].sin(), x[0].cos() * (2.0 * x[1]).sin()]
            });
            crate::fem::sparse::norm2(&assemble_divergence(&s).apply(&v))
        };
        let (r8, r16) = (res(8), res(16));
        assert!(r16 < r8 / 4.0, "{r8} {r16}");
    }

    #[test]
    fn skew_convection_is_antisymmetric_on_diagonal() {
        let s = FeSpace::taylor_hood(4).unwrap();
        let mut seed = 7;
        let b: Vec<f64> = (0..s.n_velocity()).map(|_| lcg(&mut seed)).collect();
        let c = assemble_convection(&s, &b, ConvectionForm::Skew);
        for _ in 0..5 {
            let v: Vec<f64> = (0..s.n_velocity()).map(|_| lcg(&mut seed)).collect();
            let scale = crate::fem::sparse::norm2(&v).powi(2) * crate::fem::sparse::norm2(&b);
            assert!(c.quad_form(&v).abs() < 1e-12 * scale.max(1.0));
        }
        let lit = assemble_convection(&s, &b, ConvectionForm::Full);
        let v: Vec<f64> = (0..s.n_velocity()).map(|_| lcg(&mut seed)).collect();
        assert!(lit.quad_form(&v).abs() > 1e-6);
    }

    #[test]
    fn zero_transport_gives_zero_operator() {
        let s = FeSpace::taylor_hood(3).unwrap();
        let c = assemble_convection(&s, &vec![0.0; s.n_velocity()], ConvectionForm::Full);
        assert!(c.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn forms_coincide_for_divergence_free_transport() {
        let gap = |n| {
            let s = FeSpace::taylor_hood(n).unwrap();
            let b = s.interpolate_velocity(|x| [-x[0].sin() * x[1].cos(), x[0].cos() * x[1].sin()]);
            let skew = assemble_convection(&s, &b, ConvectionForm::Skew);
            let lit = assemble_convection(&s, &b, ConvectionForm::Full);
            let v = s.interpolate_velocity(|x| [x[1].cos(), (x[0] + x[1]).sin()]);
            let w = s.interpolate_velocity(|x| [x[0].sin(), x[1].cos() * x[0].cos()]);
            (skew.bilinear(&w, &v) - lit.bilinear(&w, &v)).abs()
        };
        let (g8, g16) = (gap(8), gap(16));
        assert!(g8 < 1e-2 && g16 <= (g8 / 4.0).max(1e-13), "{g8} {g16}");
    }
}
