//! Saddle-point solver for `[A B^T; B 0] (u, p) = (f, g)` with a zero-mean
//! pressure gauge.
//!
//! The constant pressure is removed by a scalar Lagrange multiplier `l`:
//!
//! ```text
//! [ A   B^T  0 ] [u]   [f]
//! [ B   0    w ] [p] = [g]
//! [ 0   w^T  0 ] [l]   [0]
//! ```
//!
//! where `w_i = int psi_i` so that `w^T p = int p = 0`. The full system is
//! factorized by sparse LU. Perturbed systems (the base operator plus a
//! velocity-block term such as convection) are solved by GMRES preconditioned
//! with that factorization. If the factorization is unavailable, GMRES runs
//! with a block-diagonal Schur-complement preconditioner instead.

use std::sync::Arc;

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::MatMut;

use super::assembly::assemble_mass;
use super::krylov::{gmres, GmresOptions};
use super::space::{FeField, FeSpace, FieldKind};
use super::sparse::{norm2, SparseOperator};
use crate::error::{Error, Result};

/// Relative residual bound every saddle solve must meet.
pub const SADDLE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct SaddleSolution {
    pub velocity: Vec<f64>,
    pub pressure: Vec<f64>,
    pub relative_residual: f64,
    pub iterations: usize,
}

enum Preconditioner {
    Direct(Lu<usize, f64>),
    /// Inverse diagonals of the velocity block and of the approximate Schur complement.
    BlockDiagonal { inv_a: Vec<f64>, inv_s: Vec<f64> },
}

pub struct SaddleSystem {
    a: SparseOperator,
    b: SparseOperator,
    weights: Vec<f64>,
    full: SparseOperator,
    precond: Preconditioner,
}

impl std::fmt::Debug for SaddleSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SaddleSystem")
            .field("n_velocity", &self.a.nrows())
            .field("n_pressure", &self.b.nrows())
            .field("direct", &matches!(self.precond, Preconditioner::Direct(_)))
            .finish()
    }
}

impl SaddleSystem {
    /// Assembles and factorizes the gauged saddle system.
    pub fn new(a: SparseOperator, b: SparseOperator, weights: Vec<f64>) -> Result<Self> {
        Self::build(a, b, weights, false)
    }

    /// Same system, but skips the factorization and uses the iterative
    /// Schur-complement route only.
    pub fn new_iterative(a: SparseOperator, b: SparseOperator, weights: Vec<f64>) -> Result<Self> {
        Self::build(a, b, weights, true)
    }

    fn build(a: SparseOperator, b: SparseOperator, weights: Vec<f64>, iterative: bool) -> Result<Self> {
        let nv = a.nrows();
        let np = b.nrows();
        if a.ncols() != nv || b.ncols() != nv || weights.len() != np {
            return Err(Error::InvalidArgument(format!(
                "saddle blocks have inconsistent shapes: A {}x{}, B {}x{}, weights {}",
                a.nrows(),
                a.ncols(),
                b.nrows(),
                b.ncols(),
                weights.len()
            )));
        }
        let dim = nv + np + 1;
        let mut entries: Vec<(usize, usize, f64)> = Vec::with_capacity(a.nnz() + 2 * b.nnz() + 2 * np);
        entries.extend(a.iter());
        for (r, c, v) in b.iter() {
            entries.push((nv + r, c, v));
            entries.push((c, nv + r, v));
        }
        for (i, &w) in weights.iter().enumerate() {
            entries.push((nv + i, nv + np, w));
            entries.push((nv + np, nv + i, w));
        }
        let full = SparseOperator::from_triplets(dim, dim, entries, a.is_symmetric());
        let precond = if iterative {
            block_diagonal_preconditioner(&a, &b)
        } else {
            match factorize(&full) {
                Ok(lu) => Preconditioner::Direct(lu),
                Err(e) => {
                    log::warn!("saddle factorization failed ({e}); using iterative Schur-complement solver");
                    block_diagonal_preconditioner(&a, &b)
                }
            }
        };
        Ok(Self {
            a,
            b,
            weights,
            full,
            precond,
        })
    }

    pub fn n_velocity(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_pressure(&self) -> usize {
        self.b.nrows()
    }

    pub fn velocity_block(&self) -> &SparseOperator {
        &self.a
    }

    pub fn divergence(&self) -> &SparseOperator {
        &self.b
    }

    pub fn is_direct(&self) -> bool {
        matches!(self.precond, Preconditioner::Direct(_))
    }

    fn apply_precond(&self, r: &[f64], z: &mut [f64]) {
        match &self.precond {
            Preconditioner::Direct(lu) => {
                z.copy_from_slice(r);
                let n = z.len();
                lu.solve_in_place(MatMut::from_column_major_slice_mut(z, n, 1));
            }
            Preconditioner::BlockDiagonal { inv_a, inv_s } => {
                let nv = inv_a.len();
                for i in 0..nv {
                    z[i] = inv_a[i] * r[i];
                }
                for (i, s) in inv_s.iter().enumerate() {
                    z[nv + i] = s * r[nv + i];
                }
                let last = z.len() - 1;
                z[last] = r[last];
            }
        }
    }

    /// Solves the unperturbed system.
    pub fn solve(&self, f: &[f64], g: &[f64]) -> Result<SaddleSolution> {
        self.solve_perturbed(None::<&fn(&[f64], &mut [f64])>, f, g)
    }

    /// Solves `(A + P) u + B^T p = f, B u = g` where `perturb(x, y)` adds
    /// `P x` to `y` on velocity vectors.
    pub fn solve_perturbed<P>(&self, perturb: Option<&P>, f: &[f64], g: &[f64]) -> Result<SaddleSolution>
    where
        P: Fn(&[f64], &mut [f64]),
    {
        let nv = self.n_velocity();
        let np = self.n_pressure();
        assert_eq!(f.len(), nv);
        assert_eq!(g.len(), np);
        let scale = norm2(f) + norm2(g);
        if scale == 0.0 {
            return Ok(SaddleSolution {
                velocity: vec![0.0; nv],
                pressure: vec![0.0; np],
                relative_residual: 0.0,
                iterations: 0,
            });
        }
        let mut rhs = Vec::with_capacity(nv + np + 1);
        rhs.extend_from_slice(f);
        rhs.extend_from_slice(g);
        rhs.push(0.0);
        let apply = |x: &[f64], y: &mut [f64]| {
            y.iter_mut().for_each(|v| *v = 0.0);
            self.full.apply_add(1.0, x, y);
            if let Some(p) = perturb {
                p(&x[..nv], &mut y[..nv]);
            }
        };
        let mut x = vec![0.0; nv + np + 1];
        let direct = self.is_direct();
        let mut iterations = 0;
        if direct && perturb.is_none() {
            self.apply_precond(&rhs, &mut x);
            iterations = 1;
        }
        let opts = if direct {
            GmresOptions::default()
        } else {
            GmresOptions {
                restart: 200,
                max_iterations: 20_000,
                rel_tol: 1e-12,
            }
        };
        // GMRES also serves as iterative refinement for the direct solve
        let out = gmres(apply, |r, z| self.apply_precond(r, z), &rhs, &mut x, opts);
        iterations += out.iterations;
        let relative_residual = self.residual(perturb, &x, f, g) / scale;
        if !relative_residual.is_finite() {
            return Err(Error::Singular(
                "non-finite solution; the pair may violate the inf-sup condition".into(),
            ));
        }
        if relative_residual > SADDLE_TOLERANCE {
            return Err(Error::NotConverged {
                iterations,
                residual: relative_residual,
            });
        }
        let multiplier = x[nv + np];
        if multiplier.abs() > 1e-8 * (1.0 + norm2(&x[nv..nv + np])) {
            log::debug!("constraint right-hand side incompatible with the gauge (multiplier {multiplier:e})");
        }
        let pressure = x[nv..nv + np].to_vec();
        x.truncate(nv);
        Ok(SaddleSolution {
            velocity: x,
            pressure,
            relative_residual,
            iterations,
        })
    }

    /// `max(||(A+P)u + B^T p - f||, ||B u - g||)` for a full solution vector.
    fn residual<P>(&self, perturb: Option<&P>, x: &[f64], f: &[f64], g: &[f64]) -> f64
    where
        P: Fn(&[f64], &mut [f64]),
    {
        let nv = self.n_velocity();
        let np = self.n_pressure();
        let (u, rest) = x.split_at(nv);
        let p = &rest[..np];
        let mut ru = self.a.apply(u);
        if let Some(pf) = perturb {
            pf(u, &mut ru);
        }
        self.b.apply_transpose_add(1.0, p, &mut ru);
        for (r, fi) in ru.iter_mut().zip(f) {
            *r -= fi;
        }
        let mut rp = self.b.apply(u);
        for (r, gi) in rp.iter_mut().zip(g) {
            *r -= gi;
        }
        norm2(&ru).max(norm2(&rp))
    }

    /// Integral weights of the pressure basis used by the gauge.
    pub fn gauge_weights(&self) -> &[f64] {
        &self.weights
    }
}

pub(crate) fn factorize(m: &SparseOperator) -> Result<Lu<usize, f64>> {
    let fm = m.to_faer()?;
    let symbolic = SymbolicLu::try_new(fm.symbolic())
        .map_err(|e| Error::Singular(format!("symbolic LU failed: {e:?}")))?;
    Lu::try_new_with_symbolic(symbolic, fm.as_ref())
        .map_err(|e| Error::Singular(format!("numeric LU failed: {e:?}")))
}

fn block_diagonal_preconditioner(a: &SparseOperator, b: &SparseOperator) -> Preconditioner {
    let inv_a: Vec<f64> = (0..a.nrows())
        .map(|i| {
            let d = a.get(i, i);
            if d != 0.0 {
                1.0 / d
            } else {
                1.0
            }
        })
        .collect();
    // diag(B diag(A)^{-1} B^T)
    let mut s = vec![0.0; b.nrows()];
    for (r, c, v) in b.iter() {
        s[r] += v * v * inv_a[c];
    }
    let smax = s.iter().cloned().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let inv_s = s.iter().map(|&d| 1.0 / d.max(1e-12 * smax)).collect();
    Preconditioner::BlockDiagonal { inv_a, inv_s }
}

/// Pressure gauge weights `int psi_i` of a space.
pub fn pressure_weights(space: &FeSpace) -> Vec<f64> {
    assemble_mass(space, FieldKind::Pressure).row_sums()
}

/// Solves the saddle system once and returns velocity and zero-mean pressure fields.
pub fn solve_saddle(
    space: &Arc<FeSpace>,
    a: &SparseOperator,
    b: &SparseOperator,
    f: &[f64],
    g: &[f64],
) -> Result<(FeField, FeField)> {
    let sys = SaddleSystem::new(a.clone(), b.clone(), pressure_weights(space))?;
    let sol = sys.solve(f, g)?;
    Ok((
        FeField::velocity(space.clone(), sol.velocity),
        FeField::pressure(space.clone(), sol.pressure),
    ))
}
