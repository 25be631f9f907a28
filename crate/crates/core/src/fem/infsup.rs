//! Discrete inf-sup constant of a velocity/pressure pair.
//!
//! The constant is `sqrt(lambda_min)` of the generalized eigenproblem
//! `B K^+ B^T q = lambda M_p q` on zero-mean pressures, where `K` is the
//! velocity stiffness (gradient seminorm on zero-mean velocities) and `M_p`
//! the pressure mass matrix.

use faer::linalg::solvers::Solve;
use faer::MatMut;
use nalgebra::{DMatrix, SymmetricEigen};

use super::assembly::{assemble_divergence, assemble_mass, assemble_stiffness};
use super::saddle::factorize;
use super::space::{FeSpace, FieldKind};
use super::sparse::SparseOperator;
use crate::error::{Error, Result};

/// Generalized eigenvalue assigned to the constant pressure. The remaining
/// spectrum lies in `[0, 1]` because `||div v|| <= ||grad v||` on the torus.
const CONSTANT_SHIFT: f64 = 2.0;

pub fn infsup_constant(space: &FeSpace) -> Result<f64> {
    let k = assemble_stiffness(space);
    let b = assemble_divergence(space);
    let mp = assemble_mass(space, FieldKind::Pressure);
    let nv = space.n_velocity();
    let ns = space.n_scalar_velocity();
    let np = space.n_pressure();

    // border K with the per-component constants to pick the zero-mean solution
    let mut entries: Vec<(usize, usize, f64)> = k.iter().collect();
    for c in 0..2 {
        for i in 0..ns {
            entries.push((c * ns + i, nv + c, 1.0));
            entries.push((nv + c, c * ns + i, 1.0));
        }
    }
    let bordered = SparseOperator::from_triplets(nv + 2, nv + 2, entries, true);
    let lu = factorize(&bordered).map_err(|e| Error::Eigen(format!("stiffness factorization: {e}")))?;

    let dim = nv + 2;
    let bt = b.transpose();
    let mut rhs = vec![0.0; dim * np];
    for (r, c, v) in bt.iter() {
        rhs[c * dim + r] = v;
    }
    lu.solve_in_place(MatMut::from_column_major_slice_mut(&mut rhs, dim, np));

    let mut schur = DMatrix::<f64>::zeros(np, np);
    for q in 0..np {
        let col = b.apply(&rhs[q * dim..q * dim + nv]);
        for (r, v) in col.into_iter().enumerate() {
            schur[(r, q)] = v;
        }
    }
    let schur_t = schur.transpose();
    schur += schur_t;
    schur *= 0.5;

    let mut mass = DMatrix::<f64>::zeros(np, np);
    for (r, c, v) in mp.iter() {
        mass[(r, c)] += v;
    }
    let w = mp.row_sums();
    let total: f64 = w.iter().sum();
    for i in 0..np {
        for j in 0..np {
            schur[(i, j)] += CONSTANT_SHIFT * w[i] * w[j] / total;
        }
    }

    let chol = mass
        .cholesky()
        .ok_or_else(|| Error::Eigen("pressure mass matrix is not positive definite".into()))?;
    let l = chol.l();
    let y = l
        .solve_lower_triangular(&schur)
        .ok_or_else(|| Error::Eigen("triangular solve failed".into()))?;
    let c = l
        .solve_lower_triangular(&y.transpose())
        .ok_or_else(|| Error::Eigen("triangular solve failed".into()))?;
    let c = (&c + c.transpose()) * 0.5;
    let eig = SymmetricEigen::try_new(c, 1e-14, 10_000)
        .ok_or_else(|| Error::Eigen("symmetric eigensolver did not converge".into()))?;
    let lambda = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if !lambda.is_finite() {
        return Err(Error::Eigen("non-finite eigenvalue".into()));
    }
    Ok(lambda.max(0.0).sqrt())
}
