//! Compressed sparse row storage for assembled operators.

use std::io::Write;
use std::path::Path;

use faer::sparse::{SparseColMat, Triplet};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    symmetric: bool,
}

impl SparseOperator {
    /// Builds a CSR matrix from `(row, col, value)` entries; duplicates are summed.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        mut entries: Vec<(usize, usize, f64)>,
        symmetric: bool,
    ) -> Self {
        entries.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in entries {
            debug_assert!(r < nrows && c < ncols);
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..nrows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
            symmetric,
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Iterates `(row, col, value)` over stored entries.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (r, self.col_idx[k], self.values[k]))
        })
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let cols = &self.col_idx[self.row_ptr[r]..self.row_ptr[r + 1]];
        match cols.binary_search(&c) {
            Ok(k) => self.values[self.row_ptr[r] + k],
            Err(_) => 0.0,
        }
    }

    /// Position of entry `(r, c)` in the value array.
    pub fn position(&self, r: usize, c: usize) -> Option<usize> {
        let cols = &self.col_idx[self.row_ptr[r]..self.row_ptr[r + 1]];
        cols.binary_search(&c).ok().map(|k| self.row_ptr[r] + k)
    }

    /// `y = A x`
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.apply_add(1.0, x, &mut y);
        y
    }

    /// `y += alpha A x`
    pub fn apply_add(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for r in 0..self.nrows {
            let mut s = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                s += self.values[k] * x[self.col_idx[k]];
            }
            y[r] += alpha * s;
        }
    }

    /// `y = A^T x`
    pub fn apply_transpose(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.ncols];
        self.apply_transpose_add(1.0, x, &mut y);
        y
    }

    pub fn apply_transpose_add(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.nrows);
        assert_eq!(y.len(), self.ncols);
        for r in 0..self.nrows {
            let xr = alpha * x[r];
            if xr == 0.0 {
                continue;
            }
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                y[self.col_idx[k]] += self.values[k] * xr;
            }
        }
    }

    /// `w^T A v`
    pub fn bilinear(&self, w: &[f64], v: &[f64]) -> f64 {
        assert_eq!(w.len(), self.nrows);
        let mut s = 0.0;
        for r in 0..self.nrows {
            let mut t = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                t += self.values[k] * v[self.col_idx[k]];
            }
            s += w[r] * t;
        }
        s
    }

    pub fn quad_form(&self, v: &[f64]) -> f64 {
        self.bilinear(v, v)
    }

    pub fn transpose(&self) -> Self {
        let entries = self.iter().map(|(r, c, v)| (c, r, v)).collect();
        Self::from_triplets(self.ncols, self.nrows, entries, self.symmetric)
    }

    /// Row sums `A 1`.
    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.nrows)
            .map(|r| self.values[self.row_ptr[r]..self.row_ptr[r + 1]].iter().sum())
            .collect()
    }

    /// Largest `|A_ij - A_ji|`.
    pub fn asymmetry(&self) -> f64 {
        self.iter()
            .map(|(r, c, v)| (v - self.get(c, r)).abs())
            .fold(0.0, f64::max)
    }

    /// `alpha A + beta B` for operators of equal shape.
    pub fn linear_combination(alpha: f64, a: &Self, beta: f64, b: &Self) -> Self {
        assert_eq!((a.nrows, a.ncols), (b.nrows, b.ncols));
        let entries = a
            .iter()
            .map(|(r, c, v)| (r, c, alpha * v))
            .chain(b.iter().map(|(r, c, v)| (r, c, beta * v)))
            .collect();
        Self::from_triplets(a.nrows, a.ncols, entries, a.symmetric && b.symmetric)
    }

    pub fn to_faer(&self) -> Result<SparseColMat<usize, f64>> {
        let trip: Vec<_> = self.iter().map(|(r, c, v)| Triplet::new(r, c, v)).collect();
        SparseColMat::try_new_from_triplets(self.nrows, self.ncols, &trip)
            .map_err(|e| Error::InvalidArgument(format!("sparse conversion failed: {e:?}")))
    }

    /// Writes the matrix in coordinate `(row, col, value)` text format.
    pub fn write_coordinate(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        let mut body = || -> std::io::Result<()> {
            writeln!(w, "# {} {} {}", self.nrows, self.ncols, self.nnz())?;
            for (r, c, v) in self.iter() {
                writeln!(w, "{r} {c} {v:e}")?;
            }
            w.flush()
        };
        body().map_err(|e| Error::io(path, e))
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_sum_duplicates() {
        let a = SparseOperator::from_triplets(
            2,
            3,
            vec![(0, 1, 1.0), (1, 2, 2.0), (0, 1, 0.5), (1, 0, -1.0)],
            false,
        );
        assert_eq!(a.nnz(), 3);
        assert_eq!(a.get(0, 1), 1.5);
        assert_eq!(a.apply(&[1.0, 2.0, 3.0]), vec![3.0, 5.0]);
        assert_eq!(a.apply_transpose(&[1.0, 1.0]), vec![-1.0, 1.5, 2.0]);
        assert_eq!(a.transpose().get(2, 1), 2.0);
        assert_eq!(a.bilinear(&[1.0, 1.0], &[1.0, 1.0, 1.0]), 2.5);
    }
}
