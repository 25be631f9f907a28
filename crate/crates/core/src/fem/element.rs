//! Scalar Lagrange elements of degree 1 and 2 on the reference triangle.
//!
//! Local node order: the three vertices, then the midpoints of the local
//! edges `(0,1)`, `(1,2)`, `(2,0)`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Lagrange {
    degree: usize,
}

impl Lagrange {
    pub fn new(degree: usize) -> Result<Self> {
        match degree {
            1 | 2 => Ok(Self { degree }),
            d => Err(Error::InvalidArgument(format!(
                "Lagrange degree {d} is not supported (only 1 and 2)"
            ))),
        }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn num_nodes(&self) -> usize {
        if self.degree == 1 {
            3
        } else {
            6
        }
    }

    pub fn nodes(&self) -> &'static [[f64; 2]] {
        const P2: [[f64; 2]; 6] = [
            [0.0, 0.0],
            [1.0, 0.0],
            [0.0, 1.0],
            [0.5, 0.0],
            [0.5, 0.5],
            [0.0, 0.5],
        ];
        &P2[..self.num_nodes()]
    }

    /// Basis values at reference point `p`, written into `out`.
    pub fn values(&self, p: [f64; 2], out: &mut [f64]) {
        let l = [1.0 - p[0] - p[1], p[0], p[1]];
        if self.degree == 1 {
            out[..3].copy_from_slice(&l);
        } else {
            out[0] = l[0] * (2.0 * l[0] - 1.0);
            out[1] = l[1] * (2.0 * l[1] - 1.0);
            out[2] = l[2] * (2.0 * l[2] - 1.0);
            out[3] = 4.0 * l[0] * l[1];
            out[4] = 4.0 * l[1] * l[2];
            out[5] = 4.0 * l[2] * l[0];
        }
    }

    /// Reference gradients `(d/dxi, d/deta)` at `p`.
    pub fn gradients(&self, p: [f64; 2], out: &mut [[f64; 2]]) {
        const DL: [[f64; 2]; 3] = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];
        if self.degree == 1 {
            out[..3].copy_from_slice(&DL);
            return;
        }
        let l = [1.0 - p[0] - p[1], p[0], p[1]];
        for i in 0..3 {
            let f = 4.0 * l[i] - 1.0;
            out[i] = [f * DL[i][0], f * DL[i][1]];
        }
        for (k, (a, b)) in [(0, 1), (1, 2), (2, 0)].into_iter().enumerate() {
            out[3 + k] = [
                4.0 * (DL[a][0] * l[b] + l[a] * DL[b][0]),
                4.0 * (DL[a][1] * l[b] + l[a] * DL[b][1]),
            ];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nodal_basis_is_kronecker() {
        for deg in [1, 2] {
            let e = Lagrange::new(deg).unwrap();
            let mut v = [0.0; 6];
            for (i, &node) in e.nodes().iter().enumerate() {
                e.values(node, &mut v);
                for j in 0..e.num_nodes() {
                    let expected = if i == j { 1.0 } else { 0.0 };
                    assert!((v[j] - expected).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let e = Lagrange::new(2).unwrap();
        let p = [0.23, 0.41];
        let mut g = [[0.0; 2]; 6];
        e.gradients(p, &mut g);
        let d = 1e-6;
        let mut a = [0.0; 6];
        let mut b = [0.0; 6];
        for dir in 0..2 {
            let mut pp = p;
            let mut pm = p;
            pp[dir] += d;
            pm[dir] -= d;
            e.values(pp, &mut a);
            e.values(pm, &mut b);
            for i in 0..6 {
                assert!(((a[i] - b[i]) / (2.0 * d) - g[i][dir]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn partition_of_unity() {
        let e = Lagrange::new(2).unwrap();
        let mut v = [0.0; 6];
        e.values([0.3, 0.2], &mut v);
        assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(Lagrange::new(3).is_err());
    }
}
