//! Uniform periodic triangulations of the torus `[-pi, pi)^2`.
//!
//! The mesh is the `n x n` square grid with every cell split along the same
//! diagonal. Periodicity is purely combinatorial: vertex `(i, j)` has index
//! `(i mod n) + n (j mod n)` and no coordinates are ever matched in floating
//! point. Each cell owns three edges (horizontal, vertical, diagonal) anchored
//! at its lower-left vertex, which gives `3 n^2` edges after identification.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Side length of the periodic box.
pub const PERIOD: f64 = 2.0 * PI;

/// Which half of a grid cell a triangle covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TriangleKind {
    /// `(i,j) -> (i+1,j) -> (i+1,j+1)`, below the diagonal.
    Lower,
    /// `(i,j) -> (i+1,j+1) -> (i,j+1)`, above the diagonal.
    Upper,
}

/// Kind of an edge, relative to its anchor vertex `(i, j)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeKind {
    Horizontal = 0,
    Vertical = 1,
    Diagonal = 2,
}

#[derive(Debug, Clone)]
pub struct Triangle {
    pub kind: TriangleKind,
    /// Cell indices of the anchor vertex.
    pub cell: (usize, usize),
    /// Counter-clockwise vertex indices.
    pub vertices: [usize; 3],
    /// Edge indices for the local edges `(0,1)`, `(1,2)`, `(2,0)`.
    pub edges: [usize; 3],
}

#[derive(Debug, Clone)]
pub struct TorusMesh {
    n: usize,
    vertices: Vec<[f64; 2]>,
    triangles: Vec<Triangle>,
}

impl TorusMesh {
    /// Builds the standard right-triangle split of the periodic `n x n` grid.
    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument(
                "mesh subdivision count must be positive".into(),
            ));
        }
        let dx = PERIOD / n as f64;
        let mut vertices = Vec::with_capacity(n * n);
        for j in 0..n {
            for i in 0..n {
                vertices.push([-PI + i as f64 * dx, -PI + j as f64 * dx]);
            }
        }
        let v = |i: usize, j: usize| (i % n) + n * (j % n);
        let e = |i: usize, j: usize, kind: EdgeKind| 3 * v(i, j) + kind as usize;
        let mut triangles = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                triangles.push(Triangle {
                    kind: TriangleKind::Lower,
                    cell: (i, j),
                    vertices: [v(i, j), v(i + 1, j), v(i + 1, j + 1)],
                    edges: [
                        e(i, j, EdgeKind::Horizontal),
                        e(i + 1, j, EdgeKind::Vertical),
                        e(i, j, EdgeKind::Diagonal),
                    ],
                });
                triangles.push(Triangle {
                    kind: TriangleKind::Upper,
                    cell: (i, j),
                    vertices: [v(i, j), v(i + 1, j + 1), v(i, j + 1)],
                    edges: [
                        e(i, j, EdgeKind::Diagonal),
                        e(i, j + 1, EdgeKind::Horizontal),
                        e(i, j, EdgeKind::Vertical),
                    ],
                });
            }
        }
        Ok(Self {
            n,
            vertices,
            triangles,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Grid spacing `2 pi / n`.
    pub fn spacing(&self) -> f64 {
        PERIOD / self.n as f64
    }

    /// Mesh size: the longest edge, `sqrt(2) * 2 pi / n`.
    pub fn h(&self) -> f64 {
        std::f64::consts::SQRT_2 * self.spacing()
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[Triangle] {
        &self.triangles
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_edges(&self) -> usize {
        3 * self.n * self.n
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// `V - E + F`, which is zero on the torus.
    pub fn euler_characteristic(&self) -> i64 {
        self.num_vertices() as i64 - self.num_edges() as i64 + self.num_triangles() as i64
    }

    /// Unwrapped coordinates of the three corners of a triangle; the first
    /// corner is the anchor vertex of its cell.
    pub fn corners(&self, t: &Triangle) -> [[f64; 2]; 3] {
        let dx = self.spacing();
        let o = [-PI + t.cell.0 as f64 * dx, -PI + t.cell.1 as f64 * dx];
        match t.kind {
            TriangleKind::Lower => [o, [o[0] + dx, o[1]], [o[0] + dx, o[1] + dx]],
            TriangleKind::Upper => [o, [o[0] + dx, o[1] + dx], [o[0], o[1] + dx]],
        }
    }

    /// Signed area of a triangle (positive for counter-clockwise corners).
    pub fn signed_area(&self, t: &Triangle) -> f64 {
        let [a, b, c] = self.corners(t);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    }

    /// Locates the triangle containing `x` (wrapped into the torus) and
    /// returns its index together with the reference coordinates `(xi, eta)`.
    pub fn locate(&self, x: [f64; 2]) -> (usize, [f64; 2]) {
        let dx = self.spacing();
        let n = self.n as f64;
        let gx = wrap_unit((x[0] + PI) / dx, n);
        let gy = wrap_unit((x[1] + PI) / dx, n);
        let i = (gx.floor() as usize).min(self.n - 1);
        let j = (gy.floor() as usize).min(self.n - 1);
        let s = gx - i as f64;
        let t = gy - j as f64;
        let cell = 2 * (i + self.n * j);
        if s >= t {
            (cell, [s - t, t])
        } else {
            (cell + 1, [s, t - s])
        }
    }

    /// Writes a plain-text node/element listing for debugging.
    pub fn write_dump(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        let mut body = || -> std::io::Result<()> {
            writeln!(w, "# torus mesh n={} h={}", self.n, self.h())?;
            writeln!(w, "nodes {}", self.vertices.len())?;
            for (k, p) in self.vertices.iter().enumerate() {
                writeln!(w, "{k} {} {}", p[0], p[1])?;
            }
            writeln!(w, "elements {}", self.triangles.len())?;
            for (k, t) in self.triangles.iter().enumerate() {
                writeln!(
                    w,
                    "{k} {} {} {}",
                    t.vertices[0], t.vertices[1], t.vertices[2]
                )?;
            }
            w.flush()
        };
        body().map_err(|e| Error::io(path, e))
    }
}

fn wrap_unit(g: f64, n: f64) -> f64 {
    let r = g.rem_euclid(n);
    if r >= n {
        0.0
    } else {
        r
    }
}

/// Summary geometry of a mesh.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshStatistics {
    pub h: f64,
    pub total_area: f64,
    /// Longest edge divided by the smallest inscribed-circle diameter.
    pub quasi_uniformity: f64,
}

pub fn mesh_statistics(mesh: &TorusMesh) -> MeshStatistics {
    let dx = mesh.spacing();
    let mut total_area = 0.0;
    let mut min_inscribed = f64::INFINITY;
    let mut max_edge: f64 = 0.0;
    for t in mesh.triangles() {
        let area = mesh.signed_area(t);
        total_area += area;
        let c = mesh.corners(t);
        let len = |a: [f64; 2], b: [f64; 2]| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
        let edges = [len(c[0], c[1]), len(c[1], c[2]), len(c[2], c[0])];
        let perimeter: f64 = edges.iter().sum();
        // inradius = area / semiperimeter
        min_inscribed = min_inscribed.min(4.0 * area / perimeter);
        max_edge = edges.iter().fold(max_edge, |m, &e| m.max(e));
    }
    debug_assert!(max_edge > 0.0 && dx > 0.0);
    MeshStatistics {
        h: mesh.h(),
        total_area,
        quasi_uniformity: max_edge / min_inscribed,
    }
}
