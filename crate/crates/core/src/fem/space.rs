//! Finite-element spaces on the periodic mesh: continuous Lagrange velocity
//! (two components) and continuous Lagrange pressure.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::element::Lagrange;
use super::quadrature::TriangleRule;
use crate::error::{Error, Result};
use crate::mesh::{TorusMesh, TriangleKind};

/// Polynomial degrees `(i, j)` of the velocity and pressure spaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElementPair {
    pub velocity_degree: usize,
    pub pressure_degree: usize,
}

impl ElementPair {
    pub const TAYLOR_HOOD: Self = Self {
        velocity_degree: 2,
        pressure_degree: 1,
    };
    /// Equal-order pair, not inf-sup stable. Only meant as a negative control.
    pub const EQUAL_ORDER: Self = Self {
        velocity_degree: 1,
        pressure_degree: 1,
    };
}

impl Default for ElementPair {
    fn default() -> Self {
        Self::TAYLOR_HOOD
    }
}

/// Local-to-global numbering of a scalar continuous Lagrange space.
#[derive(Debug, Clone)]
pub struct ScalarDofMap {
    element: Lagrange,
    ndofs: usize,
    cells: Vec<[usize; 6]>,
}

impl ScalarDofMap {
    fn new(mesh: &TorusMesh, element: Lagrange) -> Self {
        let nv = mesh.num_vertices();
        let cells = mesh
            .triangles()
            .iter()
            .map(|t| {
                let mut c = [0; 6];
                c[..3].copy_from_slice(&t.vertices);
                if element.degree() == 2 {
                    for k in 0..3 {
                        c[3 + k] = nv + t.edges[k];
                    }
                }
                c
            })
            .collect();
        let ndofs = match element.degree() {
            1 => nv,
            _ => nv + mesh.num_edges(),
        };
        Self {
            element,
            ndofs,
            cells,
        }
    }

    pub fn element(&self) -> Lagrange {
        self.element
    }

    pub fn ndofs(&self) -> usize {
        self.ndofs
    }

    pub fn local_size(&self) -> usize {
        self.element.num_nodes()
    }

    /// Global indices of the local nodes of triangle `t`.
    pub fn cell(&self, t: usize) -> &[usize] {
        &self.cells[t][..self.element.num_nodes()]
    }
}

/// Affine geometry shared by all triangles of one kind.
#[derive(Debug, Clone, Copy)]
pub struct KindGeometry {
    /// Inverse-transpose Jacobian, row-major.
    pub jinv_t: [[f64; 2]; 2],
    pub area: f64,
}

impl KindGeometry {
    pub fn physical_gradient(&self, g: [f64; 2]) -> [f64; 2] {
        [
            self.jinv_t[0][0] * g[0] + self.jinv_t[0][1] * g[1],
            self.jinv_t[1][0] * g[0] + self.jinv_t[1][1] * g[1],
        ]
    }
}

/// Basis values and physical gradients of one scalar element at the points
/// of a quadrature rule, for both triangle kinds.
#[derive(Debug, Clone)]
pub struct Tabulation {
    pub values: Vec<[f64; 6]>,
    /// `grads[kind][q][a]`
    pub grads: [Vec<[[f64; 2]; 6]>; 2],
}

impl Tabulation {
    fn new(element: Lagrange, rule: &TriangleRule, geom: &[KindGeometry; 2]) -> Self {
        let mut values = Vec::with_capacity(rule.len());
        let mut grads: [Vec<[[f64; 2]; 6]>; 2] = [Vec::new(), Vec::new()];
        for &p in &rule.points {
            let mut v = [0.0; 6];
            element.values(p, &mut v);
            values.push(v);
            let mut g = [[0.0; 2]; 6];
            element.gradients(p, &mut g);
            for (kind, out) in grads.iter_mut().enumerate() {
                let mut pg = [[0.0; 2]; 6];
                for a in 0..element.num_nodes() {
                    pg[a] = geom[kind].physical_gradient(g[a]);
                }
                out.push(pg);
            }
        }
        Self { values, grads }
    }
}

pub(crate) fn kind_index(kind: TriangleKind) -> usize {
    match kind {
        TriangleKind::Lower => 0,
        TriangleKind::Upper => 1,
    }
}

/// The pair of spaces `V^h` (vector, degree `i`) and `P^h` (scalar, degree `j`).
#[derive(Debug)]
pub struct FeSpace {
    mesh: TorusMesh,
    pair: ElementPair,
    velocity: ScalarDofMap,
    pressure: ScalarDofMap,
    geometry: [KindGeometry; 2],
    rule: TriangleRule,
    velocity_tab: Tabulation,
    pressure_tab: Tabulation,
}

impl FeSpace {
    pub fn new(mesh: TorusMesh, pair: ElementPair) -> Result<Self> {
        if pair.velocity_degree == 0 || pair.pressure_degree == 0 {
            return Err(Error::InvalidArgument(
                "velocity and pressure degrees must both be at least 1".into(),
            ));
        }
        let ve = Lagrange::new(pair.velocity_degree)?;
        let pe = Lagrange::new(pair.pressure_degree)?;
        let mut geometry = [KindGeometry {
            jinv_t: [[0.0; 2]; 2],
            area: 0.0,
        }; 2];
        for t in mesh.triangles().iter().take(2) {
            let c = mesh.corners(t);
            let j = [
                [c[1][0] - c[0][0], c[2][0] - c[0][0]],
                [c[1][1] - c[0][1], c[2][1] - c[0][1]],
            ];
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            // inverse transpose of J
            geometry[kind_index(t.kind)] = KindGeometry {
                jinv_t: [[j[1][1] / det, -j[1][0] / det], [-j[0][1] / det, j[0][0] / det]],
                area: 0.5 * det,
            };
        }
        let rule = TriangleRule::degree5();
        let velocity_tab = Tabulation::new(ve, &rule, &geometry);
        let pressure_tab = Tabulation::new(pe, &rule, &geometry);
        Ok(Self {
            velocity: ScalarDofMap::new(&mesh, ve),
            pressure: ScalarDofMap::new(&mesh, pe),
            mesh,
            pair,
            geometry,
            rule,
            velocity_tab,
            pressure_tab,
        })
    }

    /// Taylor-Hood space on the uniform `n x n` mesh.
    pub fn taylor_hood(n: usize) -> Result<Arc<Self>> {
        Ok(Arc::new(Self::new(TorusMesh::uniform(n)?, ElementPair::TAYLOR_HOOD)?))
    }

    pub fn mesh(&self) -> &TorusMesh {
        &self.mesh
    }

    pub fn pair(&self) -> ElementPair {
        self.pair
    }

    pub fn h(&self) -> f64 {
        self.mesh.h()
    }

    pub fn velocity_map(&self) -> &ScalarDofMap {
        &self.velocity
    }

    pub fn pressure_map(&self) -> &ScalarDofMap {
        &self.pressure
    }

    /// Number of scalar velocity dofs per component.
    pub fn n_scalar_velocity(&self) -> usize {
        self.velocity.ndofs
    }

    /// Number of velocity dofs (both components).
    pub fn n_velocity(&self) -> usize {
        2 * self.velocity.ndofs
    }

    pub fn n_pressure(&self) -> usize {
        self.pressure.ndofs
    }

    pub fn geometry(&self, kind: TriangleKind) -> &KindGeometry {
        &self.geometry[kind_index(kind)]
    }

    /// Triangle areas indexed by `kind_index`.
    pub fn areas(&self) -> [f64; 2] {
        [self.geometry[0].area, self.geometry[1].area]
    }

    /// Tabulates the element of `map` at the points of another rule.
    pub fn tabulate(&self, map: &ScalarDofMap, rule: &TriangleRule) -> Tabulation {
        Tabulation::new(map.element, rule, &self.geometry)
    }

    pub fn rule(&self) -> &TriangleRule {
        &self.rule
    }

    pub fn velocity_tab(&self) -> &Tabulation {
        &self.velocity_tab
    }

    pub fn pressure_tab(&self) -> &Tabulation {
        &self.pressure_tab
    }

    /// Physical coordinates of a reference point in triangle `t`.
    pub fn map_point(&self, t: usize, p: [f64; 2]) -> [f64; 2] {
        let c = self.mesh.corners(&self.mesh.triangles()[t]);
        [
            c[0][0] + p[0] * (c[1][0] - c[0][0]) + p[1] * (c[2][0] - c[0][0]),
            c[0][1] + p[0] * (c[1][1] - c[0][1]) + p[1] * (c[2][1] - c[0][1]),
        ]
    }

    /// Coordinates of every scalar node of a dof map (one representative per
    /// periodic class).
    pub fn node_coordinates(&self, map: &ScalarDofMap) -> Vec<[f64; 2]> {
        let mut coords = vec![[0.0; 2]; map.ndofs];
        let nodes = map.element.nodes();
        for t in 0..self.mesh.num_triangles() {
            for (a, &g) in map.cell(t).iter().enumerate() {
                coords[g] = self.map_point(t, nodes[a]);
            }
        }
        coords
    }

    /// Nodal interpolant of a vector field.
    pub fn interpolate_velocity(&self, f: impl Fn([f64; 2]) -> [f64; 2]) -> Vec<f64> {
        let ns = self.velocity.ndofs;
        let mut out = vec![0.0; 2 * ns];
        for (k, x) in self.node_coordinates(&self.velocity).into_iter().enumerate() {
            let v = f(x);
            out[k] = v[0];
            out[ns + k] = v[1];
        }
        out
    }

    /// Nodal interpolant of a scalar field in the pressure space.
    pub fn interpolate_pressure(&self, f: impl Fn([f64; 2]) -> f64) -> Vec<f64> {
        self.node_coordinates(&self.pressure)
            .into_iter()
            .map(f)
            .collect()
    }

    /// Value and gradient of a scalar FE function of `map` at `x`.
    pub fn eval_scalar(&self, map: &ScalarDofMap, coeffs: &[f64], x: [f64; 2]) -> (f64, [f64; 2]) {
        let (t, p) = self.mesh.locate(x);
        let e = map.element;
        let mut v = [0.0; 6];
        let mut g = [[0.0; 2]; 6];
        e.values(p, &mut v);
        e.gradients(p, &mut g);
        let geom = &self.geometry[kind_index(self.mesh.triangles()[t].kind)];
        let mut val = 0.0;
        let mut grad = [0.0; 2];
        for (a, &gi) in map.cell(t).iter().enumerate() {
            let c = coeffs[gi];
            val += c * v[a];
            let pg = geom.physical_gradient(g[a]);
            grad[0] += c * pg[0];
            grad[1] += c * pg[1];
        }
        (val, grad)
    }

    /// Value and Jacobian `J[i][j] = d u_i / d x_j` of a velocity field at `x`.
    pub fn eval_velocity(&self, coeffs: &[f64], x: [f64; 2]) -> ([f64; 2], [[f64; 2]; 2]) {
        let ns = self.velocity.ndofs;
        let (u0, g0) = self.eval_scalar(&self.velocity, &coeffs[..ns], x);
        let (u1, g1) = self.eval_scalar(&self.velocity, &coeffs[ns..], x);
        ([u0, u1], [g0, g1])
    }

    /// Lifts a velocity field from a coarser nested space into this one by
    /// nodal interpolation (exact when the meshes are nested and degrees agree).
    pub fn lift_velocity(&self, coarse: &FeSpace, coeffs: &[f64]) -> Vec<f64> {
        self.interpolate_velocity(|x| coarse.eval_velocity(coeffs, x).0)
    }
}

/// Role of an FE coefficient vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    Velocity,
    Pressure,
}

/// Coefficient vector of a velocity or pressure finite-element function.
#[derive(Debug, Clone)]
pub struct FeField {
    pub space: Arc<FeSpace>,
    pub kind: FieldKind,
    pub coeffs: Vec<f64>,
}

impl FeField {
    pub fn zeros(space: Arc<FeSpace>, kind: FieldKind) -> Self {
        let len = match kind {
            FieldKind::Velocity => space.n_velocity(),
            FieldKind::Pressure => space.n_pressure(),
        };
        Self {
            space,
            kind,
            coeffs: vec![0.0; len],
        }
    }

    pub fn velocity(space: Arc<FeSpace>, coeffs: Vec<f64>) -> Self {
        assert_eq!(coeffs.len(), space.n_velocity());
        Self {
            space,
            kind: FieldKind::Velocity,
            coeffs,
        }
    }

    pub fn pressure(space: Arc<FeSpace>, coeffs: Vec<f64>) -> Self {
        assert_eq!(coeffs.len(), space.n_pressure());
        Self {
            space,
            kind: FieldKind::Pressure,
            coeffs,
        }
    }
}
