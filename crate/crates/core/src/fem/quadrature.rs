//! Quadrature rules on the reference triangle `{xi, eta >= 0, xi + eta <= 1}`.
//!
//! Weights are normalized to sum to one, so an integral over a physical
//! triangle is `area * sum(w_q f(x_q))`.

#[derive(Debug, Clone)]
pub struct TriangleRule {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

impl TriangleRule {
    /// Symmetric 7-point rule, exact for polynomials of degree 5.
    pub fn degree5() -> Self {
        let s15 = 15f64.sqrt();
        let a = (6.0 - s15) / 21.0;
        let b = (6.0 + s15) / 21.0;
        let wa = (155.0 - s15) / 1200.0;
        let wb = (155.0 + s15) / 1200.0;
        Self {
            points: vec![
                [1.0 / 3.0, 1.0 / 3.0],
                [a, a],
                [1.0 - 2.0 * a, a],
                [a, 1.0 - 2.0 * a],
                [b, b],
                [1.0 - 2.0 * b, b],
                [b, 1.0 - 2.0 * b],
            ],
            weights: vec![9.0 / 40.0, wa, wa, wa, wb, wb, wb],
        }
    }

    /// Collapsed Gauss-Legendre product rule with `q` points per direction,
    /// exact for polynomials of degree `2q - 2`. Used for error norms of
    /// non-polynomial fields.
    pub fn collapsed_gauss(q: usize) -> Self {
        let (x, w) = gauss_legendre(q);
        let mut points = Vec::with_capacity(q * q);
        let mut weights = Vec::with_capacity(q * q);
        for i in 0..q {
            // map [-1,1] -> [0,1]
            let u = 0.5 * (x[i] + 1.0);
            for j in 0..q {
                let v = 0.5 * (x[j] + 1.0);
                // Duffy: xi = u, eta = v (1 - u), Jacobian (1 - u)
                points.push([u, v * (1.0 - u)]);
                // 0.25 for the interval maps, times 2 to normalize the area 1/2
                weights.push(0.5 * w[i] * w[j] * (1.0 - u));
            }
        }
        Self { points, weights }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]` by Newton iteration.
pub fn gauss_legendre(q: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; q];
    let mut w = vec![0.0; q];
    for i in 0..q {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (q as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(q, z);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(q, z);
        x[i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

fn legendre(q: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if q == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=q {
        let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let dp = q as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, dp)
}

#[cfg(test)]
mod tests {
    use super::*;

    // exact: int_T xi^a eta^b = a! b! / (a+b+2)!, normalized by the area 1/2
    fn monomial_exact(a: u32, b: u32) -> f64 {
        let f = |k: u32| (1..=k).map(|v| v as f64).product::<f64>();
        2.0 * f(a) * f(b) / f(a + b + 2)
    }

    fn check(rule: &TriangleRule, degree: u32) {
        for a in 0..=degree {
            for b in 0..=(degree - a) {
                let q: f64 = rule
                    .points
                    .iter()
                    .zip(&rule.weights)
                    .map(|(p, w)| w * p[0].powi(a as i32) * p[1].powi(b as i32))
                    .sum();
                let exact = monomial_exact(a, b);
                assert!(
                    (q - exact).abs() < 1e-14,
                    "monomial ({a},{b}): {q} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn seven_point_rule_is_degree_five() {
        let r = TriangleRule::degree5();
        assert!((r.weights.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        check(&r, 5);
    }

    #[test]
    fn collapsed_rule_exactness() {
        check(&TriangleRule::collapsed_gauss(6), 10);
    }
}
