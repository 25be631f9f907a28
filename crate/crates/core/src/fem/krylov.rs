//! Restarted right-preconditioned GMRES.

use super::sparse::{dot, norm2};

#[derive(Debug, Clone, Copy)]
pub struct GmresOptions {
    pub restart: usize,
    pub max_iterations: usize,
    /// Stop when `||b - A x|| <= rel_tol * ||b||`.
    pub rel_tol: f64,
}

impl Default for GmresOptions {
    fn default() -> Self {
        Self {
            restart: 60,
            max_iterations: 600,
            rel_tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GmresOutcome {
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
}

/// Solves `A x = b` with right preconditioning `A M^{-1} y = b, x = M^{-1} y`.
/// `x` holds the initial guess on entry.
pub fn gmres<A, P>(apply: A, precond: P, b: &[f64], x: &mut [f64], opts: GmresOptions) -> GmresOutcome
where
    A: Fn(&[f64], &mut [f64]),
    P: Fn(&[f64], &mut [f64]),
{
    let n = b.len();
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return GmresOutcome {
            iterations: 0,
            relative_residual: 0.0,
            converged: true,
        };
    }
    let m = opts.restart.max(1);
    let mut r = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut total = 0;
    let residual = |x: &[f64], r: &mut [f64], tmp: &mut [f64]| {
        apply(x, tmp);
        for i in 0..n {
            r[i] = b[i] - tmp[i];
        }
        norm2(r)
    };
    let mut beta = residual(x, &mut r, &mut w);
    loop {
        if beta <= opts.rel_tol * bnorm || total >= opts.max_iterations {
            return GmresOutcome {
                iterations: total,
                relative_residual: beta / bnorm,
                converged: beta <= opts.rel_tol * bnorm,
            };
        }
        let mut v: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
        v.push(r.iter().map(|ri| ri / beta).collect());
        let mut hess = vec![vec![0.0; m]; m + 1];
        let mut cs = vec![0.0; m];
        let mut sn = vec![0.0; m];
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k = 0;
        while k < m && total < opts.max_iterations {
            precond(&v[k], &mut z);
            apply(&z, &mut w);
            // modified Gram-Schmidt
            for (i, vi) in v.iter().enumerate() {
                let hik = dot(&w, vi);
                hess[i][k] = hik;
                for (wj, vj) in w.iter_mut().zip(vi) {
                    *wj -= hik * vj;
                }
            }
            let hn = norm2(&w);
            hess[k + 1][k] = hn;
            for i in 0..k {
                let t = cs[i] * hess[i][k] + sn[i] * hess[i + 1][k];
                hess[i + 1][k] = -sn[i] * hess[i][k] + cs[i] * hess[i + 1][k];
                hess[i][k] = t;
            }
            let denom = hess[k][k].hypot(hess[k + 1][k]);
            if denom == 0.0 {
                cs[k] = 1.0;
                sn[k] = 0.0;
            } else {
                cs[k] = hess[k][k] / denom;
                sn[k] = hess[k + 1][k] / denom;
            }
            hess[k][k] = denom;
            hess[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            total += 1;
            k += 1;
            if g[k].abs() <= opts.rel_tol * bnorm || hn == 0.0 {
                break;
            }
            v.push(w.iter().map(|wi| wi / hn).collect());
        }
        // back substitution for the k Arnoldi coefficients
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for j in i + 1..k {
                s -= hess[i][j] * y[j];
            }
            y[i] = s / hess[i][i];
        }
        let mut update = vec![0.0; n];
        for (yi, vi) in y.iter().zip(&v) {
            for (u, vv) in update.iter_mut().zip(vi) {
                *u += yi * vv;
            }
        }
        precond(&update, &mut z);
        for (xi, zi) in x.iter_mut().zip(&z) {
            *xi += zi;
        }
        beta = residual(x, &mut r, &mut w);
    }
}

/// Jacobi-preconditioned conjugate gradients for symmetric positive definite
/// systems. `x` holds the initial guess on entry.
pub fn conjugate_gradient<A>(apply: A, inv_diag: &[f64], b: &[f64], x: &mut [f64], rel_tol: f64, max_iterations: usize) -> GmresOutcome
where
    A: Fn(&[f64], &mut [f64]),
{
    let n = b.len();
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return GmresOutcome {
            iterations: 0,
            relative_residual: 0.0,
            converged: true,
        };
    }
    let mut r = vec![0.0; n];
    apply(x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let mut z: Vec<f64> = r.iter().zip(inv_diag).map(|(a, d)| a * d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut it = 0;
    let mut res = norm2(&r);
    while res > rel_tol * bnorm && it < max_iterations {
        apply(&p, &mut ap);
        let alpha = rz / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        res = norm2(&r);
        it += 1;
    }
    GmresOutcome {
        iterations: it,
        relative_residual: res / bnorm,
        converged: res <= rel_tol * bnorm,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_nonsymmetric_tridiagonal() {
        let n = 50;
        let apply = |x: &[f64], y: &mut [f64]| {
            for i in 0..n {
                let mut s = 4.0 * x[i];
                if i > 0 {
                    s -= 1.5 * x[i - 1];
                }
                if i + 1 < n {
                    s -= 0.5 * x[i + 1];
                }
                y[i] = s;
            }
        };
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let mut x = vec![0.0; n];
        let out = gmres(apply, |r, z| z.copy_from_slice(r), &b, &mut x, GmresOptions {
            restart: 10,
            ..Default::default()
        });
        assert!(out.converged, "{out:?}");
        let mut ax = vec![0.0; n];
        apply(&x, &mut ax);
        let err: f64 = ax.iter().zip(&b).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-11);
    }

    #[test]
    fn cg_solves_spd_system() {
        let n = 40;
        let apply = |x: &[f64], y: &mut [f64]| {
            for i in 0..n {
                let l = if i > 0 { x[i - 1] } else { 0.0 };
                let r = if i + 1 < n { x[i + 1] } else { 0.0 };
                y[i] = 3.0 * x[i] - l - r;
            }
        };
        let b = vec![1.0; n];
        let mut x = vec![0.0; n];
        let out = conjugate_gradient(apply, &vec![1.0 / 3.0; n], &b, &mut x, 1e-14, 200);
        assert!(out.converged);
        let mut ax = vec![0.0; n];
        apply(&x, &mut ax);
        assert!(ax.iter().all(|v| (v - 1.0).abs() < 1e-12));
    }
}
