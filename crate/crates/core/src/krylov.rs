//! Restarted, right-preconditioned GMRES.

use crate::error::{LabError, Result};

pub struct GmresOptions {
    pub restart: usize,
    pub max_iter: usize,
    /// Stop once `||b - A x|| <= rel_tol * ||b||`.
    pub rel_tol: f64,
}

impl Default for GmresOptions {
    fn default() -> Self {
        Self {
            restart: 60,
            max_iter: 600,
            rel_tol: 1e-12,
        }
    }
}

pub struct GmresOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Solves `A x = b` with `A` applied through `apply` and the right
/// preconditioner `M^{-1}` through `precond`, starting from zero.
pub fn gmres<A, P>(apply: A, precond: P, b: &[f64], opts: &GmresOptions) -> Result<GmresOutcome>
where
    A: Fn(&[f64]) -> Vec<f64>,
    P: Fn(&[f64]) -> Vec<f64>,
{
    let dim = b.len();
    let bnorm = norm(b);
    let mut x = vec![0.0; dim];
    if bnorm == 0.0 {
        return Ok(GmresOutcome {
            x,
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let target = opts.rel_tol * bnorm;
    let mut iterations = 0;
    let mut r = b.to_vec();
    let mut beta = bnorm;
    while iterations < opts.max_iter {
        let m = opts.restart.min(opts.max_iter - iterations);
        let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut hess = vec![vec![0.0; m]; m + 1];
        let (mut cs, mut sn) = (vec![0.0; m], vec![0.0; m]);
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k_used = 0;
        for k in 0..m {
            let mut w = apply(&precond(&basis[k]));
            // modified Gram-Schmidt, applied twice for orthogonality
            for _ in 0..2 {
                for (j, v) in basis.iter().enumerate() {
                    let h = dot(&w, v);
                    hess[j][k] += h;
                    w.iter_mut().zip(v).for_each(|(wi, vi)| *wi -= h * vi);
                }
            }
            let wn = norm(&w);
            hess[k + 1][k] = wn;
            for j in 0..k {
                let t = cs[j] * hess[j][k] + sn[j] * hess[j + 1][k];
                hess[j + 1][k] = -sn[j] * hess[j][k] + cs[j] * hess[j + 1][k];
                hess[j][k] = t;
            }
            let den = hess[k][k].hypot(hess[k + 1][k]);
            cs[k] = hess[k][k] / den;
            sn[k] = hess[k + 1][k] / den;
            hess[k][k] = den;
            hess[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            iterations += 1;
            k_used = k + 1;
            if g[k + 1].abs() <= target || wn == 0.0 {
                break;
            }
            basis.push(w.iter().map(|v| v / wn).collect());
        }
        // back substitution for the Krylov coefficients
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let s: f64 = (i + 1..k_used).map(|j| hess[i][j] * y[j]).sum();
            y[i] = (g[i] - s) / hess[i][i];
        }
        let mut z = vec![0.0; dim];
        for (yi, v) in y.iter().zip(&basis) {
            z.iter_mut().zip(v).for_each(|(zi, vi)| *zi += yi * vi);
        }
        let dx = precond(&z);
        x.iter_mut().zip(&dx).for_each(|(xi, di)| *xi += di);
        let ax = apply(&x);
        r = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        beta = norm(&r);
        if beta <= target {
            return Ok(GmresOutcome {
                x,
                iterations,
                relative_residual: beta / bnorm,
            });
        }
    }
    Err(LabError::MaxIterations {
        iterations,
        residual: beta / bnorm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_nonsymmetric_system() {
        // tridiagonal convection-diffusion matrix
        let n = 50;
        let apply = |v: &[f64]| {
            (0..n)
                .map(|i| {
                    let left = if i > 0 { v[i - 1] } else { 0.0 };
                    let right = if i + 1 < n { v[i + 1] } else { 0.0 };
                    3.0 * v[i] - 1.3 * left - 0.7 * right
                })
                .collect::<Vec<_>>()
        };
        let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin()).collect();
        let out = gmres(
            apply,
            |v: &[f64]| v.to_vec(),
            &b,
            &GmresOptions {
                restart: 10,
                ..Default::default()
            },
        )
        .unwrap();
        let ax = apply(&out.x);
        let err = ax
            .iter()
            .zip(&b)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-10, "{err}");
    }
}
