//! Matrix-free Krylov solvers over flat `f64` vectors.
//!
//! Inner products here are plain Euclidean sums; callers that need the
//! quadrature-weighted pairing scale consistently on both sides.

use crate::error::{Error, Result};
use crate::exec::{axpy, dot};

#[derive(Clone, Debug)]
pub struct KrylovOutcome {
    pub solution: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// Conjugate gradients for a symmetric positive definite operator.
/// Stops once `‖b - Ax‖ ≤ rel_tol · ‖b‖`.
pub fn conjugate_gradient<A>(
    apply: A,
    b: &[f64],
    x0: Option<&[f64]>,
    rel_tol: f64,
    max_iter: usize,
) -> Result<KrylovOutcome>
where
    A: Fn(&[f64]) -> Vec<f64>,
{
    let n = b.len();
    let bnorm = dot(b, b).sqrt();
    let mut x = x0.map_or_else(|| vec![0.0; n], |v| v.to_vec());
    if bnorm == 0.0 {
        return Ok(KrylovOutcome {
            solution: vec![0.0; n],
            iterations: 0,
            residual: 0.0,
        });
    }
    let mut r = b.to_vec();
    if x0.is_some() {
        let ax = apply(&x);
        axpy(-1.0, &ax, &mut r);
    }
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let target = rel_tol * bnorm;
    let mut history = Vec::new();
    for it in 0..max_iter {
        let res = rr.sqrt();
        if res <= target {
            return Ok(KrylovOutcome {
                solution: x,
                iterations: it,
                residual: res / bnorm,
            });
        }
        history.push(res / bnorm);
        let ap = apply(&p);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            break;
        }
        let alpha = rr / pap;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        for (pi, ri) in p.iter_mut().zip(&r) {
            *pi = ri + beta * *pi;
        }
    }
    let res = rr.sqrt() / bnorm;
    if res <= rel_tol {
        return Ok(KrylovOutcome {
            solution: x,
            iterations: max_iter,
            residual: res,
        });
    }
    Err(Error::NonConvergence {
        solver: "conjugate gradient",
        iterations: max_iter,
        residual: res,
        history,
    })
}

/// Right-preconditioned BiCGSTAB for general nonsymmetric operators.
pub fn bicgstab<A, P>(
    apply: A,
    precond: P,
    b: &[f64],
    rel_tol: f64,
    max_iter: usize,
) -> Result<KrylovOutcome>
where
    A: Fn(&[f64]) -> Vec<f64>,
    P: Fn(&[f64]) -> Vec<f64>,
{
    let n = b.len();
    let bnorm = dot(b, b).sqrt();
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok(KrylovOutcome {
            solution: x,
            iterations: 0,
            residual: 0.0,
        });
    }
    let mut r = b.to_vec();
    let r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut history = Vec::new();
    for it in 0..max_iter {
        let res = dot(&r, &r).sqrt() / bnorm;
        history.push(res);
        if res <= rel_tol {
            return Ok(KrylovOutcome {
                solution: x,
                iterations: it,
                residual: res,
            });
        }
        let rho_new = dot(&r_hat, &r);
        if rho_new == 0.0 {
            break;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        let p_hat = precond(&p);
        v = apply(&p_hat);
        let denom = dot(&r_hat, &v);
        if denom == 0.0 {
            break;
        }
        alpha = rho / denom;
        let mut s = r.clone();
        axpy(-alpha, &v, &mut s);
        if dot(&s, &s).sqrt() / bnorm <= rel_tol {
            axpy(alpha, &p_hat, &mut x);
            return Ok(KrylovOutcome {
                solution: x,
                iterations: it + 1,
                residual: dot(&s, &s).sqrt() / bnorm,
            });
        }
        let s_hat = precond(&s);
        let t = apply(&s_hat);
        let tt = dot(&t, &t);
        if tt == 0.0 {
            break;
        }
        omega = dot(&t, &s) / tt;
        axpy(alpha, &p_hat, &mut x);
        axpy(omega, &s_hat, &mut x);
        r = s;
        axpy(-omega, &t, &mut r);
        if omega == 0.0 {
            break;
        }
    }
    let res = dot(&r, &r).sqrt() / bnorm;
    Err(Error::NonConvergence {
        solver: "BiCGSTAB",
        iterations: max_iter,
        residual: res,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiag(x: &[f64], diag: f64, lower: f64, upper: f64) -> Vec<f64> {
        let n = x.len();
        (0..n)
            .map(|i| {
                let mut s = diag * x[i];
                if i > 0 {
                    s += lower * x[i - 1];
                }
                if i + 1 < n {
                    s += upper * x[i + 1];
                }
                s
            })
            .collect()
    }

    #[test]
    fn cg_solves_spd_tridiagonal() {
        let n = 50;
        let x_true: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin()).collect();
        let b = tridiag(&x_true, 2.5, -1.0, -1.0);
        let out = conjugate_gradient(|x| tridiag(x, 2.5, -1.0, -1.0), &b, None, 1e-13, 200).unwrap();
        for (a, e) in out.solution.iter().zip(&x_true) {
            assert!((a - e).abs() < 1e-11);
        }
    }

    #[test]
    fn cg_reports_non_convergence() {
        let b = vec![1.0; 40];
        let err = conjugate_gradient(|x| tridiag(x, 2.0, -1.0, -1.0), &b, None, 1e-14, 2);
        assert!(matches!(err, Err(Error::NonConvergence { .. })));
    }

    #[test]
    fn bicgstab_solves_nonsymmetric_system() {
        let n = 60;
        let x_true: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64).cos()).collect();
        let b = tridiag(&x_true, 3.0, -1.4, -0.6);
        let out = bicgstab(|x| tridiag(x, 3.0, -1.4, -0.6), |x| x.to_vec(), &b, 1e-13, 500).unwrap();
        for (a, e) in out.solution.iter().zip(&x_true) {
            assert!((a - e).abs() < 1e-10);
        }
    }
}
