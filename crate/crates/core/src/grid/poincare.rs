use serde::Serialize;

use super::{inner, neg_laplacian, BoxDomain, GridFunction};
use crate::error::{Error, Result};
use crate::linalg::conjugate_gradient;

const MAX_OUTER: usize = 200;

#[derive(Clone, Debug, Serialize)]
pub struct EigenEstimate {
    /// `λ₁^h`
    pub eigenvalue: f64,
    /// `C_P^h = 1/λ₁^h`
    pub poincare: f64,
    /// `diam(Ω)²/π²`, the classical upper bound on the continuum constant.
    pub diameter_bound: f64,
    pub iterations: usize,
}

/// Discrete Poincaré constant `1/λ₁^h` by inverse power iteration on the
/// Dirichlet Laplacian (inner solves by conjugate gradients). Converged once
/// successive Rayleigh quotients agree to relative tolerance `tol`.
pub fn poincare_constant(domain: &BoxDomain, tol: f64) -> Result<EigenEstimate> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("tol must be positive".into()));
    }
    // strictly positive start vector overlaps the positive ground state
    let mut x = GridFunction::from_fn(domain, |p| {
        p.iter()
            .zip(domain.lengths())
            .map(|(xi, li)| 1.0 + 0.25 * (xi / li))
            .product()
    });
    let mut lambda = f64::NAN;
    let cg_tol = (tol * 1e-2).max(1e-14);
    let max_cg = 20 * domain.node_count().max(100);
    for it in 1..=MAX_OUTER {
        let norm = x.norm();
        x = x.scaled(1.0 / norm);
        let out = conjugate_gradient(
            |v| {
                let g = GridFunction::from_values(domain, v.to_vec()).expect("shape");
                neg_laplacian(&g).into_values()
            },
            x.values(),
            None,
            cg_tol,
            max_cg,
        )?;
        let y = GridFunction::from_values(domain, out.solution)?;
        // Rayleigh quotient of the new iterate
        let ly = neg_laplacian(&y);
        let next = inner(&y, &ly)? / inner(&y, &y)?;
        let converged = (next - lambda).abs() <= tol * next.abs();
        lambda = next;
        x = y;
        if converged {
            return Ok(EigenEstimate {
                eigenvalue: lambda,
                poincare: 1.0 / lambda,
                diameter_bound: domain.diameter().powi(2) / std::f64::consts::PI.powi(2),
                iterations: it,
            });
        }
    }
    Err(Error::EigenNonConvergence {
        iterations: MAX_OUTER,
        estimate: lambda,
        last_iterate: x.into_values(),
    })
}

/// Closed form `Σ_i (4/h_i²) sin²(π h_i / 2 L_i)` for the smallest
/// eigenvalue of the discrete Dirichlet Laplacian.
pub fn dirichlet_eigenvalue_exact(domain: &BoxDomain) -> f64 {
    (0..domain.dim())
        .map(|a| {
            let h = domain.h(a);
            let s = (std::f64::consts::PI * h / (2.0 * domain.lengths()[a])).sin();
            4.0 * s * s / (h * h)
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::dirichlet_energy;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    #[test]
    fn unit_square_matches_two_pi_squared() {
        let d = BoxDomain::unit(2, 64).unwrap();
        let est = poincare_constant(&d, 1e-12).unwrap();
        let exact = dirichlet_eigenvalue_exact(&d);
        assert!((est.eigenvalue - exact).abs() < 1e-9 * exact);
        assert!((est.eigenvalue - 2.0 * PI * PI).abs() < 0.01);
        assert!((est.poincare - 0.05066).abs() < 1e-4);
    }

    #[test]
    fn unit_interval_matches_pi_squared() {
        let d = BoxDomain::unit(1, 128).unwrap();
        let est = poincare_constant(&d, 1e-12).unwrap();
        assert!((est.eigenvalue - PI * PI).abs() < 1e-3);
    }

    #[test]
    fn converges_at_second_order() {
        let err = |n| {
            let d = BoxDomain::unit(2, n).unwrap();
            (poincare_constant(&d, 1e-13).unwrap().eigenvalue - 2.0 * PI * PI).abs()
        };
        let order = (err(16) / err(32)).log2();
        assert!((order - 2.0).abs() < 0.05, "order {order}");
    }

    #[test]
    fn discrete_poincare_inequality_holds() {
        let d = BoxDomain::new(vec![1.0, 1.5], vec![12, 10]).unwrap();
        let cp = poincare_constant(&d, 1e-12).unwrap().poincare;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let v: Vec<f64> = (0..d.node_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let v = GridFunction::from_values(&d, v).unwrap();
            let lhs = inner(&v, &v).unwrap();
            assert!(lhs <= cp * dirichlet_energy(&v) * (1.0 + 1e-10));
        }
    }

    #[test]
    fn rejects_bad_tolerance() {
        let d = BoxDomain::unit(1, 8).unwrap();
        assert!(poincare_constant(&d, 0.0).is_err());
    }
}
