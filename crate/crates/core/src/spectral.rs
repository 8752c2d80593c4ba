//! Fast solver for `(σ I + κ(-Δ_h)) x = b` on a box with Dirichlet data.
//!
//! The discrete Dirichlet Laplacian is diagonalized by tensor-product sine
//! modes; each axis is transformed by a DST-I computed through an FFT of
//! length `2 n`.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::exec::Policy;
use crate::grid::{BoxDomain, GridFunction};

pub struct DirichletSpectral {
    domain: BoxDomain,
    plans: Vec<Arc<dyn Fft<f64>>>,
    /// Per-axis eigenvalues `(4/h²) sin²(π k / 2n)`, `k = 1..n-1`.
    eigen: Vec<Vec<f64>>,
}

impl std::fmt::Debug for DirichletSpectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DirichletSpectral")
            .field("domain", &self.domain)
            .finish()
    }
}

impl DirichletSpectral {
    pub fn new(domain: &BoxDomain) -> Self {
        let mut planner = FftPlanner::new();
        let mut plans = Vec::new();
        let mut eigen = Vec::new();
        for a in 0..domain.dim() {
            let n = domain.cells()[a];
            let h = domain.h(a);
            plans.push(planner.plan_fft_forward(2 * n));
            eigen.push(
                (1..n)
                    .map(|k| {
                        let s = (std::f64::consts::PI * k as f64 / (2 * n) as f64).sin();
                        4.0 * s * s / (h * h)
                    })
                    .collect(),
            );
        }
        Self {
            domain: domain.clone(),
            plans,
            eigen,
        }
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    /// Smallest eigenvalue of `-Δ_h`.
    pub fn smallest_eigenvalue(&self) -> f64 {
        self.eigen.iter().map(|e| e[0]).sum()
    }

    /// Solves `(σ I + κ(-Δ_h)) x = b`. Requires `σ + κ λ > 0` for every mode.
    pub fn solve(&self, sigma: f64, kappa: f64, b: &GridFunction) -> GridFunction {
        let mut coeffs = b.values().to_vec();
        for a in 0..self.domain.dim() {
            self.transform_axis(a, &mut coeffs);
        }
        let shape = self.domain.interior_shape();
        let dim = self.domain.dim();
        let mut norm = 1.0;
        for a in 0..dim {
            norm *= 2.0 / self.domain.cells()[a] as f64;
        }
        for (flat, c) in coeffs.iter_mut().enumerate() {
            let mut rest = flat;
            let mut lam = 0.0;
            for a in (0..dim).rev() {
                let k = rest % shape[a];
                rest /= shape[a];
                lam += self.eigen[a][k];
            }
            *c *= norm / (sigma + kappa * lam);
        }
        for a in 0..dim {
            self.transform_axis(a, &mut coeffs);
        }
        GridFunction::from_values(&self.domain, coeffs).expect("shape preserved")
    }

    /// Unnormalized DST-I along one axis, in place.
    fn transform_axis(&self, axis: usize, data: &mut [f64]) {
        let shape = self.domain.interior_shape();
        let m = shape[axis];
        let n = m + 1;
        let inner: usize = shape[axis + 1..].iter().product();
        let outer: usize = shape[..axis].iter().product();
        let plan = &self.plans[axis];
        let src: &[f64] = data;
        let lines = Policy::Parallel.map_range(outer * inner, |line| {
            let o = line / inner;
            let r = line % inner;
            let base = o * m * inner + r;
            let mut buf = vec![Complex::new(0.0, 0.0); 2 * n];
            for i in 0..m {
                let x = src[base + i * inner];
                buf[i + 1] = Complex::new(x, 0.0);
                buf[2 * n - 1 - i] = Complex::new(-x, 0.0);
            }
            plan.process(&mut buf);
            (1..n).map(|k| -0.5 * buf[k].im).collect::<Vec<f64>>()
        });
        for (line, vals) in lines.into_iter().enumerate() {
            let o = line / inner;
            let r = line % inner;
            let base = o * m * inner + r;
            for (i, v) in vals.into_iter().enumerate() {
                data[base + i * inner] = v;
            }
        }
    }
}
