use std::f64::consts::PI;

use serde::Serialize;

use crate::accretive::TruncatedOperator;
use crate::error::{Error, Result};
use crate::grid::{inner, inner_vec, GridFunction, VectorField};
use crate::models::ProblemData;

/// `φ(x, t) = amplitude · ∏ sin(k_i π x_i / L_i) · (1 - t/T)^p`.
#[derive(Clone, Debug, Serialize)]
pub struct TestFunction {
    pub wavenumbers: Vec<usize>,
    pub time_power: u32,
    pub amplitude: f64,
}

impl TestFunction {
    fn spatial(&self, lengths: &[f64], x: &[f64]) -> f64 {
        self.amplitude
            * x.iter()
                .zip(lengths)
                .zip(&self.wavenumbers)
                .map(|((xi, li), k)| (*k as f64 * PI * xi / li).sin())
                .product::<f64>()
    }

    fn spatial_gradient(&self, lengths: &[f64], axis: usize, x: &[f64]) -> f64 {
        self.amplitude
            * x.iter()
                .zip(lengths)
                .zip(&self.wavenumbers)
                .enumerate()
                .map(|(a, ((xi, li), k))| {
                    let w = *k as f64 * PI / li;
                    if a == axis {
                        w * (w * xi).cos()
                    } else {
                        (w * xi).sin()
                    }
                })
                .product::<f64>()
    }

    fn chi(&self, t: f64, horizon: f64) -> f64 {
        (1.0 - t / horizon).powi(self.time_power as i32)
    }

    fn chi_dot(&self, t: f64, horizon: f64) -> f64 {
        let p = self.time_power as i32;
        -(p as f64) / horizon * (1.0 - t / horizon).powi(p - 1)
    }
}

pub fn default_test_functions(dim: usize) -> Vec<TestFunction> {
    let mut out = Vec::new();
    for k in [1usize, 2] {
        for p in [1u32, 2] {
            let mut wavenumbers = vec![1; dim];
            wavenumbers[0] = k;
            out.push(TestFunction {
                wavenumbers,
                time_power: p,
                amplitude: 1.0,
            });
        }
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct WeakResidualReport {
    pub residuals: Vec<f64>,
    pub max_abs: f64,
}

/// Weak-form defect
/// `Σ_j τ[-⟨u_j, ψ⟩χ'(t_j) + χ(t_j)⟨A(∇u_j) + B(u_j) - F(t_j), ∇ψ⟩] - ⟨u₀, ψ⟩χ(0)`
/// of a trajectory `u_0, …, u_n` with step `dt`.
pub fn weak_residual(
    trajectory: &[GridFunction],
    data: &ProblemData,
    dt: f64,
    tests: &[TestFunction],
) -> Result<WeakResidualReport> {
    if trajectory.len() < 2 || !(dt > 0.0) {
        return Err(Error::InvalidArgument("need at least one step and dt > 0".into()));
    }
    let d = &data.domain;
    if tests.iter().any(|t| t.wavenumbers.len() != d.dim() || t.time_power == 0) {
        return Err(Error::InvalidArgument("test function must match the dimension and vanish at T".into()));
    }
    let horizon = dt * (trajectory.len() - 1) as f64;
    let lengths = d.lengths();
    let dim = d.dim();
    let autonomous = data.is_autonomous();
    let cached = if autonomous { Some(TruncatedOperator::new(data, None, 0.0)?) } else { None };
    let cached_source = if autonomous { Some(data.source_field(0.0)) } else { None };
    let mut residuals = Vec::with_capacity(tests.len());
    for test in tests {
        let psi = GridFunction::from_fn(d, |x| test.spatial(lengths, x));
        let grad_psi = VectorField::from_components(
            d,
            (0..dim)
                .map(|a| {
                    data.geometry.positions[a]
                        .iter()
                        .map(|x| test.spatial_gradient(lengths, a, &x[..dim]))
                        .collect()
                })
                .collect(),
        )?;
        let mut r = -inner(&trajectory[0], &psi)? * test.chi(0.0, horizon);
        for (j, u) in trajectory.iter().enumerate().skip(1) {
            let t = j as f64 * dt;
            let owned;
            let op = match &cached {
                Some(op) => op,
                None => {
                    owned = TruncatedOperator::new(data, None, t)?;
                    &owned
                }
            };
            let f = match &cached_source {
                Some(f) => f.clone(),
                None => data.source_field(t),
            };
            let q = op.flux(u).add_scaled(-1.0, &f);
            r += dt * (-inner(u, &psi)? * test.chi_dot(t, horizon) + test.chi(t, horizon) * inner_vec(&q, &grad_psi)?);
        }
        residuals.push(r);
    }
    let max_abs = residuals.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    Ok(WeakResidualReport { residuals, max_abs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::{evolve, EvolutionConfig};
    use crate::grid::BoxDomain;
    use crate::models::{build_model, ModelOptions};

    fn manufactured(n: usize) -> ProblemData {
        build_model("manufactured", &BoxDomain::unit(2, n).unwrap(), 0.5, &ModelOptions::default()).unwrap()
    }

    fn exact_trace(m: &ProblemData, dt: f64, steps: usize) -> Vec<GridFunction> {
        let e = m.exact.clone().unwrap();
        (0..=steps)
            .map(|j| GridFunction::from_fn(&m.domain, |x| e.value(x, j as f64 * dt)))
            .collect()
    }

    #[test]
    fn zero_test_function_gives_zero() {
        let m = manufactured(8);
        let tr = exact_trace(&m, 0.1, 5);
        let zero = TestFunction {
            wavenumbers: vec![1, 1],
            time_power: 1,
            amplitude: 0.0,
        };
        assert_eq!(weak_residual(&tr, &m, 0.1, &[zero]).unwrap().max_abs, 0.0);
    }

    #[test]
    fn exact_trace_residual_is_quadrature_error() {
        let tests = default_test_functions(2);
        let coarse = {
            let m = manufactured(16);
            weak_residual(&exact_trace(&m, 0.05, 10), &m, 0.05, &tests).unwrap().max_abs
        };
        let fine = {
            let m = manufactured(32);
            weak_residual(&exact_trace(&m, 0.025, 20), &m, 0.025, &tests).unwrap().max_abs
        };
        assert!(coarse < 0.05, "{coarse}");
        assert!((coarse / fine).log2() > 0.9, "{coarse} {fine}");
    }

    #[test]
    fn computed_trace_residual_is_first_order() {
        let tests = default_test_functions(2);
        let run = |n: usize, dt: f64| {
            let m = manufactured(n);
            let mut cfg = EvolutionConfig::new(dt, 0.5);
            cfg.keep_trajectory = true;
            let ev = evolve(&m, &cfg).unwrap();
            weak_residual(&ev.trajectory, &m, dt, &tests).unwrap().max_abs
        };
        let (a, b) = (run(16, 0.05), run(32, 0.025));
        assert!((a / b).log2() > 0.9, "{a} {b}");
    }
}
