use serde::Serialize;

use super::{EvolutionConfig, Stepper};
use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::models::ProblemData;

#[derive(Clone, Debug, Serialize)]
pub struct UniquenessReport {
    pub initial_distance: f64,
    pub distances: Vec<f64>,
    pub times: Vec<f64>,
    /// Per-step growth bound `C` (constant for autonomous data; the largest
    /// value over the run otherwise).
    pub growth_constant: f64,
    /// `max_j ln(‖u_j - v_j‖/‖u₀ - v₀‖)/t_j`
    pub observed_exponent: f64,
    /// `‖u_j - v_j‖ ≤ e^{C t_j}‖u₀ - v₀‖(1 + 1e-8)` at every step.
    pub bound_holds: bool,
    /// Distances never increase (checked when the drift vanishes).
    pub monotone: bool,
}

/// Largest root `r` of
/// `r²(1 - τL_r²/(4α)) - r(1 + τL_rL_θ/(2α)) - τL_θ²/(4α) = 0`, which bounds
/// `‖w_j‖/‖w_{j-1}‖` for the difference of two runs.
pub fn step_growth_factor(tau: f64, alpha: f64, l_r: f64, l_theta: f64) -> Result<f64> {
    let a = 1.0 - tau * l_r * l_r / (4.0 * alpha);
    if !(a > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "time step {tau} too large for the drift coupling {l_r}"
        )));
    }
    let b = 1.0 + tau * l_r * l_theta / (2.0 * alpha);
    let c = tau * l_theta * l_theta / (4.0 * alpha);
    Ok((b + (b * b + 4.0 * a * c).sqrt()) / (2.0 * a))
}

pub fn uniqueness_harness(
    data: &ProblemData,
    cfg: &EvolutionConfig,
    u0: &GridFunction,
    v0: &GridFunction,
) -> Result<UniquenessReport> {
    let n = cfg.steps()?;
    let level = cfg.run_level(data)?;
    let stepper = Stepper::new(data, cfg, level)?;
    let tau = cfg.dt;
    let alpha = data.alpha();
    let initial_distance = u0.sub(v0).norm();
    let mut u = u0.clone();
    let mut v = v0.clone();
    let mut distances = Vec::with_capacity(n);
    let mut times = Vec::with_capacity(n);
    let mut log_bound = 0.0;
    let mut growth_constant = 0.0f64;
    let mut bound_holds = true;
    let mut monotone = true;
    let mut observed = f64::NEG_INFINITY;
    let mut prev = initial_distance;
    for j in 1..=n {
        let t = j as f64 * tau;
        let op = stepper.operator(t)?;
        let (l_r, l_theta) = op.coupling_constants();
        let c = step_growth_factor(tau, alpha, l_r, l_theta)?.ln() / tau;
        growth_constant = growth_constant.max(c);
        log_bound += c * tau;
        u = stepper.step(&u, t)?.state;
        v = stepper.step(&v, t)?.state;
        let dist = u.sub(&v).norm();
        if dist > log_bound.exp() * initial_distance * (1.0 + 1e-8) + 1e-14 {
            bound_holds = false;
        }
        if dist > prev * (1.0 + 1e-12) + 1e-14 {
            monotone = false;
        }
        if initial_distance > 0.0 && dist > 0.0 {
            observed = observed.max((dist / initial_distance).ln() / t);
        }
        prev = dist;
        distances.push(dist);
        times.push(t);
    }
    Ok(UniquenessReport {
        initial_distance,
        distances,
        times,
        growth_constant,
        observed_exponent: if observed.is_finite() { observed } else { 0.0 },
        bound_holds,
        monotone,
    })
}
