//! Stationary solutions and exponential decay toward them.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::accretive::{ResolventConfig, Resolvent, SolverDiagnostics, SolverMethod, TruncatedOperator};
use crate::error::{Error, Result};
use crate::evolution::{evolve, EvolutionConfig, EvolutionTrace};
use crate::grid::{divergence, inner, poincare_constant, GridFunction};
use crate::models::{certify_truncation, ProblemData, TruncationCertificate};

#[derive(Clone, Debug)]
pub struct SteadyConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub initial_guess: Option<GridFunction>,
    pub method: SolverMethod,
    /// Time slice of non-autonomous data; defaults to the horizon.
    pub time: Option<f64>,
}

impl Default for SteadyConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 2000,
            initial_guess: None,
            method: SolverMethod::DampedPicard,
            time: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SteadyState {
    pub solution: GridFunction,
    pub diagnostics: SolverDiagnostics,
}

/// Solves `-div[A(∇u) + B(u)] = -div F` with the stopping rule measured in
/// the discrete dual norm `sqrt⟨r, (-Δ_h)^{-1} r⟩`.
pub fn solve_steady(data: &ProblemData, cfg: &SteadyConfig) -> Result<SteadyState> {
    if !(cfg.tol > 0.0) {
        return Err(Error::InvalidArgument("tol must be positive".into()));
    }
    let t = cfg.time.unwrap_or(data.horizon);
    let op = TruncatedOperator::new(data, None, t)?;
    let rhs = divergence(&data.source_field(t)).scaled(-1.0);
    let rcfg = ResolventConfig {
        lambda: 1.0,
        tol: cfg.tol,
        max_iter: cfg.max_iter,
        method: cfg.method,
        relaxation: 1.0,
    };
    let out = Resolvent::new(&data.domain).steady(&op, &rhs, &rcfg, cfg.initial_guess.as_ref())?;
    Ok(SteadyState {
        solution: out.solution,
        diagnostics: out.diagnostics,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct DecayReport {
    /// `α / (4 C_P^h)`
    pub theoretical_omega: f64,
    /// Decay rate of `‖u(t) - u_∞‖` on the window; `None` when saturated.
    pub fitted_rate: Option<f64>,
    pub margin: Option<f64>,
    pub small_data_pass: bool,
    pub window: [f64; 2],
    pub y_series_path: Option<String>,
    /// `α / (2 C_P^h)`
    pub intro_omega: f64,
    /// `α / (4 C_P)` with `C_P = diam²/π²`.
    pub diameter_omega: f64,
    pub poincare: f64,
    pub saturated: bool,
    /// `fitted_rate ≥ 0.95 ω`
    pub rate_pass: bool,
    /// `y_j ≤ y_{j-1}` at every step (up to solver noise).
    pub lyapunov_pass: bool,
    pub max_lyapunov_excess: f64,
    /// `max_j y_j (1 + τ α/(2C_P)) / y_{j-1}`
    pub max_contraction_ratio: f64,
    pub certificate: Option<TruncationCertificate>,
    pub steady_iterations: usize,
    pub steady_residual: f64,
    #[serde(skip)]
    pub times: Vec<f64>,
    #[serde(skip)]
    pub y_series: Vec<f64>,
    #[serde(skip)]
    pub trace: EvolutionTrace,
}

impl DecayReport {
    pub fn write_y_series<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,y")?;
        for (t, y) in self.times.iter().zip(&self.y_series) {
            writeln!(w, "{t:.17e},{y:.17e}")?;
        }
        Ok(())
    }

    pub fn save_y_series(&mut self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_y_series(std::io::BufWriter::new(f))?;
        self.y_series_path = Some(path.display().to_string());
        Ok(())
    }
}

/// Small-data certificate: the first plan level (or none for a vanishing
/// drift) passing the long-time test, else the last level tried.
fn small_data_certificate(data: &ProblemData, evo: &EvolutionConfig) -> Result<Option<TruncationCertificate>> {
    let b = data.drift_coefficient(0.0);
    let samples = if data.is_autonomous() {
        vec![b.clone()]
    } else {
        let n = evo.steps()?;
        (0..=n).map(|j| data.drift_coefficient(j as f64 * evo.dt)).collect()
    };
    let levels = match evo.level {
        Some(m) => vec![m],
        None => evo.truncation.levels(&b)?,
    };
    let mut last = None;
    for m in levels {
        let c = certify_truncation(&samples, m, data.alpha(), data.domain.dim())?;
        if c.small_data_pass {
            return Ok(Some(c));
        }
        last = Some(c);
    }
    Ok(last)
}

pub fn decay_experiment(data: &ProblemData, evo: &EvolutionConfig, steady: &SteadyConfig) -> Result<DecayReport> {
    let n = evo.steps()?;
    let u_inf = solve_steady(data, steady)?;
    let mut cfg = evo.clone();
    cfg.keep_trajectory = true;
    let run = evolve(data, &cfg)?;
    let cp = poincare_constant(&data.domain, 1e-10)?;
    let alpha = data.alpha();
    let theoretical_omega = alpha / (4.0 * cp.poincare);
    let times: Vec<f64> = (0..=n).map(|j| j as f64 * cfg.dt).collect();
    let y: Vec<f64> = run
        .trajectory
        .iter()
        .map(|u| {
            let w = u.sub(&u_inf.solution);
            inner(&w, &w).expect("same grid")
        })
        .collect();
    let horizon = times[n];
    let window = [0.5 * horizon, horizon];
    let floor = 1e2 * f64::EPSILON;
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(&y)
        .filter(|(t, y)| **t >= window[0] - 1e-12 && **y > floor)
        .map(|(t, y)| (*t, 0.5 * y.ln()))
        .collect();
    let fitted_rate = if pts.len() >= 2 { Some(-slope(&pts)) } else { None };
    let saturated = fitted_rate.is_none();
    let c = alpha / (2.0 * cp.poincare);
    let mut max_excess = f64::NEG_INFINITY;
    let mut max_ratio = 0.0f64;
    for j in 1..y.len() {
        max_excess = max_excess.max(y[j] - y[j - 1] - 1e-10 * y[j - 1].sqrt() - 1e-14);
        if y[j - 1] > floor {
            max_ratio = max_ratio.max(y[j] * (1.0 + cfg.dt * c) / y[j - 1]);
        }
    }
    let certificate = small_data_certificate(data, evo)?;
    let small_data_pass = certificate.as_ref().is_none_or(|c| c.small_data_pass);
    Ok(DecayReport {
        theoretical_omega,
        fitted_rate,
        margin: fitted_rate.map(|r| r - theoretical_omega),
        small_data_pass,
        window,
        y_series_path: None,
        intro_omega: alpha / (2.0 * cp.poincare),
        diameter_omega: alpha / (4.0 * cp.diameter_bound),
        poincare: cp.poincare,
        saturated,
        rate_pass: fitted_rate.is_some_and(|r| r >= 0.95 * theoretical_omega),
        lyapunov_pass: max_excess <= 0.0,
        max_lyapunov_excess: max_excess.max(0.0),
        max_contraction_ratio: max_ratio,
        certificate,
        steady_iterations: u_inf.diagnostics.iterations,
        steady_residual: u_inf.diagnostics.residual,
        times,
        y_series: y,
        trace: run.trace,
    })
}

/// Least-squares slope of `(x, y)` pairs.
fn slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}
