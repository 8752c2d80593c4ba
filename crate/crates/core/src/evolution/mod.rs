//! Implicit Euler (Crandall–Liggett) time stepping with a truncated drift.

mod continuation;
mod uniqueness;
mod weak;

pub use continuation::{continuation, ContinuationLevel, ContinuationReport};
pub use uniqueness::{step_growth_factor, uniqueness_harness, UniquenessReport};
pub use weak::{default_test_functions, weak_residual, TestFunction, WeakResidualReport};

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::accretive::{ResolventConfig, Resolvent, TruncatedOperator};
use crate::error::{Error, Result};
use crate::grid::{dirichlet_energy, divergence, gradient, inner, inner_vec, GridFunction, VectorField};
use crate::models::{ProblemData, TruncationPlan};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Splitting {
    /// The whole drift inside the implicit operator.
    #[default]
    FullyImplicit,
    /// `(1 - θ_M) B` implicit, `θ_M B` lagged into the source.
    SemiImplicit,
}

impl std::str::FromStr for Splitting {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fully-implicit" => Ok(Self::FullyImplicit),
            "semi-implicit" => Ok(Self::SemiImplicit),
            _ => Err(Error::InvalidArgument(format!("unknown splitting '{s}'"))),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EvolutionConfig {
    pub dt: f64,
    pub horizon: f64,
    pub splitting: Splitting,
    pub truncation: TruncationPlan,
    /// Level used by a single semi-implicit run; defaults to the first
    /// level of the plan.
    pub level: Option<f64>,
    /// `lambda` is overwritten by `dt`.
    pub resolvent: ResolventConfig,
    /// Keep every iterate (needed for weak residuals).
    pub keep_trajectory: bool,
}

impl EvolutionConfig {
    pub fn new(dt: f64, horizon: f64) -> Self {
        Self {
            dt,
            horizon,
            splitting: Splitting::default(),
            truncation: TruncationPlan::default(),
            level: None,
            resolvent: ResolventConfig::default(),
            keep_trajectory: false,
        }
    }

    pub fn steps(&self) -> Result<usize> {
        if !(self.dt > 0.0 && self.dt < 1.0) {
            return Err(Error::InvalidArgument(format!("dt must lie in (0, 1) (got {})", self.dt)));
        }
        if !(self.horizon > 0.0) {
            return Err(Error::InvalidArgument("horizon must be positive".into()));
        }
        let n = (self.horizon / self.dt).round();
        if n < 1.0 || (n * self.dt - self.horizon).abs() > 1e-9 * self.horizon {
            return Err(Error::InvalidArgument(format!(
                "horizon {} is not a multiple of dt {}",
                self.horizon, self.dt
            )));
        }
        Ok(n as usize)
    }

    /// Truncation level of a single run under this configuration.
    pub fn run_level(&self, data: &ProblemData) -> Result<Option<f64>> {
        match (self.splitting, &data.drift) {
            (Splitting::FullyImplicit, _) | (_, None) => Ok(None),
            (Splitting::SemiImplicit, Some(_)) => match self.level {
                Some(m) => Ok(Some(m)),
                None => Ok(Some(self.truncation.levels(&data.drift_coefficient(0.0))?[0])),
            },
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct StepRecord {
    pub step: usize,
    pub t: f64,
    pub l2_norm: f64,
    pub h1_seminorm: f64,
    pub cumulative_dissipation: f64,
    /// `+∞` when the drift is not truncated.
    pub level: f64,
    pub resolvent_iters: usize,
    /// `lhs - rhs` of the discrete energy inequality (positive = excess).
    pub energy_violation: f64,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct EvolutionTrace {
    pub records: Vec<StepRecord>,
    /// Steps whose energy excess exceeded the tolerance.
    pub energy_flags: Vec<usize>,
    pub warnings: Vec<String>,
    /// `Σ τ ‖F(t_j)‖²`
    pub source_energy: f64,
}

/// Per-step slack of the energy inequality, relative to `1 + ‖u_{j-1}‖²`.
pub const ENERGY_TOL: f64 = 1e-10;

pub const TRACE_COLUMNS: &str =
    "step,t,l2_norm,h1_seminorm,cumulative_dissipation,M_level,resolvent_iters,energy_violation";

impl EvolutionTrace {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{TRACE_COLUMNS}")?;
        for r in &self.records {
            writeln!(
                w,
                "{},{:.17e},{:.17e},{:.17e},{:.17e},{},{},{:.17e}",
                r.step,
                r.t,
                r.l2_norm,
                r.h1_seminorm,
                r.cumulative_dissipation,
                if r.level.is_finite() { format!("{:.17e}", r.level) } else { "inf".into() },
                r.resolvent_iters,
                r.energy_violation
            )?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    pub fn energy_ok(&self) -> bool {
        self.energy_flags.is_empty()
    }

    /// Measured `C` in `sup‖u_j‖² + Σ τ‖∇u_j‖² ≤ C (‖u₀‖² + T + Σ τ‖F‖²)`.
    pub fn trace_bound_constant(&self) -> f64 {
        let (Some(first), Some(last)) = (self.records.first(), self.records.last()) else {
            return 0.0;
        };
        let sup = self.records.iter().map(|r| r.l2_norm * r.l2_norm).fold(0.0, f64::max);
        (sup + last.cumulative_dissipation)
            / (first.l2_norm * first.l2_norm + last.t + self.source_energy)
    }
}

#[derive(Clone, Debug)]
pub struct Evolution {
    pub final_state: GridFunction,
    pub trace: EvolutionTrace,
    /// `u_0, …, u_n` when requested.
    pub trajectory: Vec<GridFunction>,
    pub level: Option<f64>,
}

#[derive(Debug)]
pub struct EvolutionFailure {
    pub trace: EvolutionTrace,
    pub error: Error,
}

impl From<Box<EvolutionFailure>> for Error {
    fn from(f: Box<EvolutionFailure>) -> Self {
        f.error
    }
}

#[derive(Clone, Debug)]
pub struct StepOutput {
    pub state: GridFunction,
    pub iterations: usize,
    /// `⟨F - θB(u_prev), ∇u_j⟩`
    pub source_pairing: f64,
    pub source_norm: f64,
}

/// Reuses sine-transform plans and, for autonomous data, the operator.
pub struct Stepper<'a> {
    data: &'a ProblemData,
    cfg: &'a EvolutionConfig,
    level: Option<f64>,
    solver: Resolvent,
    cached: Option<TruncatedOperator>,
    cached_source: Option<VectorField>,
}

impl<'a> Stepper<'a> {
    pub fn new(data: &'a ProblemData, cfg: &'a EvolutionConfig, level: Option<f64>) -> Result<Self> {
        let cached = if data.is_autonomous() {
            Some(TruncatedOperator::new(data, level, 0.0)?)
        } else {
            None
        };
        let cached_source = match &data.source {
            Some(s) if s.is_autonomous() => Some(data.source_field(0.0)),
            _ => None,
        };
        Ok(Self {
            data,
            cfg,
            level,
            solver: Resolvent::new(&data.domain),
            cached,
            cached_source,
        })
    }

    pub fn operator(&self, t: f64) -> Result<TruncatedOperator> {
        match &self.cached {
            Some(op) => Ok(op.clone()),
            None => TruncatedOperator::new(self.data, self.level, t),
        }
    }

    /// `u_j` from `u_{j-1}` with coefficients at `t = t_j`.
    pub fn step(&self, u_prev: &GridFunction, t: f64) -> Result<StepOutput> {
        let tau = self.cfg.dt;
        let owned;
        let op = match &self.cached {
            Some(op) => op,
            None => {
                owned = TruncatedOperator::new(self.data, self.level, t)?;
                &owned
            }
        };
        let source = match &self.cached_source {
            Some(f) => f.clone(),
            None => self.data.source_field(t),
        };
        let source_norm = source.norm();
        let forcing = if self.level.is_some() {
            source.add_scaled(-1.0, &op.explicit_drift_flux(u_prev))
        } else {
            source
        };
        let rhs = u_prev.add_scaled(-tau, &divergence(&forcing));
        let cfg = ResolventConfig {
            lambda: tau,
            ..self.cfg.resolvent.clone()
        };
        let out = self.solver.resolve(op, &rhs, &cfg, Some(u_prev))?;
        let source_pairing = inner_vec(&forcing, &gradient(&out.solution))?;
        Ok(StepOutput {
            state: out.solution,
            iterations: out.diagnostics.iterations,
            source_pairing,
            source_norm,
        })
    }
}

/// One step from `u_prev` to `t`.
pub fn step(
    data: &ProblemData,
    cfg: &EvolutionConfig,
    u_prev: &GridFunction,
    t: f64,
    level: Option<f64>,
) -> Result<GridFunction> {
    if t > cfg.horizon * (1.0 + 1e-12) {
        return Err(Error::InvalidArgument(format!("t = {t} lies past the horizon")));
    }
    Ok(Stepper::new(data, cfg, level)?.step(u_prev, t)?.state)
}

pub fn evolve(data: &ProblemData, cfg: &EvolutionConfig) -> std::result::Result<Evolution, Box<EvolutionFailure>> {
    let fail = |trace: EvolutionTrace, error: Error| Box::new(EvolutionFailure { trace, error });
    let level = match cfg.run_level(data) {
        Ok(l) => l,
        Err(e) => return Err(fail(EvolutionTrace::default(), e)),
    };
    evolve_at_level(data, cfg, level, &data.initial)
}

pub(crate) fn evolve_at_level(
    data: &ProblemData,
    cfg: &EvolutionConfig,
    level: Option<f64>,
    initial: &GridFunction,
) -> std::result::Result<Evolution, Box<EvolutionFailure>> {
    let fail = |trace: EvolutionTrace, error: Error| Box::new(EvolutionFailure { trace, error });
    let mut trace = EvolutionTrace::default();
    let n = match cfg.steps() {
        Ok(n) => n,
        Err(e) => return Err(fail(trace, e)),
    };
    if initial.domain() != &data.domain {
        return Err(fail(trace, Error::DomainMismatch));
    }
    let stepper = match Stepper::new(data, cfg, level) {
        Ok(s) => s,
        Err(e) => return Err(fail(trace, e)),
    };
    if let (Some(m), Some(_)) = (level, &data.drift) {
        let times: Vec<f64> = if data.is_autonomous() {
            vec![0.0]
        } else {
            (1..=n).map(|j| j as f64 * cfg.dt).collect()
        };
        let samples: Vec<GridFunction> = times.iter().map(|t| data.drift_coefficient(*t)).collect();
        match crate::models::certify_truncation(&samples, m, data.alpha(), data.domain.dim()) {
            Ok(c) if !c.evolution_pass => trace.warnings.push(match c.evolution_threshold {
                Some(th) => format!(
                    "truncation level {m} is not certified: ‖b - T_M b‖ = {:.4e} exceeds {th:.4e}",
                    c.remainder_norm
                ),
                None => format!(
                    "truncation level {m} is not certified: no Sobolev threshold in dimension {}",
                    data.domain.dim()
                ),
            }),
            Ok(_) => {}
            Err(e) => return Err(fail(trace, e)),
        }
    }
    let alpha = data.alpha();
    let tau = cfg.dt;
    let level_value = level.unwrap_or(f64::INFINITY);
    let mut u = initial.clone();
    let mut trajectory = Vec::new();
    if cfg.keep_trajectory {
        trajectory.push(u.clone());
    }
    let mut dissipation = 0.0;
    trace.records.push(StepRecord {
        step: 0,
        t: 0.0,
        l2_norm: u.norm(),
        h1_seminorm: dirichlet_energy(&u).sqrt(),
        cumulative_dissipation: 0.0,
        level: level_value,
        resolvent_iters: 0,
        energy_violation: 0.0,
    });
    for j in 1..=n {
        let t = j as f64 * tau;
        let out = match stepper.step(&u, t) {
            Ok(o) => o,
            Err(e) => {
                return Err(fail(
                    trace,
                    Error::StepFailed {
                        step: j,
                        source: Box::new(e),
                    },
                ))
            }
        };
        let prev_sq = inner(&u, &u).expect("same grid");
        let grad_sq = dirichlet_energy(&out.state);
        let cur_sq = inner(&out.state, &out.state).expect("same grid");
        let lhs = 0.5 * cur_sq + tau * 0.5 * alpha * grad_sq;
        let rhs = 0.5 * prev_sq + tau * out.source_pairing;
        let excess = lhs - rhs;
        if excess > ENERGY_TOL * (1.0 + prev_sq) {
            trace.energy_flags.push(j);
        }
        dissipation += tau * grad_sq;
        trace.source_energy += tau * out.source_norm * out.source_norm;
        trace.records.push(StepRecord {
            step: j,
            t,
            l2_norm: cur_sq.sqrt(),
            h1_seminorm: grad_sq.sqrt(),
            cumulative_dissipation: dissipation,
            level: level_value,
            resolvent_iters: out.iterations,
            energy_violation: excess,
        });
        u = out.state;
        if cfg.keep_trajectory {
            trajectory.push(u.clone());
        }
    }
    Ok(Evolution {
        final_state: u,
        trace,
        trajectory,
        level,
    })
}
