use serde::Serialize;

use super::{evolve_at_level, EvolutionConfig, EvolutionTrace, Splitting};
use crate::error::{Error, Result};
use crate::exec::Policy;
use crate::grid::GridFunction;
use crate::models::ProblemData;

#[derive(Clone, Debug, Serialize)]
pub struct ContinuationLevel {
    pub level: f64,
    #[serde(skip)]
    pub solution: GridFunction,
    #[serde(skip)]
    pub trace: EvolutionTrace,
    pub final_l2: f64,
    pub saturated: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ContinuationReport {
    pub levels: Vec<ContinuationLevel>,
    /// `‖u^{(k+1)}(T) - u^{(k)}(T)‖`
    pub differences: Vec<f64>,
    pub max_sampled_drift: f64,
    /// First level with `M_k ≥ max sampled b`.
    pub saturation_index: Option<usize>,
    /// Differences after saturation are nonincreasing and at solver level.
    pub settled: bool,
    /// Every successive difference is at most the previous one.
    pub monotone: bool,
    pub warnings: Vec<String>,
}

/// Evolves once per truncation level of the plan. With the fully-implicit
/// splitting the level never enters the operator, so every run coincides.
pub fn continuation(data: &ProblemData, cfg: &EvolutionConfig, policy: Policy) -> Result<ContinuationReport> {
    let levels = cfg.truncation.levels(&data.drift_coefficient(0.0))?;
    if levels.len() < 2 {
        return Err(Error::InvalidArgument("continuation needs at least two levels".into()));
    }
    let n = cfg.steps()?;
    let max_b = if data.is_autonomous() {
        data.max_sampled_drift(0.0)
    } else {
        (0..=n)
            .map(|j| data.max_sampled_drift(j as f64 * cfg.dt))
            .fold(0.0, f64::max)
    };
    let runs = policy.map(&levels, |m| {
        let level = match (cfg.splitting, &data.drift) {
            (Splitting::SemiImplicit, Some(_)) => Some(*m),
            _ => None,
        };
        evolve_at_level(data, cfg, level, &data.initial)
    });
    let mut out = Vec::with_capacity(levels.len());
    let mut warnings = Vec::new();
    for (m, run) in levels.iter().zip(runs) {
        let run = run.map_err(Error::from)?;
        warnings.extend(run.trace.warnings.iter().map(|w| format!("M = {m}: {w}")));
        out.push(ContinuationLevel {
            level: *m,
            final_l2: run.final_state.norm(),
            solution: run.final_state,
            trace: run.trace,
            saturated: *m >= max_b,
        });
    }
    let differences: Vec<f64> = out
        .windows(2)
        .map(|w| w[1].solution.sub(&w[0].solution).norm())
        .collect();
    let saturation_index = out.iter().position(|l| l.saturated);
    let floor = 1e-9;
    let settled = match saturation_index {
        None => false,
        Some(k) => {
            let tail = &differences[k.min(differences.len())..];
            tail.iter().all(|d| *d <= floor) && tail.windows(2).all(|w| w[1] <= w[0] + floor)
        }
    };
    let monotone = differences.windows(2).all(|w| w[1] <= w[0] + floor);
    if !monotone {
        warnings.push(format!("successive-level differences are not monotone: {differences:?}"));
    }
    Ok(ContinuationReport {
        levels: out,
        differences,
        max_sampled_drift: max_b,
        saturation_index,
        settled,
        monotone,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::BoxDomain;
    use crate::models::{build_model, ModelOptions, TruncationPlan};

    #[test]
    fn singular_drift_saturates_on_a_fixed_grid() {
        let d = BoxDomain::unit(2, 12).unwrap();
        let m = build_model("singular-drift", &d, 0.1, &ModelOptions::default()).unwrap();
        let mut cfg = EvolutionConfig::new(0.01, 0.1);
        cfg.splitting = Splitting::SemiImplicit;
        cfg.truncation = TruncationPlan {
            base: None,
            ratio: 2.0,
            count: 6,
        };
        let r = continuation(&m, &cfg, Policy::Parallel).unwrap();
        let k = r.saturation_index.expect("plan reaches sup b");
        assert!(k < r.levels.len() - 1);
        assert!(r.settled, "{:?}", r.differences);
        assert!(r.differences[0] > 1e-9);
    }

    #[test]
    fn bounded_drift_levels_coincide() {
        let d = BoxDomain::unit(2, 8).unwrap();
        let b = GridFunction::from_fn(&d, |x| 0.5 * x[0]);
        let opts = ModelOptions {
            drift_samples: Some(b),
            ..Default::default()
        };
        let m = build_model("singular-drift", &d, 0.1, &opts).unwrap();
        let mut cfg = EvolutionConfig::new(0.05, 0.1);
        cfg.splitting = Splitting::SemiImplicit;
        cfg.truncation = TruncationPlan {
            base: Some(1.0),
            ratio: 2.0,
            count: 3,
        };
        let r = continuation(&m, &cfg, Policy::Sequential).unwrap();
        assert_eq!(r.saturation_index, Some(0));
        assert!(r.differences.iter().all(|d| *d <= 1e-9));
    }

    #[test]
    fn needs_two_levels() {
        let d = BoxDomain::unit(2, 8).unwrap();
        let m = build_model("heat", &d, 0.1, &ModelOptions::default()).unwrap();
        let mut cfg = EvolutionConfig::new(0.05, 0.1);
        cfg.truncation.count = 1;
        assert!(continuation(&m, &cfg, Policy::Sequential).is_err());
    }
}
