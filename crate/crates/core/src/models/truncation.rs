use serde::Serialize;

use super::ProblemData;
use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::lorentz::{lorentz_norm, sobolev_constant, truncate, truncation_remainder, LorentzExponents};

/// `θ_M = T_M(b)/b`, with `θ = 1` where `b = 0`.
pub fn truncation_weight(b: &GridFunction, level: f64) -> Result<GridFunction> {
    if !(level > 0.0) {
        return Err(Error::InvalidArgument(format!("truncation level {level} must be positive")));
    }
    if b.values().iter().any(|v| *v < 0.0) {
        return Err(Error::InvalidArgument("drift coefficient must be nonnegative".into()));
    }
    Ok(b.map(|v| weight(v, level)))
}

#[inline]
pub(crate) fn weight(b: f64, level: f64) -> f64 {
    if b > level {
        level / b
    } else {
        1.0
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TruncationCertificate {
    pub level: f64,
    pub dim: usize,
    /// `sup_t ‖b - T_M b‖_{N,∞}` over the sampled times.
    pub remainder_norm: f64,
    /// `sup_t ‖T_M b‖_{N,∞}`
    pub bounded_norm: f64,
    pub sobolev: Option<f64>,
    /// `α / (2 S_{N,2})`
    pub evolution_threshold: Option<f64>,
    /// `α / (4 S_{N,2})`
    pub longtime_threshold: Option<f64>,
    pub evolution_pass: bool,
    pub longtime_pass: bool,
    /// Long-time small-data test: remainder below `α/(4S)` and
    /// `(‖b - T_M b‖ + ‖T_M b‖) S < α/2`.
    pub small_data_pass: bool,
    /// The literal form `M S < α/4` of the bounded-part condition.
    pub literal_bounded_pass: bool,
    pub time_samples: usize,
}

/// Measures `‖b - T_M b‖_{N,∞}` over time samples of `b` and compares it
/// against the evolution and long-time thresholds. Without a Sobolev
/// embedding (`N < 3`) only a vanishing drift is certified.
pub fn certify_truncation(
    samples: &[GridFunction],
    level: f64,
    alpha: f64,
    dim: usize,
) -> Result<TruncationCertificate> {
    if !(level > 0.0) {
        return Err(Error::InvalidArgument(format!("truncation level {level} must be positive")));
    }
    if samples.is_empty() {
        return Err(Error::InvalidArgument("need at least one time sample".into()));
    }
    let e = LorentzExponents::weak((dim as f64).max(2.0))?;
    let mut rem = 0.0f64;
    let mut bounded = 0.0f64;
    let mut all_zero = true;
    for b in samples {
        all_zero &= b.max_abs() == 0.0;
        if dim >= 2 {
            rem = rem.max(lorentz_norm(&truncation_remainder(b, level), e));
            bounded = bounded.max(lorentz_norm(&truncate(b, level)?, e));
        }
    }
    let sobolev = sobolev_constant(dim, 2.0).ok();
    let (evolution_threshold, longtime_threshold) = match sobolev {
        Some(s) => (Some(alpha / (2.0 * s)), Some(alpha / (4.0 * s))),
        None => (None, None),
    };
    let (evolution_pass, longtime_pass, small_data_pass, literal_bounded_pass) = match sobolev {
        Some(s) => (
            rem <= alpha / (2.0 * s),
            rem <= alpha / (4.0 * s),
            rem <= alpha / (4.0 * s) && (rem + bounded) * s < alpha / 2.0,
            level * s < alpha / 4.0,
        ),
        None => (all_zero, all_zero, all_zero, all_zero),
    };
    Ok(TruncationCertificate {
        level,
        dim,
        remainder_norm: rem,
        bounded_norm: bounded,
        sobolev,
        evolution_threshold,
        longtime_threshold,
        evolution_pass,
        longtime_pass,
        small_data_pass,
        literal_bounded_pass,
        time_samples: samples.len(),
    })
}

/// Geometric schedule `M_k = M₀ · ratio^k`. Without an explicit `M₀` the
/// 0.9-quantile of the positive node values of `b` is used.
#[derive(Clone, Debug, Serialize)]
pub struct TruncationPlan {
    pub base: Option<f64>,
    pub ratio: f64,
    pub count: usize,
}

impl Default for TruncationPlan {
    fn default() -> Self {
        Self {
            base: None,
            ratio: 2.0,
            count: 6,
        }
    }
}

impl TruncationPlan {
    pub fn levels(&self, b: &GridFunction) -> Result<Vec<f64>> {
        if !(self.ratio > 1.0) || self.count == 0 {
            return Err(Error::InvalidArgument(
                "truncation plan needs ratio > 1 and at least one level".into(),
            ));
        }
        let base = match self.base {
            Some(m) if m > 0.0 => m,
            Some(m) => {
                return Err(Error::InvalidArgument(format!("truncation level {m} must be positive")))
            }
            None => quantile_positive(b, 0.9).unwrap_or(1.0),
        };
        Ok((0..self.count).map(|k| base * self.ratio.powi(k as i32)).collect())
    }

    /// Levels with a certificate each, sampling `b` at `times`.
    pub fn certify(&self, problem: &ProblemData, times: &[f64]) -> Result<Vec<TruncationCertificate>> {
        let samples: Vec<GridFunction> = times.iter().map(|t| problem.drift_coefficient(*t)).collect();
        let first = samples
            .first()
            .ok_or_else(|| Error::InvalidArgument("need at least one time sample".into()))?;
        self.levels(first)?
            .into_iter()
            .map(|m| certify_truncation(&samples, m, problem.alpha(), problem.domain.dim()))
            .collect()
    }
}

fn quantile_positive(b: &GridFunction, q: f64) -> Option<f64> {
    let mut v: Vec<f64> = b.values().iter().copied().filter(|x| *x > 0.0).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let idx = ((v.len() - 1) as f64 * q).round() as usize;
    Some(v[idx])
}

#[derive(Clone, Debug, Serialize)]
pub struct LadderCertificate {
    pub level: f64,
    pub cells: Vec<Vec<usize>>,
    pub measured: Vec<f64>,
    pub threshold: Option<f64>,
    /// Analytic continuum value of the remainder norm, when known.
    pub continuum: Option<f64>,
    /// The finest measurement exceeds the threshold and has not dropped by
    /// more than 10% from the previous rung.
    pub obstruction: bool,
}

/// Repeats the evolution certificate on a refinement ladder at fixed `M`.
pub fn certify_on_ladder(
    problems: &[ProblemData],
    level: f64,
    time: f64,
    continuum: Option<f64>,
) -> Result<LadderCertificate> {
    let mut cells = Vec::new();
    let mut measured = Vec::new();
    let mut threshold = None;
    for p in problems {
        let cert = certify_truncation(&[p.drift_coefficient(time)], level, p.alpha(), p.domain.dim())?;
        cells.push(p.domain.cells().to_vec());
        measured.push(cert.remainder_norm);
        threshold = cert.evolution_threshold;
    }
    let obstruction = match (threshold, measured.as_slice()) {
        (Some(th), [.., prev, last]) => *last > th && *last >= 0.9 * prev,
        (Some(th), [last]) => *last > th,
        _ => false,
    };
    Ok(LadderCertificate {
        level,
        cells,
        measured,
        threshold,
        continuum,
        obstruction,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::BoxDomain;
    use crate::models::{build_model, ModelOptions};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn weight_examples() {
        let d = BoxDomain::unit(1, 4).unwrap();
        let b = GridFunction::from_values(&d, vec![10.0, 0.0, 3.0]).unwrap();
        let th = truncation_weight(&b, 4.0).unwrap();
        assert_eq!(th.values(), &[0.4, 1.0, 1.0]);
        assert!(truncation_weight(&b, 0.0).is_err());
    }

    #[test]
    fn weight_times_b_is_truncation() {
        let d = BoxDomain::unit(2, 9).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b = GridFunction::from_values(
            &d,
            (0..d.node_count()).map(|_| rng.gen_range(0.0..20.0)).collect(),
        )
        .unwrap();
        let m = 7.5;
        let th = truncation_weight(&b, m).unwrap();
        let tb = truncate(&b, m).unwrap();
        for i in 0..b.len() {
            let (bi, ti) = (b.values()[i], th.values()[i]);
            assert!(ti > 0.0 && ti <= 1.0);
            assert!((ti * bi - tb.values()[i]).abs() <= 1e-14 * bi);
            assert!(((1.0 - ti) * bi - (bi - tb.values()[i])).abs() <= 1e-13 * bi.max(1.0));
        }
    }

    #[test]
    fn bounded_drift_above_sup_is_certified() {
        let d = BoxDomain::unit(3, 6).unwrap();
        let b = GridFunction::from_fn(&d, |x| 1.0 + x[0]);
        let c = certify_truncation(&[b], 2.0, 1.0, 3).unwrap();
        assert_eq!(c.remainder_norm, 0.0);
        assert!(c.evolution_pass && c.longtime_pass);
    }

    #[test]
    fn measured_norm_is_monotone_in_level() {
        let d = BoxDomain::unit(3, 12).unwrap();
        let m = build_model("singular-drift", &d, 1.0, &ModelOptions::default()).unwrap();
        let b = m.drift_coefficient(0.0);
        let mut prev = f64::INFINITY;
        for level in [0.1, 0.3, 0.5, 1.0, 2.0, 4.0] {
            let c = certify_truncation(std::slice::from_ref(&b), level, 1.0, 3).unwrap();
            assert!(c.remainder_norm <= prev);
            prev = c.remainder_norm;
        }
    }

    #[test]
    fn small_singular_drift_passes_large_one_is_obstructed() {
        let make = |c: f64, n: usize| {
            let d = BoxDomain::unit(3, n).unwrap();
            let opts = ModelOptions {
                drift_strength: Some(c),
                drift_center: Some(vec![0.5 - 1.0 / 64.0; 3]),
                ..Default::default()
            };
            build_model("singular-drift", &d, 1.0, &opts).unwrap()
        };
        let ladder = |c: f64| -> Vec<ProblemData> { [8, 16, 32].iter().map(|n| make(c, *n)).collect() };
        let omega = crate::lorentz::unit_ball_volume(3).cbrt();
        let th = 1.0 / (2.0 * sobolev_constant(3, 2.0).unwrap());
        let small = certify_on_ladder(&ladder(0.1), 2.0, 0.0, Some(0.1 * omega)).unwrap();
        assert!(!small.obstruction);
        assert!(small.measured.iter().all(|v| *v <= th));
        let c_big = 2.0 * th / omega;
        let big = certify_on_ladder(&ladder(c_big), 2.0, 0.0, Some(c_big * omega)).unwrap();
        assert!(big.obstruction, "{big:?}");
    }

    #[test]
    fn no_embedding_in_two_dimensions() {
        let d = BoxDomain::unit(2, 8).unwrap();
        let zero = GridFunction::zeros(&d);
        let c = certify_truncation(&[zero], 1.0, 1.0, 2).unwrap();
        assert!(c.evolution_pass && c.evolution_threshold.is_none());
        let one = GridFunction::from_fn(&d, |_| 0.5);
        assert!(!certify_truncation(&[one], 1.0, 1.0, 2).unwrap().evolution_pass);
    }

    #[test]
    fn plan_levels_are_geometric() {
        let d = BoxDomain::unit(2, 8).unwrap();
        let b = GridFunction::from_fn(&d, |x| x[0]);
        let plan = TruncationPlan {
            base: Some(0.5),
            ratio: 2.0,
            count: 3,
        };
        assert_eq!(plan.levels(&b).unwrap(), vec![0.5, 1.0, 2.0]);
        let default = TruncationPlan::default().levels(&b).unwrap();
        assert!(default[0] > 0.0 && default[0] < 1.0);
    }
}
