use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::ProblemData;
use crate::exec::Policy;

#[derive(Clone, Debug, Serialize)]
pub struct HypothesisReport {
    pub model: String,
    pub samples: usize,
    /// `min (⟨A(η) - A(η*), η - η*⟩ - α|η - η*|²) / |η - η*|²`
    pub monotonicity_margin: f64,
    /// `max |A(η)| / (β|η| + g)`
    pub growth_ratio: f64,
    /// `max |A(η) - A(η*)| / (β|η - η*|)`
    pub lipschitz_ratio: f64,
    /// `max |B(z) - B(z*)| / (b|z - z*|)`, zero without drift.
    pub drift_ratio: f64,
    /// `max |B(0)|`
    pub drift_at_zero: f64,
    pub pass: bool,
}

struct Sample {
    mono: f64,
    growth: f64,
    lip: f64,
    drift: f64,
    zero: f64,
}

const SLACK: f64 = 1e-12;

/// Spot-checks monotonicity, growth and Lipschitz bounds of `A` and the
/// Lipschitz bound and `B(0) = 0` of the drift on random `(x, t, η, η*)`.
pub fn verify_hypotheses(problem: &ProblemData, samples: usize, seed: u64, policy: Policy) -> HypothesisReport {
    let dim = problem.domain.dim();
    let lengths = problem.domain.lengths().to_vec();
    let horizon = problem.horizon.max(0.0);
    let alpha = problem.alpha();
    let beta = problem.beta();
    let results = policy.map_range(samples, |k| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(k as u64);
        let x: Vec<f64> = lengths.iter().map(|l| rng.gen_range(0.0..*l)).collect();
        let t = rng.gen_range(0.0..=horizon);
        let scale = 10f64.powf(rng.gen_range(-3.0..2.0));
        let eta: Vec<f64> = (0..dim).map(|_| scale * rng.gen_range(-1.0..1.0)).collect();
        let etas: Vec<f64> = (0..dim).map(|_| scale * rng.gen_range(-1.0..1.0)).collect();
        let a = problem.diffusion.evaluate(&x, t, &eta);
        let as_ = problem.diffusion.evaluate(&x, t, &etas);
        let d: Vec<f64> = eta.iter().zip(&etas).map(|(p, q)| p - q).collect();
        let da: Vec<f64> = a.iter().zip(&as_).map(|(p, q)| p - q).collect();
        let d2: f64 = d.iter().map(|v| v * v).sum();
        let pair: f64 = da.iter().zip(&d).map(|(p, q)| p * q).sum();
        let mono = if d2 > 0.0 { (pair - alpha * d2) / d2 } else { 0.0 };
        let abs_a = norm(&a);
        let growth_bound = beta * norm(&eta) + problem.diffusion.growth_offset(&x, t);
        let growth = ratio(abs_a, growth_bound);
        let lip = ratio(norm(&da), beta * d2.sqrt());
        let (drift, zero) = match &problem.drift {
            None => (0.0, 0.0),
            Some(b) => {
                let z = scale * rng.gen_range(-1.0..1.0);
                let zs = scale * rng.gen_range(-1.0..1.0);
                let bz = b.evaluate(&x, t, z);
                let bzs = b.evaluate(&x, t, zs);
                let diff: Vec<f64> = bz.iter().zip(&bzs).map(|(p, q)| p - q).collect();
                let coef = b.coefficient(&x, t);
                (
                    ratio(norm(&diff), coef * (z - zs).abs()),
                    norm(&b.evaluate(&x, t, 0.0)),
                )
            }
        };
        Sample {
            mono,
            growth,
            lip,
            drift,
            zero,
        }
    });
    let fold = |f: fn(&Sample) -> f64, init: f64, pick: fn(f64, f64) -> f64| {
        results.iter().map(f).fold(init, pick)
    };
    let monotonicity_margin = fold(|s| s.mono, f64::INFINITY, f64::min);
    let growth_ratio = fold(|s| s.growth, 0.0, f64::max);
    let lipschitz_ratio = fold(|s| s.lip, 0.0, f64::max);
    let drift_ratio = fold(|s| s.drift, 0.0, f64::max);
    let drift_at_zero = fold(|s| s.zero, 0.0, f64::max);
    let pass = monotonicity_margin >= -SLACK
        && growth_ratio <= 1.0 + SLACK
        && lipschitz_ratio <= 1.0 + SLACK
        && drift_ratio <= 1.0 + SLACK
        && drift_at_zero == 0.0;
    HypothesisReport {
        model: problem.name.clone(),
        samples,
        monotonicity_margin,
        growth_ratio,
        lipschitz_ratio,
        drift_ratio,
        drift_at_zero,
        pass,
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else if num == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::BoxDomain;
    use crate::models::{build_model, ModelOptions, BUILTIN_MODELS};
    use std::sync::Arc;

    #[test]
    fn builtins_satisfy_hypotheses() {
        for dim in [2, 3] {
            let d = BoxDomain::unit(dim, 8).unwrap();
            for name in BUILTIN_MODELS {
                let m = build_model(name, &d, 1.0, &ModelOptions::default()).unwrap();
                let r = verify_hypotheses(&m, 1000, 11, Policy::Parallel);
                assert!(r.pass, "{r:?}");
            }
        }
    }

    #[test]
    fn heat_is_exactly_monotone() {
        let d = BoxDomain::unit(2, 8).unwrap();
        let m = build_model("heat", &d, 1.0, &ModelOptions::default()).unwrap();
        let r = verify_hypotheses(&m, 200, 1, Policy::Sequential);
        assert!(r.monotonicity_margin.abs() < 1e-12);
    }

    #[derive(Debug)]
    struct Cubic;
    impl crate::models::DiffusionFlux for Cubic {
        fn component(&self, _: usize, _: &[f64], _: f64, eta: f64) -> f64 {
            eta + eta.powi(3)
        }
        fn derivative(&self, _: usize, _: &[f64], _: f64, eta: f64) -> f64 {
            1.0 + 3.0 * eta * eta
        }
        fn alpha(&self) -> f64 {
            1.0
        }
        fn beta(&self) -> f64 {
            2.0
        }
    }

    #[test]
    fn superlinear_flux_is_caught() {
        let d = BoxDomain::unit(2, 8).unwrap();
        let mut m = build_model("heat", &d, 1.0, &ModelOptions::default()).unwrap();
        m.diffusion = Arc::new(Cubic);
        let r = verify_hypotheses(&m, 1000, 5, Policy::Parallel);
        assert!(!r.pass);
        assert!(r.lipschitz_ratio > 1.0);
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let d = BoxDomain::unit(3, 8).unwrap();
        let m = build_model("singular-drift", &d, 1.0, &ModelOptions::default()).unwrap();
        let a = verify_hypotheses(&m, 300, 4, Policy::Sequential);
        let b = verify_hypotheses(&m, 300, 4, Policy::Parallel);
        assert_eq!(a.monotonicity_margin, b.monotonicity_margin);
        assert_eq!(a.drift_ratio, b.drift_ratio);
    }
}
