//! Lorentz-space quantities of grid functions.
//!
//! A grid function is treated as the simple function that takes its node
//! value on a cell of measure `h_1 ⋯ h_N` around each interior node, so
//! every distribution function is a finite step function and every
//! quasi-norm below is an exact finite sum.
//!
//! The quasi-norm for `q < ∞` is
//! `‖φ‖_{p,q} = ( p ∫₀^∞ μ(m)^{q/p} m^{q-1} dm )^{1/q}`,
//! which reduces to the Lebesgue norm when `p = q`; the weak norm is
//! `‖φ‖_{p,∞} = sup_m m μ(m)^{1/p}`.

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::grid::GridFunction;

/// Second Lorentz index; `Infinite` selects the weak space.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SecondIndex {
    Finite(f64),
    Infinite,
}

impl SecondIndex {
    fn reciprocal(self) -> f64 {
        match self {
            SecondIndex::Finite(q) => 1.0 / q,
            SecondIndex::Infinite => 0.0,
        }
    }
}

impl Serialize for SecondIndex {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            SecondIndex::Finite(q) => s.serialize_f64(*q),
            SecondIndex::Infinite => s.serialize_str("inf"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LorentzExponents {
    pub p: f64,
    pub q: SecondIndex,
}

impl LorentzExponents {
    /// `q = f64::INFINITY` selects the weak space.
    pub fn new(p: f64, q: f64) -> Result<Self> {
        if !(p > 1.0 && p.is_finite()) {
            return Err(Error::IncompatibleExponents(format!("p = {p} must lie in (1, ∞)")));
        }
        let q = if q == f64::INFINITY {
            SecondIndex::Infinite
        } else if q >= 1.0 {
            SecondIndex::Finite(q)
        } else {
            return Err(Error::IncompatibleExponents(format!("q = {q} must be ≥ 1 or ∞")));
        };
        Ok(Self { p, q })
    }

    pub fn weak(p: f64) -> Result<Self> {
        Self::new(p, f64::INFINITY)
    }

    pub fn lebesgue(p: f64) -> Result<Self> {
        Self::new(p, p)
    }
}

/// Step-function distribution `μ(m) = |{|φ| > m}|`.
///
/// `measures[k]` is the value of `μ` on `[thresholds[k-1], thresholds[k])`
/// (with `thresholds[-1] = 0`); `μ` vanishes from the last threshold on.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DistributionFunction {
    pub thresholds: Vec<f64>,
    pub measures: Vec<f64>,
}

impl DistributionFunction {
    /// Builds the distribution of a simple function given as
    /// `(value, measure)` pairs.
    pub fn from_weighted(pairs: impl IntoIterator<Item = (f64, f64)>) -> Self {
        let mut v: Vec<(f64, f64)> = pairs
            .into_iter()
            .map(|(x, w)| (x.abs(), w))
            .filter(|(x, w)| *x > 0.0 && *w > 0.0)
            .collect();
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut thresholds: Vec<f64> = Vec::new();
        let mut level_mass: Vec<f64> = Vec::new();
        for (x, w) in v {
            match thresholds.last() {
                Some(t) if *t == x => *level_mass.last_mut().unwrap() += w,
                _ => {
                    thresholds.push(x);
                    level_mass.push(w);
                }
            }
        }
        let mut measures = vec![0.0; level_mass.len()];
        let mut acc = 0.0;
        for k in (0..level_mass.len()).rev() {
            acc += level_mass[k];
            measures[k] = acc;
        }
        Self {
            thresholds,
            measures,
        }
    }

    pub fn eval(&self, m: f64) -> f64 {
        if m < 0.0 {
            return self.measures.first().copied().unwrap_or(0.0);
        }
        // first threshold strictly above m
        let k = self.thresholds.partition_point(|t| *t <= m);
        self.measures.get(k).copied().unwrap_or(0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.thresholds.is_empty()
    }

    /// Exact quasi-norm of the underlying simple function.
    pub fn norm(&self, e: LorentzExponents) -> f64 {
        let p = e.p;
        match e.q {
            SecondIndex::Infinite => self
                .thresholds
                .iter()
                .zip(&self.measures)
                .map(|(m, mu)| m * mu.powf(1.0 / p))
                .fold(0.0, f64::max),
            SecondIndex::Finite(q) => {
                // Abel-summed form Σ_k m_k^q (W_k^{q/p} - W_{k+1}^{q/p}): all
                // terms are nonnegative.
                let r = self.thresholds.len();
                let mut s = 0.0;
                for k in 0..r {
                    let next = if k + 1 < r {
                        self.measures[k + 1].powf(q / p)
                    } else {
                        0.0
                    };
                    s += self.thresholds[k].powf(q) * (self.measures[k].powf(q / p) - next);
                }
                (p / q * s).powf(1.0 / q)
            }
        }
    }
}

pub fn distribution(u: &GridFunction) -> DistributionFunction {
    let w = u.domain().cell_volume();
    DistributionFunction::from_weighted(u.values().iter().map(|v| (*v, w)))
}

pub fn lorentz_norm(u: &GridFunction, e: LorentzExponents) -> f64 {
    distribution(u).norm(e)
}

/// Discrete Lebesgue norm `(Σ w |u|^p)^{1/p}`, computed directly.
pub fn lebesgue_norm(u: &GridFunction, p: f64) -> f64 {
    let w = u.domain().cell_volume();
    (w * u.values().iter().map(|v| v.abs().powf(p)).sum::<f64>()).powf(1.0 / p)
}

/// Pointwise clamp to `[-n, n]`.
pub fn truncate(u: &GridFunction, n: f64) -> Result<GridFunction> {
    if !(n > 0.0) {
        return Err(Error::InvalidArgument(format!("truncation level {n} must be positive")));
    }
    Ok(u.map(|v| v.clamp(-n, n)))
}

/// `u - T_n u`
pub fn truncation_remainder(u: &GridFunction, n: f64) -> GridFunction {
    u.map(|v| v - v.clamp(-n, n))
}

/// `‖u - T_n u‖_{p,∞}` for each level.
pub fn dist_to_bounded(u: &GridFunction, p: f64, levels: &[f64]) -> Result<Vec<f64>> {
    let e = LorentzExponents::weak(p)?;
    if levels.iter().any(|n| !(*n > 0.0)) || levels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(
            "levels must be positive and strictly increasing".into(),
        ));
    }
    Ok(levels
        .iter()
        .map(|n| lorentz_norm(&truncation_remainder(u, *n), e))
        .collect())
}

/// Volume of the unit ball in `R^N`, `π^{N/2} / Γ(N/2 + 1)`.
pub fn unit_ball_volume(dim: usize) -> f64 {
    // Γ(N/2 + 1) by the recurrence from Γ(1) = 1 or Γ(1/2) = √π
    let mut gamma = if dim.is_multiple_of(2) { 1.0 } else { std::f64::consts::PI.sqrt() };
    let mut x = if dim.is_multiple_of(2) { 1.0 } else { 0.5 };
    let target = dim as f64 / 2.0 + 1.0;
    while x < target - 1e-9 {
        gamma *= x;
        x += 1.0;
    }
    std::f64::consts::PI.powf(dim as f64 / 2.0) / gamma
}

/// Sobolev–Lorentz constant `S_{N,p} = ω_N^{-1/N} p / (N - p)`.
pub fn sobolev_constant(dim: usize, p: f64) -> Result<f64> {
    let n = dim as f64;
    if !(p > 1.0 && p < n) {
        return Err(Error::EmbeddingUndefined { dim, p });
    }
    Ok(unit_ball_volume(dim).powf(-1.0 / n) * p / (n - p))
}

/// `p* = N p / (N - p)`
pub fn sobolev_exponent(dim: usize, p: f64) -> Result<f64> {
    let n = dim as f64;
    if !(p > 1.0 && p < n) {
        return Err(Error::EmbeddingUndefined { dim, p });
    }
    Ok(n * p / (n - p))
}

#[derive(Clone, Debug, Serialize)]
pub struct HolderExponents {
    pub first: LorentzExponents,
    pub second: LorentzExponents,
    pub product: LorentzExponents,
}

/// Both sides of `‖uv‖_{p,q} ≤ ‖u‖_{p₁,q₁} ‖v‖_{p₂,q₂}`.
///
/// The inequality with constant one is not valid for every choice of
/// second indices; `rearranged_rhs` carries the right-hand side with the
/// factor `2^{1/p}` coming from `(uv)*(t) ≤ u*(t/2) v*(t/2)`, which always
/// holds.
#[derive(Clone, Debug, Serialize)]
pub struct HolderReport {
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub exponents: HolderExponents,
    pub rearranged_rhs: f64,
    pub rearranged_margin: f64,
}

/// Exponents `(p, q)` of the product space for `e1`, `e2`.
pub fn holder_product_exponents(
    e1: LorentzExponents,
    e2: LorentzExponents,
) -> Result<LorentzExponents> {
    let p = 1.0 / (1.0 / e1.p + 1.0 / e2.p);
    if !(p > 1.0) {
        return Err(Error::IncompatibleExponents(format!(
            "1/p = 1/{} + 1/{} gives p = {p} ≤ 1",
            e1.p, e2.p
        )));
    }
    let rq = e1.q.reciprocal() + e2.q.reciprocal();
    let q = if rq == 0.0 {
        SecondIndex::Infinite
    } else {
        SecondIndex::Finite(1.0 / rq)
    };
    Ok(LorentzExponents { p, q })
}

pub fn check_holder(
    u: &GridFunction,
    v: &GridFunction,
    e1: LorentzExponents,
    e2: LorentzExponents,
) -> Result<HolderReport> {
    if u.domain() != v.domain() {
        return Err(Error::DomainMismatch);
    }
    let e = holder_product_exponents(e1, e2)?;
    let w = u.domain().cell_volume();
    let product = DistributionFunction::from_weighted(
        u.values().iter().zip(v.values()).map(|(a, b)| (a * b, w)),
    );
    let lhs = product.norm(e);
    let rhs = lorentz_norm(u, e1) * lorentz_norm(v, e2);
    let rearranged_rhs = 2f64.powf(1.0 / e.p) * rhs;
    Ok(HolderReport {
        lhs,
        rhs,
        margin: rhs - lhs,
        exponents: HolderExponents {
            first: e1,
            second: e2,
            product: e,
        },
        rearranged_rhs,
        rearranged_margin: rearranged_rhs - lhs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::BoxDomain;
    use proptest::prelude::*;

    fn line(vals: Vec<f64>) -> GridFunction {
        let d = BoxDomain::unit(1, vals.len() + 1).unwrap();
        GridFunction::from_values(&d, vals).unwrap()
    }

    #[test]
    fn zero_has_zero_distribution() {
        let u = line(vec![0.0; 5]);
        let mu = distribution(&u);
        assert!(mu.is_zero());
        assert_eq!(mu.eval(0.0), 0.0);
        assert_eq!(lorentz_norm(&u, LorentzExponents::weak(2.0).unwrap()), 0.0);
    }

    #[test]
    fn two_level_distribution() {
        let w = 0.3;
        let mu = DistributionFunction::from_weighted([(2.0, w), (5.0, w)]);
        assert_eq!(mu.eval(0.0), 2.0 * w);
        assert_eq!(mu.eval(1.999), 2.0 * w);
        assert_eq!(mu.eval(2.0), w);
        assert_eq!(mu.eval(4.9), w);
        assert_eq!(mu.eval(5.0), 0.0);
        assert_eq!(mu.eval(7.0), 0.0);
    }

    #[test]
    fn distribution_ignores_sign() {
        let u = line(vec![-3.0, 1.0, 2.0, -2.0]);
        assert_eq!(distribution(&u), distribution(&u.map(f64::abs)));
    }

    #[test]
    fn indicator_weak_norm_is_measure_power() {
        let u = line(vec![1.0, 1.0, 0.0, 1.0, 0.0, 0.0, 1.0]);
        let measure: f64 = 4.0 / 8.0;
        for p in [1.5, 2.0, 3.0, 7.0] {
            let n = lorentz_norm(&u, LorentzExponents::weak(p).unwrap());
            assert!((n - measure.powf(1.0 / p)).abs() < 1e-15);
        }
    }

    #[test]
    fn truncation_clamps() {
        let u = line(vec![-3.0, 0.5, 7.0]);
        assert_eq!(truncate(&u, 1.0).unwrap().values(), &[-1.0, 0.5, 1.0]);
        assert_eq!(truncate(&u, 7.0).unwrap(), u);
        assert!(truncate(&u, 0.0).is_err());
    }

    #[test]
    fn bounded_function_is_at_distance_zero_above_its_max() {
        let u = line(vec![-3.0, 0.5, 7.0]);
        let d = dist_to_bounded(&u, 2.0, &[1.0, 7.0, 9.0]).unwrap();
        assert!(d[0] > 0.0);
        assert_eq!(d[1], 0.0);
        assert_eq!(d[2], 0.0);
        assert!(dist_to_bounded(&u, 2.0, &[2.0, 1.0]).is_err());
    }

    #[test]
    fn unit_ball_volumes() {
        use std::f64::consts::PI;
        assert!((unit_ball_volume(1) - 2.0).abs() < 1e-15);
        assert!((unit_ball_volume(2) - PI).abs() < 1e-15);
        assert!((unit_ball_volume(3) - 4.0 * PI / 3.0).abs() < 1e-14);
    }

    #[test]
    fn sobolev_constants() {
        let s32 = sobolev_constant(3, 2.0).unwrap();
        assert!((s32 - 1.2407).abs() < 1e-4, "{s32}");
        let s = sobolev_constant(3, 1.5).unwrap();
        assert!((s - 0.6204).abs() < 1e-4, "{s}");
        assert!(matches!(
            sobolev_constant(2, 2.0),
            Err(Error::EmbeddingUndefined { .. })
        ));
        assert!(sobolev_constant(3, 1.0).is_err());
        assert_eq!(sobolev_exponent(3, 2.0).unwrap(), 6.0);
    }

    #[test]
    fn holder_with_zero_factor() {
        let u = line(vec![1.0, -2.0, 3.0]);
        let z = line(vec![0.0; 3]);
        let e1 = LorentzExponents::new(3.0, 2.0).unwrap();
        let e2 = LorentzExponents::new(4.0, 5.0).unwrap();
        let r = check_holder(&u, &z, e1, e2).unwrap();
        assert_eq!((r.lhs, r.rhs, r.margin), (0.0, 0.0, 0.0));
    }

    #[test]
    fn holder_on_indicator_is_equality() {
        let u = line(vec![1.0, 0.0, 1.0, 1.0, 0.0]);
        let e1 = LorentzExponents::weak(3.0).unwrap();
        let e2 = LorentzExponents::weak(6.0).unwrap();
        let r = check_holder(&u, &u, e1, e2).unwrap();
        assert!(r.margin.abs() < 1e-15);
        assert!((r.lhs - 0.5f64.powf(0.5)).abs() < 1e-15);
    }

    #[test]
    fn holder_rejects_product_below_one() {
        let u = line(vec![1.0; 3]);
        let e = LorentzExponents::new(1.5, 1.5).unwrap();
        assert!(matches!(
            check_holder(&u, &u, e, e),
            Err(Error::IncompatibleExponents(_))
        ));
    }

    #[test]
    fn weak_holder_with_constant_one_can_fail() {
        // uv = 30 on both cells while u and v each peak on a single cell:
        // ‖uv‖_{2,∞} = 30·(2w)^{1/2} > 36·w^{1/2} = ‖u‖_{4,∞}‖v‖_{4,∞}
        let d = BoxDomain::unit(1, 3).unwrap();
        let u = GridFunction::from_values(&d, vec![5.0, 6.0]).unwrap();
        let v = GridFunction::from_values(&d, vec![6.0, 5.0]).unwrap();
        let e = LorentzExponents::weak(4.0).unwrap();
        let r = check_holder(&u, &v, e, e).unwrap();
        assert!(r.margin < 0.0, "{r:?}");
        assert!(r.rearranged_margin >= 0.0);
    }

    proptest! {
        #[test]
        fn diagonal_index_recovers_lebesgue(vals in proptest::collection::vec(-50.0f64..50.0, 1..40), p in 1.01f64..8.0) {
            let u = line(vals);
            let a = lorentz_norm(&u, LorentzExponents::lebesgue(p).unwrap());
            let b = lebesgue_norm(&u, p);
            prop_assert!((a - b).abs() <= 1e-12 * b.max(1e-300));
        }

        #[test]
        fn quasi_norms_are_homogeneous(vals in proptest::collection::vec(-5.0f64..5.0, 1..30), c in -10.0f64..10.0, p in 1.1f64..5.0, q in 1.0f64..6.0) {
            let u = line(vals);
            for e in [LorentzExponents::new(p, q).unwrap(), LorentzExponents::weak(p).unwrap()] {
                let a = lorentz_norm(&u.scaled(c), e);
                let b = c.abs() * lorentz_norm(&u, e);
                prop_assert!((a - b).abs() <= 1e-12 * b.max(1e-300));
            }
        }

        #[test]
        fn distribution_is_nonincreasing(vals in proptest::collection::vec(-5.0f64..5.0, 1..30)) {
            let u = line(vals);
            let mu = distribution(&u);
            prop_assert!(mu.measures.windows(2).all(|w| w[1] <= w[0]));
            prop_assert!(mu.eval(0.0) <= u.domain().measure());
            prop_assert_eq!(mu.eval(u.max_abs()), 0.0);
        }

        #[test]
        fn distance_to_bounded_is_nonincreasing(vals in proptest::collection::vec(-20.0f64..20.0, 1..30), p in 1.1f64..4.0) {
            let u = line(vals);
            let levels: Vec<f64> = (1..12).map(|k| 0.5 * k as f64).collect();
            let d = dist_to_bounded(&u, p, &levels).unwrap();
            prop_assert!(d.windows(2).all(|w| w[1] <= w[0]));
        }
    }
}
