use std::f64::consts::PI;
use std::sync::Arc;

use super::{DiffusionFlux, DriftFlux, ProblemData, SourceField};
use crate::error::{Error, Result};
use crate::grid::{BoxDomain, GridFunction};

pub const BUILTIN_MODELS: &[&str] = &[
    "heat",
    "heat-source",
    "variable-diffusion",
    "lipschitz-nonlinear",
    "singular-drift",
    "manufactured",
];

pub fn builtin_models() -> &'static [&'static str] {
    BUILTIN_MODELS
}

#[derive(Clone, Debug, Default)]
pub struct ModelOptions {
    /// `c` in `b = c / |x - x₀|`.
    pub drift_strength: Option<f64>,
    /// Singularity location; defaults to the cell center nearest the middle
    /// of the box.
    pub drift_center: Option<Vec<f64>>,
    /// Custom drift coefficient sampled on a grid, used with a fixed
    /// direction instead of the singular profile.
    pub drift_samples: Option<GridFunction>,
    pub source_amplitude: Option<f64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
}

fn sine_bump(domain: &BoxDomain, x: &[f64]) -> f64 {
    x.iter()
        .zip(domain.lengths())
        .map(|(xi, li)| (PI * xi / li).sin())
        .product()
}

pub fn build_model(
    name: &str,
    domain: &BoxDomain,
    horizon: f64,
    opts: &ModelOptions,
) -> Result<ProblemData> {
    let lengths = domain.lengths().to_vec();
    let bump = GridFunction::from_fn(domain, |x| sine_bump(domain, x));
    let alpha = opts.alpha.unwrap_or(1.0);
    let mut data = match name {
        "heat" => ProblemData::new(name, domain.clone(), Arc::new(LinearDiffusion), bump, horizon),
        "heat-source" => {
            let phi = SinePotential {
                lengths: lengths.clone(),
                amplitude: opts.source_amplitude.unwrap_or(1.0),
            };
            ProblemData::new(name, domain.clone(), Arc::new(LinearDiffusion), bump.scaled(0.0), horizon)
                .with_source(Arc::new(phi))
        }
        "variable-diffusion" => {
            let beta = opts.beta.unwrap_or(1.5 * alpha);
            check_constants(alpha, beta)?;
            let init = GridFunction::from_fn(domain, |x| {
                2.0 * sine_bump(domain, x) * (1.0 + 0.5 * x[0] / lengths[0])
            });
            ProblemData::new(
                name,
                domain.clone(),
                Arc::new(VariableDiffusion {
                    alpha,
                    beta,
                    lengths: lengths.clone(),
                }),
                init,
                horizon,
            )
            .with_source(Arc::new(UniformLoad {
                lengths: lengths.clone(),
                amplitude: opts.source_amplitude.unwrap_or(-1.0),
            }))
        }
        "lipschitz-nonlinear" => {
            let beta = opts.beta.unwrap_or(2.0 * alpha);
            check_constants(alpha, beta)?;
            let init = GridFunction::from_fn(domain, |x| {
                4.0 * sine_bump(domain, x) * (PI * x[0] / lengths[0]).cos()
            });
            ProblemData::new(
                name,
                domain.clone(),
                Arc::new(TanhDiffusion { alpha, beta }),
                init,
                horizon,
            )
            .with_source(Arc::new(UniformLoad {
                lengths: lengths.clone(),
                amplitude: opts.source_amplitude.unwrap_or(-2.0),
            }))
        }
        "singular-drift" => {
            let drift: Arc<dyn DriftFlux> = match &opts.drift_samples {
                Some(samples) => Arc::new(SampledDrift::new(samples.clone(), domain.dim())?),
                None => {
                    let default_c = if domain.dim() >= 3 { 0.1 } else { 0.2 };
                    let center = match &opts.drift_center {
                        Some(c) if c.len() == domain.dim() => c.clone(),
                        Some(_) => {
                            return Err(Error::InvalidArgument(
                                "drift center has wrong dimension".into(),
                            ))
                        }
                        None => default_center(domain),
                    };
                    Arc::new(SingularDrift {
                        strength: opts.drift_strength.unwrap_or(default_c),
                        center,
                    })
                }
            };
            ProblemData::new(name, domain.clone(), Arc::new(LinearDiffusion), bump, horizon)
                .with_drift(drift)
                .with_source(Arc::new(UniformLoad {
                    lengths: lengths.clone(),
                    amplitude: opts.source_amplitude.unwrap_or(-0.5),
                }))
        }
        "manufactured" => {
            let exact = ManufacturedSolution {
                lengths: lengths.clone(),
            };
            let init = GridFunction::from_fn(domain, |x| exact.value(x, 0.0));
            let exact = Arc::new(exact);
            let mut d = ProblemData::new(name, domain.clone(), Arc::new(LinearDiffusion), init, horizon)
                .with_source(Arc::new(ManufacturedSource(exact.clone())));
            d.exact = Some(exact);
            d
        }
        other => {
            return Err(Error::InvalidArgument(format!(
                "unknown model '{other}' (known: {})",
                BUILTIN_MODELS.join(", ")
            )))
        }
    };
    data.name = name.to_string();
    Ok(data)
}

fn check_constants(alpha: f64, beta: f64) -> Result<()> {
    if !(alpha > 0.0 && beta >= alpha) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < alpha <= beta (got {alpha}, {beta})"
        )));
    }
    Ok(())
}

/// Cell center nearest the middle of the box.
pub fn default_center(domain: &BoxDomain) -> Vec<f64> {
    (0..domain.dim())
        .map(|a| {
            let n = domain.cells()[a];
            ((n / 2) as f64 - 0.5) * domain.h(a)
        })
        .collect()
}

/// `A(η) = η`
#[derive(Debug)]
pub struct LinearDiffusion;

impl DiffusionFlux for LinearDiffusion {
    fn component(&self, _: usize, _: &[f64], _: f64, eta: f64) -> f64 {
        eta
    }
    fn derivative(&self, _: usize, _: &[f64], _: f64, _: f64) -> f64 {
        1.0
    }
    fn alpha(&self) -> f64 {
        1.0
    }
    fn beta(&self) -> f64 {
        1.0
    }
}

/// `A(x, η) = a(x) η` with `a = α + (β - α) ∏ sin²(π x_i / L_i)`.
#[derive(Debug)]
pub struct VariableDiffusion {
    pub alpha: f64,
    pub beta: f64,
    pub lengths: Vec<f64>,
}

impl VariableDiffusion {
    fn coefficient(&self, x: &[f64]) -> f64 {
        let s: f64 = x
            .iter()
            .zip(&self.lengths)
            .map(|(xi, li)| (PI * xi / li).sin().powi(2))
            .product();
        self.alpha + (self.beta - self.alpha) * s
    }
}

impl DiffusionFlux for VariableDiffusion {
    fn component(&self, _: usize, x: &[f64], _: f64, eta: f64) -> f64 {
        self.coefficient(x) * eta
    }
    fn derivative(&self, _: usize, x: &[f64], _: f64, _: f64) -> f64 {
        self.coefficient(x)
    }
    fn alpha(&self) -> f64 {
        self.alpha
    }
    fn beta(&self) -> f64 {
        self.beta
    }
}

/// `A_i(η) = α η_i + (β - α) tanh(η_i)`
#[derive(Debug)]
pub struct TanhDiffusion {
    pub alpha: f64,
    pub beta: f64,
}

impl DiffusionFlux for TanhDiffusion {
    fn component(&self, _: usize, _: &[f64], _: f64, eta: f64) -> f64 {
        self.alpha * eta + (self.beta - self.alpha) * eta.tanh()
    }
    fn derivative(&self, _: usize, _: &[f64], _: f64, eta: f64) -> f64 {
        let c = eta.cosh();
        self.alpha + (self.beta - self.alpha) / (c * c)
    }
    fn alpha(&self) -> f64 {
        self.alpha
    }
    fn beta(&self) -> f64 {
        self.beta
    }
}

/// `B(x, z) = z b(x) e(x)` with `b = c / |x - x₀|` and `e` the unit field
/// circulating around the line through `x₀` parallel to the last axis
/// (`e = 1` in one dimension).
#[derive(Debug)]
pub struct SingularDrift {
    pub strength: f64,
    pub center: Vec<f64>,
}

impl SingularDrift {
    fn direction(&self, axis: usize, x: &[f64]) -> f64 {
        if x.len() == 1 {
            return 1.0;
        }
        let dx = x[0] - self.center[0];
        let dy = x[1] - self.center[1];
        let rho = dx.hypot(dy);
        if rho < 1e-300 {
            return if axis == 0 { 1.0 } else { 0.0 };
        }
        match axis {
            0 => -dy / rho,
            1 => dx / rho,
            _ => 0.0,
        }
    }

    /// Continuum value of `‖b - T_M b‖_{N,∞}` whenever `{b > M}` lies
    /// inside the box: `c ω_N^{1/N}`, independent of `M`.
    pub fn continuum_remainder_norm(&self) -> f64 {
        let n = self.center.len();
        self.strength * crate::lorentz::unit_ball_volume(n).powf(1.0 / n as f64)
    }
}

impl DriftFlux for SingularDrift {
    fn coefficient(&self, x: &[f64], _: f64) -> f64 {
        let r = x
            .iter()
            .zip(&self.center)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        self.strength / r
    }
    fn component(&self, axis: usize, x: &[f64], t: f64, z: f64) -> f64 {
        z * self.coefficient(x, t) * self.direction(axis, x)
    }
    fn dz(&self, axis: usize, x: &[f64], t: f64, _: f64) -> f64 {
        self.coefficient(x, t) * self.direction(axis, x)
    }
}

/// Drift coefficient read from node samples (multilinear interpolation,
/// zero on the boundary) acting along the first axis.
#[derive(Debug)]
pub struct SampledDrift {
    samples: GridFunction,
}

impl SampledDrift {
    pub fn new(samples: GridFunction, dim: usize) -> Result<Self> {
        if samples.domain().dim() != dim {
            return Err(Error::InvalidArgument(
                "drift samples have wrong dimension".into(),
            ));
        }
        if samples.values().iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "drift coefficient must be finite and nonnegative".into(),
            ));
        }
        Ok(Self { samples })
    }

    fn interpolate(&self, x: &[f64]) -> f64 {
        let d = self.samples.domain();
        let dim = d.dim();
        let shape = d.interior_shape();
        let mut base = [0isize; 3];
        let mut frac = [0.0; 3];
        for a in 0..dim {
            let s = (x[a] / d.h(a)).clamp(0.0, d.cells()[a] as f64);
            let i = s.floor().min(d.cells()[a] as f64 - 1.0);
            base[a] = i as isize;
            frac[a] = s - i;
        }
        let node = |idx: &[isize; 3]| -> f64 {
            // node index j ↔ interior index j - 1
            let mut flat = 0usize;
            for a in 0..dim {
                let j = idx[a] - 1;
                if j < 0 || j as usize >= shape[a] {
                    return 0.0;
                }
                flat = flat * shape[a] + j as usize;
            }
            self.samples.values()[flat]
        };
        let mut acc = 0.0;
        for corner in 0..(1usize << dim) {
            let mut idx = base;
            let mut w = 1.0;
            for a in 0..dim {
                if corner >> a & 1 == 1 {
                    idx[a] += 1;
                    w *= frac[a];
                } else {
                    w *= 1.0 - frac[a];
                }
            }
            if w != 0.0 {
                acc += w * node(&idx);
            }
        }
        acc
    }
}

impl DriftFlux for SampledDrift {
    fn coefficient(&self, x: &[f64], _: f64) -> f64 {
        self.interpolate(x)
    }
    fn component(&self, axis: usize, x: &[f64], t: f64, z: f64) -> f64 {
        if axis == 0 {
            z * self.coefficient(x, t)
        } else {
            0.0
        }
    }
    fn dz(&self, axis: usize, x: &[f64], t: f64, _: f64) -> f64 {
        if axis == 0 {
            self.coefficient(x, t)
        } else {
            0.0
        }
    }
}

/// `F = amplitude · (x - center) / L` per axis, so `-div F` is the constant
/// `-amplitude Σ 1/L_i`.
#[derive(Debug)]
pub struct UniformLoad {
    pub lengths: Vec<f64>,
    pub amplitude: f64,
}

impl SourceField for UniformLoad {
    fn component(&self, axis: usize, x: &[f64], _: f64) -> f64 {
        let l = self.lengths[axis];
        self.amplitude * (x[axis] - 0.5 * l) / l
    }
}

/// `F = ∇Φ` with `Φ = amplitude ∏ sin(π x_i / L_i)`; for the heat flux the
/// steady state is `Φ` itself.
#[derive(Debug)]
pub struct SinePotential {
    pub lengths: Vec<f64>,
    pub amplitude: f64,
}

impl SinePotential {
    pub fn value(&self, x: &[f64]) -> f64 {
        self.amplitude
            * x.iter()
                .zip(&self.lengths)
                .map(|(xi, li)| (PI * xi / li).sin())
                .product::<f64>()
    }
}

impl SourceField for SinePotential {
    fn component(&self, axis: usize, x: &[f64], _: f64) -> f64 {
        self.amplitude * sine_gradient(&self.lengths, axis, x)
    }
}

fn sine_gradient(lengths: &[f64], axis: usize, x: &[f64]) -> f64 {
    x.iter()
        .zip(lengths)
        .enumerate()
        .map(|(a, (xi, li))| {
            if a == axis {
                PI / li * (PI * xi / li).cos()
            } else {
                (PI * xi / li).sin()
            }
        })
        .product()
}

/// Exact solution `u = e^{-t} ∏ sin(π x_i / L_i)` of the heat equation
/// driven by `F = ∇Φ`, `Φ = (k - 1)/k · u`, `k = Σ π²/L_i²`.
#[derive(Debug)]
pub struct ManufacturedSolution {
    pub lengths: Vec<f64>,
}

impl ManufacturedSolution {
    pub fn eigenvalue(&self) -> f64 {
        self.lengths.iter().map(|l| PI * PI / (l * l)).sum()
    }

    pub fn value(&self, x: &[f64], t: f64) -> f64 {
        (-t).exp()
            * x.iter()
                .zip(&self.lengths)
                .map(|(xi, li)| (PI * xi / li).sin())
                .product::<f64>()
    }

    pub fn time_derivative(&self, x: &[f64], t: f64) -> f64 {
        -self.value(x, t)
    }

    pub fn gradient(&self, axis: usize, x: &[f64], t: f64) -> f64 {
        (-t).exp() * sine_gradient(&self.lengths, axis, x)
    }

    pub fn source(&self, axis: usize, x: &[f64], t: f64) -> f64 {
        let k = self.eigenvalue();
        (k - 1.0) / k * self.gradient(axis, x, t)
    }
}

#[derive(Debug)]
struct ManufacturedSource(Arc<ManufacturedSolution>);

impl SourceField for ManufacturedSource {
    fn component(&self, axis: usize, x: &[f64], t: f64) -> f64 {
        self.0.source(axis, x, t)
    }
    fn is_autonomous(&self) -> bool {
        false
    }
}
