//! Problem data: diffusion flux `A`, drift flux `B` with coefficient `b`,
//! source field `F`, initial state and horizon.
//!
//! Diffusion fluxes are axis-separable (`A_i` depends on `η_i` only), which
//! lets the face-staggered discretization inherit strong monotonicity and
//! the Lipschitz bound face by face.

mod catalog;
mod hypotheses;
pub(crate) mod truncation;

pub use catalog::{
    build_model, builtin_models, default_center, LinearDiffusion, ManufacturedSolution, ModelOptions, SampledDrift,
    SinePotential, SingularDrift, TanhDiffusion, UniformLoad, VariableDiffusion, BUILTIN_MODELS,
};
pub use hypotheses::{verify_hypotheses, HypothesisReport};
pub use truncation::{
    certify_on_ladder, certify_truncation, truncation_weight, LadderCertificate, TruncationCertificate,
    TruncationPlan,
};

use std::fmt::Debug;
use std::sync::Arc;

use crate::grid::{BoxDomain, GridFunction, VectorField};

pub trait DiffusionFlux: Send + Sync + Debug {
    /// `A_axis(x, t, η)` where `eta` is the `axis` component of `η`.
    fn component(&self, axis: usize, x: &[f64], t: f64, eta: f64) -> f64;

    /// `∂A_axis / ∂η_axis`
    fn derivative(&self, axis: usize, x: &[f64], t: f64, eta: f64) -> f64;

    /// Strong monotonicity constant.
    fn alpha(&self) -> f64;

    /// Lipschitz / growth constant.
    fn beta(&self) -> f64;

    /// Additive growth term `g(x, t)`.
    fn growth_offset(&self, _x: &[f64], _t: f64) -> f64 {
        0.0
    }

    fn evaluate(&self, x: &[f64], t: f64, eta: &[f64]) -> Vec<f64> {
        eta.iter()
            .enumerate()
            .map(|(a, e)| self.component(a, x, t, *e))
            .collect()
    }
}

pub trait DriftFlux: Send + Sync + Debug {
    /// Lipschitz coefficient `b(x, t) ≥ 0`.
    fn coefficient(&self, x: &[f64], t: f64) -> f64;

    /// `B_axis(x, t, z)`
    fn component(&self, axis: usize, x: &[f64], t: f64, z: f64) -> f64;

    /// `∂B_axis / ∂z`
    fn dz(&self, axis: usize, x: &[f64], t: f64, z: f64) -> f64;

    fn is_autonomous(&self) -> bool {
        true
    }

    fn evaluate(&self, x: &[f64], t: f64, z: f64) -> Vec<f64> {
        (0..x.len()).map(|a| self.component(a, x, t, z)).collect()
    }
}

pub trait SourceField: Send + Sync + Debug {
    /// `F_axis(x, t)`
    fn component(&self, axis: usize, x: &[f64], t: f64) -> f64;

    fn is_autonomous(&self) -> bool {
        true
    }
}

/// Face positions per axis, computed once per domain.
#[derive(Debug)]
pub struct FaceGeometry {
    pub positions: Vec<Vec<[f64; 3]>>,
}

impl FaceGeometry {
    pub fn new(domain: &BoxDomain) -> Self {
        Self {
            positions: (0..domain.dim())
                .map(|a| {
                    (0..domain.face_count(a))
                        .map(|f| domain.face_position(a, f))
                        .collect()
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ProblemData {
    pub name: String,
    pub domain: BoxDomain,
    pub diffusion: Arc<dyn DiffusionFlux>,
    pub drift: Option<Arc<dyn DriftFlux>>,
    pub source: Option<Arc<dyn SourceField>>,
    pub initial: GridFunction,
    pub horizon: f64,
    pub exact: Option<Arc<ManufacturedSolution>>,
    pub geometry: Arc<FaceGeometry>,
}

impl ProblemData {
    pub fn new(
        name: impl Into<String>,
        domain: BoxDomain,
        diffusion: Arc<dyn DiffusionFlux>,
        initial: GridFunction,
        horizon: f64,
    ) -> Self {
        let geometry = Arc::new(FaceGeometry::new(&domain));
        Self {
            name: name.into(),
            domain,
            diffusion,
            drift: None,
            source: None,
            initial,
            horizon,
            exact: None,
            geometry,
        }
    }

    pub fn with_drift(mut self, drift: Arc<dyn DriftFlux>) -> Self {
        self.drift = Some(drift);
        self
    }

    pub fn with_source(mut self, source: Arc<dyn SourceField>) -> Self {
        self.source = Some(source);
        self
    }

    pub fn with_initial(mut self, initial: GridFunction) -> Self {
        self.initial = initial;
        self
    }

    pub fn with_horizon(mut self, horizon: f64) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn alpha(&self) -> f64 {
        self.diffusion.alpha()
    }

    pub fn beta(&self) -> f64 {
        self.diffusion.beta()
    }

    pub fn is_autonomous(&self) -> bool {
        self.drift.as_ref().is_none_or(|d| d.is_autonomous())
            && self.source.as_ref().is_none_or(|s| s.is_autonomous())
    }

    /// `F(·, t)` on the faces.
    pub fn source_field(&self, t: f64) -> VectorField {
        let dim = self.domain.dim();
        match &self.source {
            None => VectorField::zeros(&self.domain),
            Some(src) => {
                let comps = (0..dim)
                    .map(|a| {
                        self.geometry.positions[a]
                            .iter()
                            .map(|x| src.component(a, &x[..dim], t))
                            .collect()
                    })
                    .collect();
                VectorField::from_components(&self.domain, comps).expect("face layout")
            }
        }
    }

    /// `b(·, t)` at the interior nodes (zero without drift).
    pub fn drift_coefficient(&self, t: f64) -> GridFunction {
        match &self.drift {
            None => GridFunction::zeros(&self.domain),
            Some(d) => GridFunction::from_fn(&self.domain, |x| d.coefficient(x, t)),
        }
    }

    /// `b(·, t)` on the faces of each axis.
    pub fn drift_coefficient_faces(&self, t: f64) -> Vec<Vec<f64>> {
        let dim = self.domain.dim();
        match &self.drift {
            None => (0..dim).map(|a| vec![0.0; self.domain.face_count(a)]).collect(),
            Some(d) => (0..dim)
                .map(|a| {
                    self.geometry.positions[a]
                        .iter()
                        .map(|x| d.coefficient(&x[..dim], t))
                        .collect()
                })
                .collect(),
        }
    }

    /// Largest sampled drift coefficient over nodes and faces at `t`.
    pub fn max_sampled_drift(&self, t: f64) -> f64 {
        let faces = self
            .drift_coefficient_faces(t)
            .iter()
            .flatten()
            .fold(0.0f64, |m, v| m.max(*v));
        faces.max(self.drift_coefficient(t).max_abs())
    }

    /// Same data on another grid; the initial state is resampled when it
    /// has a closed form, otherwise reset to zero.
    pub fn on_domain(&self, domain: &BoxDomain, initial: GridFunction) -> Self {
        let mut out = self.clone();
        out.domain = domain.clone();
        out.geometry = Arc::new(FaceGeometry::new(domain));
        out.initial = initial;
        out
    }
}
