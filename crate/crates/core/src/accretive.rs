//! The truncated operator `Ã_M(t) u = -div[A(∇u) + (1 - θ_M) B(u)]` on the
//! face-staggered grid, and solvers for `σ u + λ Ã u = g`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::grid::{divergence, gradient, inner, inner_vec, BoxDomain, GridFunction, VectorField};
use crate::linalg::bicgstab;
use crate::models::{DiffusionFlux, DriftFlux, FaceGeometry, ProblemData};
use crate::spectral::DirichletSpectral;

#[derive(Clone, Debug)]
pub struct TruncatedOperator {
    domain: BoxDomain,
    diffusion: Arc<dyn DiffusionFlux>,
    drift: Option<Arc<dyn DriftFlux>>,
    geometry: Arc<FaceGeometry>,
    level: Option<f64>,
    time: f64,
    /// `1 - θ_M` per axis and face (all ones without truncation).
    remainder: Vec<Vec<f64>>,
    /// `b` per axis and face (zeros without drift).
    coefficient: Vec<Vec<f64>>,
}

impl TruncatedOperator {
    /// `level = None` keeps the full drift inside the operator.
    pub fn new(problem: &ProblemData, level: Option<f64>, time: f64) -> Result<Self> {
        if let Some(m) = level {
            if !(m > 0.0) {
                return Err(Error::InvalidArgument(format!("truncation level {m} must be positive")));
            }
        }
        let coefficient = problem.drift_coefficient_faces(time);
        let remainder = match (&problem.drift, level) {
            (Some(_), Some(m)) => coefficient
                .iter()
                .map(|bs| {
                    bs.iter()
                        .map(|b| 1.0 - crate::models::truncation::weight(*b, m))
                        .collect()
                })
                .collect(),
            _ => (0..problem.domain.dim())
                .map(|a| vec![1.0; problem.domain.face_count(a)])
                .collect(),
        };
        Ok(Self {
            domain: problem.domain.clone(),
            diffusion: problem.diffusion.clone(),
            drift: problem.drift.clone(),
            geometry: problem.geometry.clone(),
            level,
            time,
            remainder,
            coefficient,
        })
    }

    /// Node-wise coupling constants `(L_r, L_θ)` of the implicit and
    /// explicit drift parts: `‖(1-θ)(B(u) - B(v))‖ ≤ L_r ‖u - v‖` and
    /// `‖θ(B(u) - B(v))‖ ≤ L_θ ‖u - v‖`, from
    /// `L² = max_node Σ_{adjacent faces} g_f² / 2`.
    pub fn coupling_constants(&self) -> (f64, f64) {
        if self.drift.is_none() {
            return (0.0, 0.0);
        }
        let d = &self.domain;
        let explicit = self.level.is_some();
        let per_node = |i: usize| -> (f64, f64) {
            let (mut r, mut e) = (0.0, 0.0);
            for a in 0..d.dim() {
                let (fl, fr) = d.node_faces(a, i);
                for f in [fl, fr] {
                    let b = self.coefficient[a][f];
                    let rem = self.remainder[a][f];
                    r += 0.5 * (rem * b).powi(2);
                    if explicit {
                        e += 0.5 * ((1.0 - rem) * b).powi(2);
                    }
                }
            }
            (r, e)
        };
        let (r, e) = (0..d.node_count())
            .map(per_node)
            .fold((0.0f64, 0.0f64), |(a, b), (r, e)| (a.max(r), b.max(e)));
        (r.sqrt(), e.sqrt())
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn level(&self) -> Option<f64> {
        self.level
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn alpha(&self) -> f64 {
        self.diffusion.alpha()
    }

    pub fn beta(&self) -> f64 {
        self.diffusion.beta()
    }

    pub fn has_drift(&self) -> bool {
        self.drift.is_some()
    }

    /// `1 - θ_M` on the faces of `axis`.
    pub fn remainder(&self, axis: usize) -> &[f64] {
        &self.remainder[axis]
    }

    /// Evaluates `per_face(axis, face, x, grad, mean)` on every face, where
    /// `grad` and `mean` are the difference quotient and average of `u`
    /// across the face.
    fn face_map<F>(&self, u: &GridFunction, per_face: F) -> VectorField
    where
        F: Fn(usize, usize, &[f64], f64, f64) -> f64 + Sync + Send,
    {
        let d = &self.domain;
        let dim = d.dim();
        let vals = u.values();
        let components = (0..dim)
            .map(|a| {
                let inv_h = 1.0 / d.h(a);
                let pos = &self.geometry.positions[a];
                let mut out = vec![0.0; d.face_count(a)];
                exec::fill_indexed(&mut out, |f| {
                    let (l, r) = d.face_neighbours(a, f);
                    let ul = l.map_or(0.0, |i| vals[i]);
                    let ur = r.map_or(0.0, |i| vals[i]);
                    per_face(a, f, &pos[f][..dim], (ur - ul) * inv_h, 0.5 * (ul + ur))
                });
                out
            })
            .collect();
        VectorField::from_components(d, components).expect("face layout")
    }

    /// `A(∇u) + (1 - θ_M) B(ū)` on the faces.
    pub fn flux(&self, u: &GridFunction) -> VectorField {
        let t = self.time;
        match &self.drift {
            None => self.face_map(u, |a, _, x, g, _| self.diffusion.component(a, x, t, g)),
            Some(b) => self.face_map(u, |a, f, x, g, m| {
                let rem = self.remainder[a][f];
                let drift = if rem == 0.0 { 0.0 } else { rem * b.component(a, x, t, m) };
                self.diffusion.component(a, x, t, g) + drift
            }),
        }
    }

    /// `θ_M B(ū)` on the faces: the part of the drift left out of the
    /// operator. Zero without truncation.
    pub fn explicit_drift_flux(&self, u: &GridFunction) -> VectorField {
        let t = self.time;
        match (&self.drift, self.level) {
            (Some(b), Some(_)) => self.face_map(u, |a, f, x, _, m| {
                (1.0 - self.remainder[a][f]) * b.component(a, x, t, m)
            }),
            _ => VectorField::zeros(&self.domain),
        }
    }

    pub fn apply(&self, u: &GridFunction) -> GridFunction {
        divergence(&self.flux(u)).scaled(-1.0)
    }

    /// `⟨Ã u, v⟩` evaluated as `∫ flux(u) · ∇v`.
    pub fn pairing(&self, u: &GridFunction, v: &GridFunction) -> Result<f64> {
        inner_vec(&self.flux(u), &gradient(v))
    }

    /// `⟨Ãu - Ãv, u - v⟩ - (α/2)‖∇(u - v)‖²`
    pub fn accretivity_margin(&self, u: &GridFunction, v: &GridFunction) -> Result<f64> {
        let w = u.sub(v);
        let dq = self.flux(u).add_scaled(-1.0, &self.flux(v));
        let gw = gradient(&w);
        Ok(inner_vec(&dq, &gw)? - 0.5 * self.alpha() * inner_vec(&gw, &gw)?)
    }

    /// Directional derivative `Ã'(u) w`.
    pub fn linearized(&self, u: &GridFunction, w: &GridFunction) -> GridFunction {
        let t = self.time;
        let du = self.face_map(u, |a, _, x, g, _| self.diffusion.derivative(a, x, t, g));
        let dz = self.drift.as_ref().map(|b| self.face_map(u, |a, f, x, _, m| self.remainder[a][f] * b.dz(a, x, t, m)));
        let d = &self.domain;
        let dim = d.dim();
        let wv = w.values();
        let components = (0..dim)
            .map(|a| {
                let inv_h = 1.0 / d.h(a);
                let da = du.component(a);
                let db = dz.as_ref().map(|q| q.component(a));
                let mut out = vec![0.0; d.face_count(a)];
                exec::fill_indexed(&mut out, |f| {
                    let (l, r) = d.face_neighbours(a, f);
                    let wl = l.map_or(0.0, |i| wv[i]);
                    let wr = r.map_or(0.0, |i| wv[i]);
                    let mut s = da[f] * (wr - wl) * inv_h;
                    if let Some(db) = db {
                        s += db[f] * 0.5 * (wl + wr);
                    }
                    s
                });
                out
            })
            .collect();
        divergence(&VectorField::from_components(d, components).expect("face layout")).scaled(-1.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverMethod {
    DampedPicard,
    Newton,
}

impl std::str::FromStr for SolverMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "damped-picard" | "picard" => Ok(Self::DampedPicard),
            "newton" => Ok(Self::Newton),
            _ => Err(Error::InvalidArgument(format!("unknown solver method '{s}'"))),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ResolventConfig {
    pub lambda: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub method: SolverMethod,
    /// Picard step length `ρ`.
    pub relaxation: f64,
}

impl Default for ResolventConfig {
    fn default() -> Self {
        Self {
            lambda: 1e-2,
            tol: 1e-10,
            max_iter: 500,
            method: SolverMethod::DampedPicard,
            relaxation: 1.0,
        }
    }
}

impl ResolventConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) {
            return Err(Error::InvalidArgument(format!("lambda must be positive (got {})", self.lambda)));
        }
        if !(self.tol > 0.0) || self.max_iter == 0 {
            return Err(Error::InvalidArgument("need tol > 0 and max_iter >= 1".into()));
        }
        if !(self.relaxation > 0.0 && self.relaxation <= 1.0) {
            return Err(Error::InvalidArgument("relaxation must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SolverDiagnostics {
    pub method: SolverMethod,
    pub iterations: usize,
    /// Final residual in the norm used by the stopping rule.
    pub residual: f64,
    pub history: Vec<f64>,
    pub final_relaxation: f64,
}

#[derive(Clone, Debug)]
pub struct Resolution {
    pub solution: GridFunction,
    pub diagnostics: SolverDiagnostics,
}

/// Reusable solver for `σ u + λ Ã u = g` on one grid. The preconditioner
/// is `K = σ I + λ κ (-Δ_h)` with `κ = (α + β)/2`, inverted exactly by sine
/// transforms.
pub struct Resolvent {
    spectral: DirichletSpectral,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum StopNorm {
    /// `‖r‖_{L²} ≤ tol`, or `≤ tol (1 + ‖g‖)` once progress stalls.
    L2,
    /// `sqrt⟨r, (-Δ_h)^{-1} r⟩ ≤ tol (1 + ‖g‖_{-1})`
    Dual,
}

const MAX_BACKTRACK: usize = 30;

impl Resolvent {
    pub fn new(domain: &BoxDomain) -> Self {
        Self {
            spectral: DirichletSpectral::new(domain),
        }
    }

    pub fn spectral(&self) -> &DirichletSpectral {
        &self.spectral
    }

    /// `(I + λ Ã) u = g`
    pub fn resolve(
        &self,
        op: &TruncatedOperator,
        g: &GridFunction,
        cfg: &ResolventConfig,
        guess: Option<&GridFunction>,
    ) -> Result<Resolution> {
        cfg.validate()?;
        self.solve(op, 1.0, g, cfg, guess, StopNorm::L2)
    }

    /// `Ã u = g`; `cfg.lambda` is ignored.
    pub fn steady(
        &self,
        op: &TruncatedOperator,
        g: &GridFunction,
        cfg: &ResolventConfig,
        guess: Option<&GridFunction>,
    ) -> Result<Resolution> {
        let cfg = ResolventConfig { lambda: 1.0, ..cfg.clone() };
        cfg.validate()?;
        self.solve(op, 0.0, g, &cfg, guess, StopNorm::Dual)
    }

    fn solve(
        &self,
        op: &TruncatedOperator,
        sigma: f64,
        g: &GridFunction,
        cfg: &ResolventConfig,
        guess: Option<&GridFunction>,
        stop: StopNorm,
    ) -> Result<Resolution> {
        if op.domain() != g.domain() {
            return Err(Error::DomainMismatch);
        }
        let lambda = cfg.lambda;
        let kappa = lambda * 0.5 * (op.alpha() + op.beta());
        let precond = |r: &GridFunction| self.spectral.solve(sigma, kappa, r);
        let residual = |u: &GridFunction| -> GridFunction {
            op.apply(u).scaled(lambda).add_scaled(sigma, u).sub(g)
        };
        // energy of r in the K^{-1} metric, plus the stopping-rule norm
        let measure = |r: &GridFunction, kr: &GridFunction| -> (f64, f64) {
            let e = inner(r, kr).expect("same grid").max(0.0).sqrt();
            let s = match stop {
                StopNorm::L2 => r.norm(),
                StopNorm::Dual => e * kappa.sqrt(),
            };
            (e, s)
        };
        let g_scale = match stop {
            StopNorm::L2 => g.norm(),
            StopNorm::Dual => {
                let kg = self.spectral.solve(0.0, 1.0, g);
                inner(g, &kg)?.max(0.0).sqrt()
            }
        };
        let loose = cfg.tol * (1.0 + g_scale);
        let strict = match stop {
            StopNorm::L2 => cfg.tol,
            StopNorm::Dual => loose,
        };
        let mut u = match guess {
            Some(u0) => u0.clone(),
            None if sigma > 0.0 => g.scaled(1.0 / sigma),
            None => precond(g),
        };
        let mut r = residual(&u);
        let mut kr = precond(&r);
        let (mut energy, mut size) = measure(&r, &kr);
        let mut history = vec![size];
        let mut rho = cfg.relaxation;
        let mut successes = 0usize;
        let mut stalls = 0usize;
        for it in 1..=cfg.max_iter {
            if size <= strict || (size <= loose && stalls >= 3) {
                return Ok(Resolution {
                    solution: u,
                    diagnostics: SolverDiagnostics {
                        method: cfg.method,
                        iterations: it - 1,
                        residual: size,
                        history,
                        final_relaxation: rho,
                    },
                });
            }
            let direction = match cfg.method {
                SolverMethod::DampedPicard => kr.clone(),
                SolverMethod::Newton => {
                    let n = u.len();
                    let dom = u.domain().clone();
                    let outcome = bicgstab(
                        |w| {
                            let w = GridFunction::from_values(&dom, w.to_vec()).expect("shape");
                            op.linearized(&u, &w).scaled(lambda).add_scaled(sigma, &w).into_values()
                        },
                        |w| {
                            let w = GridFunction::from_values(&dom, w.to_vec()).expect("shape");
                            precond(&w).into_values()
                        },
                        r.values(),
                        1e-8,
                        4 * n.max(50),
                    );
                    match outcome {
                        Ok(o) => GridFunction::from_values(&dom, o.solution)?,
                        Err(_) => kr.clone(),
                    }
                }
            };
            let mut accepted = false;
            let mut step = rho;
            for _ in 0..MAX_BACKTRACK {
                let trial = u.add_scaled(-step, &direction);
                let rt = residual(&trial);
                let krt = precond(&rt);
                let (et, st) = measure(&rt, &krt);
                if et.is_finite() && et < energy {
                    stalls = if st > 0.9 * size { stalls + 1 } else { 0 };
                    u = trial;
                    r = rt;
                    kr = krt;
                    energy = et;
                    size = st;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                // no decrease possible at this precision
                stalls += 1;
                history.push(size);
                if size <= loose {
                    continue;
                }
                return Err(Error::NonConvergence {
                    solver: "resolvent",
                    iterations: it,
                    residual: size,
                    history,
                });
            }
            history.push(size);
            if cfg.method == SolverMethod::DampedPicard {
                if step < rho {
                    rho = step;
                    successes = 0;
                } else {
                    successes += 1;
                    if successes >= 3 && rho < cfg.relaxation {
                        rho = (2.0 * rho).min(cfg.relaxation);
                        successes = 0;
                    }
                }
            }
        }
        if size <= loose {
            return Ok(Resolution {
                solution: u,
                diagnostics: SolverDiagnostics {
                    method: cfg.method,
                    iterations: cfg.max_iter,
                    residual: size,
                    history,
                    final_relaxation: rho,
                },
            });
        }
        Err(Error::NonConvergence {
            solver: "resolvent",
            iterations: cfg.max_iter,
            residual: size,
            history,
        })
    }
}

/// One-shot `(I + λ Ã) u = g`.
pub fn resolve(op: &TruncatedOperator, g: &GridFunction, cfg: &ResolventConfig) -> Result<Resolution> {
    Resolvent::new(op.domain()).resolve(op, g, cfg, None)
}
