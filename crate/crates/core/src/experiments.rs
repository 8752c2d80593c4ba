//! Configuration-driven experiment runs with file outputs and a manifest.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::config::{Experiment, ExperimentConfig};
use crate::error::{Error, Result};
use crate::evolution::{continuation, evolve, uniqueness_harness, EvolutionConfig};
use crate::exec::Policy;
use crate::grid::{dirichlet_energy, write_grid_function, BoxDomain, GridFormat, GridFunction};
use crate::lorentz::{
    dist_to_bounded, lorentz_norm, sobolev_constant, sobolev_exponent, LorentzExponents,
};
use crate::models::{
    build_model, certify_on_ladder, certify_truncation, verify_hypotheses, SingularDrift, BUILTIN_MODELS,
};
use crate::steady::{decay_experiment, solve_steady, SteadyConfig};

#[derive(Clone, Debug, Serialize)]
pub struct Assertion {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct ManifestFile {
    pub path: String,
    /// `false` for files that were already in the directory.
    pub produced: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub experiment: Experiment,
    pub config: ExperimentConfig,
    pub seed: u64,
    pub code_version: String,
    pub wall_time_seconds: f64,
    pub files: Vec<ManifestFile>,
    pub assertions: Vec<Assertion>,
    pub warnings: Vec<String>,
    pub pass: bool,
}

pub const MANIFEST_NAME: &str = "manifest.json";

struct Outputs {
    dir: PathBuf,
    produced: Vec<String>,
    assertions: Vec<Assertion>,
    warnings: Vec<String>,
}

impl Outputs {
    fn path(&mut self, name: &str) -> PathBuf {
        self.produced.push(name.to_string());
        self.dir.join(name)
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let p = self.path(name);
        std::fs::write(p, serde_json::to_string_pretty(value)?)?;
        Ok(())
    }

    fn grid(&mut self, stem: &str, u: &GridFunction, fmt: GridFormat) -> Result<()> {
        let ext = match fmt {
            GridFormat::Csv => "csv",
            GridFormat::Binary => "bin",
        };
        let p = self.path(&format!("{stem}.{ext}"));
        write_grid_function(u, &p, fmt)
    }

    fn check(&mut self, name: &str, pass: bool, detail: impl Into<String>) {
        self.assertions.push(Assertion {
            name: name.to_string(),
            pass,
            detail: detail.into(),
        });
    }
}

/// Runs the configured experiment, writing outputs and `manifest.json` into
/// `cfg.output_dir`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunManifest> {
    let start = Instant::now();
    std::fs::create_dir_all(&cfg.output_dir)?;
    let mut out = Outputs {
        dir: cfg.output_dir.clone(),
        produced: Vec::new(),
        assertions: Vec::new(),
        warnings: Vec::new(),
    };
    match cfg.experiment {
        Experiment::Evolve => run_evolve(cfg, &mut out)?,
        Experiment::Continuation => run_continuation(cfg, &mut out)?,
        Experiment::Uniqueness => run_uniqueness(cfg, &mut out)?,
        Experiment::Steady => run_steady(cfg, &mut out)?,
        Experiment::Decay => run_decay(cfg, &mut out)?,
        Experiment::VerifyHypotheses => run_hypotheses(cfg, &mut out)?,
        Experiment::LorentzReport => run_lorentz(cfg, &mut out)?,
    }
    out.produced.push(MANIFEST_NAME.to_string());
    let mut files: Vec<ManifestFile> = out
        .produced
        .iter()
        .map(|p| ManifestFile {
            path: p.clone(),
            produced: true,
        })
        .collect();
    for entry in std::fs::read_dir(&cfg.output_dir)? {
        let name = entry?.file_name().to_string_lossy().into_owned();
        if !out.produced.contains(&name) {
            files.push(ManifestFile {
                path: name,
                produced: false,
            });
        }
    }
    let pass = out.assertions.iter().all(|a| a.pass);
    let manifest = RunManifest {
        experiment: cfg.experiment,
        config: cfg.clone(),
        seed: cfg.seed,
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        wall_time_seconds: start.elapsed().as_secs_f64(),
        files,
        assertions: out.assertions,
        warnings: out.warnings,
        pass,
    };
    std::fs::write(
        cfg.output_dir.join(MANIFEST_NAME),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    Ok(manifest)
}

fn random_state(domain: &BoxDomain, rng: &mut ChaCha8Rng, amplitude: f64) -> GridFunction {
    GridFunction::from_values(
        domain,
        (0..domain.node_count()).map(|_| amplitude * rng.gen_range(-1.0..1.0)).collect(),
    )
    .expect("node count")
}

fn run_evolve(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let data = cfg.problem()?;
    let evo = cfg.evolution();
    let run = evolve(&data, &evo)?;
    run.trace.save_csv(&out.path("trace.csv"))?;
    out.grid("final_state", &run.final_state, cfg.grid_format)?;
    out.warnings.extend(run.trace.warnings.iter().cloned());
    let exact_error = data.exact.as_ref().map(|e| {
        let u = GridFunction::from_fn(&data.domain, |x| e.value(x, evo.horizon));
        run.final_state.sub(&u).norm()
    });
    out.json(
        "evolve_report.json",
        &json!({
            "final_l2": run.final_state.norm(),
            "level": run.level,
            "energy_flags": run.trace.energy_flags,
            "trace_bound_constant": run.trace.trace_bound_constant(),
            "exact_error": exact_error,
            "warnings": run.trace.warnings,
        }),
    )?;
    out.check(
        "energy inequality",
        run.trace.energy_ok(),
        format!("{} flagged steps", run.trace.energy_flags.len()),
    );
    if let (Some(exact), true) = (&data.exact, cfg.refinements > 0) {
        let mut rows = String::from("tau,h,error\n");
        for k in 0..=cfg.refinements {
            let dt = evo.dt / 2f64.powi(k as i32);
            let sub = EvolutionConfig { dt, ..evo.clone() };
            let u = evolve(&data, &sub)?.final_state;
            let target = GridFunction::from_fn(&data.domain, |x| exact.value(x, evo.horizon));
            rows.push_str(&format!("{dt:.17e},{:.17e},{:.17e}\n", data.domain.h(0), u.sub(&target).norm()));
        }
        std::fs::write(out.path("convergence.csv"), rows)?;
    }
    Ok(())
}

fn run_continuation(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let data = cfg.problem()?;
    let report = continuation(&data, &cfg.evolution(), Policy::Parallel)?;
    for (k, level) in report.levels.iter().enumerate() {
        level.trace.save_csv(&out.path(&format!("trace_level{k}.csv")))?;
        out.check(
            &format!("energy inequality (level {k})"),
            level.trace.energy_ok(),
            format!("M = {}", level.level),
        );
    }
    out.warnings.extend(report.warnings.iter().cloned());
    out.json("continuation_report.json", &report)?;
    let detail = match report.saturation_index {
        Some(k) => format!("saturated at level {k}; differences {:?}", report.differences),
        None => format!(
            "plan never reaches max sampled b = {:.4e}",
            report.max_sampled_drift
        ),
    };
    out.check("continuation settles after saturation", report.settled, detail);
    Ok(())
}

fn run_uniqueness(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let data = cfg.problem()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let u0 = data.initial.clone();
    let v0 = u0.add_scaled(1.0, &random_state(&data.domain, &mut rng, cfg.perturbation));
    let report = uniqueness_harness(&data, &cfg.evolution(), &u0, &v0)?;
    let mut rows = String::from("t,distance\n");
    for (t, d) in report.times.iter().zip(&report.distances) {
        rows.push_str(&format!("{t:.17e},{d:.17e}\n"));
    }
    std::fs::write(out.path("uniqueness.csv"), rows)?;
    out.json("uniqueness_report.json", &report)?;
    out.check(
        "growth bound",
        report.bound_holds,
        format!(
            "C = {:.4e}, observed exponent {:.4e}",
            report.growth_constant, report.observed_exponent
        ),
    );
    if data.drift.is_none() {
        out.check("monotone contraction", report.monotone, "no drift");
    }
    Ok(())
}

fn run_steady(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let data = cfg.problem()?;
    let base = cfg.steady();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut solutions = Vec::new();
    let mut residuals = Vec::new();
    for k in 0..cfg.steady_guesses.max(1) {
        let guess = if k == 0 {
            None
        } else {
            Some(random_state(&data.domain, &mut rng, 1.0))
        };
        let s = solve_steady(
            &data,
            &SteadyConfig {
                initial_guess: guess,
                ..base.clone()
            },
        )?;
        residuals.push(s.diagnostics.residual);
        solutions.push(s.solution);
    }
    let mut spread = 0.0f64;
    for i in 0..solutions.len() {
        for j in i + 1..solutions.len() {
            spread = spread.max(solutions[i].sub(&solutions[j]).norm());
        }
    }
    out.grid("steady_state", &solutions[0], cfg.grid_format)?;
    out.json(
        "steady_report.json",
        &json!({
            "guesses": solutions.len(),
            "max_pairwise_distance": spread,
            "residuals": residuals,
            "l2_norm": solutions[0].norm(),
            "h1_seminorm": dirichlet_energy(&solutions[0]).sqrt(),
        }),
    )?;
    out.check("initial guesses agree", spread <= 1e-8, format!("max distance {spread:.3e}"));
    let worst = residuals.iter().fold(0.0f64, |m, r| m.max(*r));
    out.check(
        "steady residual",
        worst <= base.tol * 10.0,
        format!("max dual residual {worst:.3e}"),
    );
    Ok(())
}

fn run_decay(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let data = cfg.problem()?;
    let mut report = decay_experiment(&data, &cfg.evolution(), &cfg.steady())?;
    report.trace.save_csv(&out.path("trace.csv"))?;
    let y_path = out.path("y_series.csv");
    report.save_y_series(&y_path)?;
    report.y_series_path = Some("y_series.csv".into());
    out.warnings.extend(report.trace.warnings.iter().cloned());
    out.json("decay_report.json", &report)?;
    out.check(
        "energy inequality",
        report.trace.energy_ok(),
        format!("{} flagged steps", report.trace.energy_flags.len()),
    );
    if report.small_data_pass {
        let detail = match report.fitted_rate {
            Some(r) => format!("fitted {r:.4} vs ω = {:.4}", report.theoretical_omega),
            None => "saturated: u(t) reached u_∞ at machine precision".into(),
        };
        out.check("decay rate", report.rate_pass || report.saturated, detail);
        out.check(
            "lyapunov monotonicity",
            report.lyapunov_pass,
            format!("max excess {:.3e}", report.max_lyapunov_excess),
        );
    } else {
        out.warnings.push("small-data certificate fails; decay measured but not asserted".into());
    }
    Ok(())
}

fn run_hypotheses(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let names: Vec<&str> = if cfg.hypothesis_models == "all" {
        BUILTIN_MODELS.to_vec()
    } else {
        vec![cfg.hypothesis_models.as_str()]
    };
    let opts = cfg.model_options()?;
    let mut reports = Vec::new();
    for name in names {
        let data = build_model(name, &cfg.domain, cfg.horizon, &opts)?;
        let r = verify_hypotheses(&data, cfg.hypothesis_samples, cfg.seed, Policy::Parallel);
        out.check(
            &format!("hypotheses ({name})"),
            r.pass,
            format!(
                "monotonicity margin {:.3e}, lipschitz ratio {:.4}, drift ratio {:.4}",
                r.monotonicity_margin, r.lipschitz_ratio, r.drift_ratio
            ),
        );
        reports.push(r);
    }
    out.json("hypotheses_report.json", &reports)
}

fn run_lorentz(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let data = cfg.problem()?;
    let dim = data.domain.dim();
    let b = data.drift_coefficient(0.0);
    let levels = match &cfg.lorentz_levels {
        Some(l) => l.clone(),
        None => cfg.truncation.levels(&b)?,
    };
    let p = (dim as f64).max(2.0);
    let distances = dist_to_bounded(&b, p, &levels)?;
    let certificates = levels
        .iter()
        .map(|m| certify_truncation(std::slice::from_ref(&b), *m, data.alpha(), dim))
        .collect::<Result<Vec<_>>>()?;
    let monotone = distances.windows(2).all(|w| w[1] <= w[0]);
    out.check("distance to L∞ nonincreasing in M", monotone, format!("{distances:?}"));

    let ladder = if cfg.lorentz_ladder.is_empty() || data.drift.is_none() {
        None
    } else {
        let finest = *cfg.lorentz_ladder.iter().max().expect("nonempty");
        let center = cfg.model.drift_center.clone().unwrap_or_else(|| {
            let d = BoxDomain::new(data.domain.lengths().to_vec(), vec![finest; dim]).expect("valid");
            crate::models::default_center(&d)
        });
        let mut opts = cfg.model_options()?;
        opts.drift_center = Some(center.clone());
        let problems = cfg
            .lorentz_ladder
            .iter()
            .map(|n| {
                let d = BoxDomain::new(data.domain.lengths().to_vec(), vec![*n; dim])?;
                build_model(&cfg.model.name, &d, cfg.horizon, &opts)
            })
            .collect::<Result<Vec<_>>>()?;
        let continuum = match (&cfg.model.drift_file, cfg.model.name.as_str()) {
            (None, "singular-drift") => Some(
                SingularDrift {
                    strength: opts.drift_strength.unwrap_or(if dim >= 3 { 0.1 } else { 0.2 }),
                    center,
                }
                .continuum_remainder_norm(),
            ),
            _ => None,
        };
        Some(certify_on_ladder(&problems, levels[0], 0.0, continuum)?)
    };
    if let Some(l) = &ladder {
        if l.obstruction {
            out.warnings.push(format!(
                "distance-to-L∞ obstruction: ‖b - T_M b‖ stays above {:?} under refinement",
                l.threshold
            ));
        }
    }

    let sobolev = if dim >= 3 {
        let s = sobolev_constant(dim, 2.0)?;
        let e = LorentzExponents::new(sobolev_exponent(dim, 2.0)?, 2.0)?;
        let u = &data.initial;
        let lhs = lorentz_norm(u, e);
        let rhs = s * dirichlet_energy(u).sqrt();
        out.check(
            "Sobolev–Lorentz inequality on the initial state",
            lhs <= rhs * 1.05,
            format!("{lhs:.4e} ≤ {rhs:.4e}"),
        );
        Some(json!({"constant": s, "lhs": lhs, "rhs": rhs}))
    } else {
        None
    };
    out.json(
        "lorentz_report.json",
        &json!({
            "weak_norm": if dim >= 2 { Some(lorentz_norm(&b, LorentzExponents::weak(p)?)) } else { None },
            "levels": levels,
            "distance_to_bounded": distances,
            "certificates": certificates,
            "ladder": ladder,
            "sobolev": sobolev,
        }),
    )
}

/// Paths of the manifest-listed files, resolved against the output
/// directory.
pub fn manifest_paths(manifest: &RunManifest) -> BTreeMap<String, PathBuf> {
    manifest
        .files
        .iter()
        .map(|f| (f.path.clone(), manifest.config.output_dir.join(&f.path)))
        .collect()
}

pub fn is_solver_failure(e: &Error) -> bool {
    matches!(
        e,
        Error::NonConvergence { .. } | Error::EigenNonConvergence { .. } | Error::StepFailed { .. }
    )
}
