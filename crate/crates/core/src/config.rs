//! Experiment configuration.
//!
//! The grammar is line based:
//!
//! ```text
//! # comment            ; also a comment
//! experiment = decay   # top-level keys before any section
//! [domain]
//! dim = 2
//! cells = 32, 32       # lists are comma separated
//! ```
//!
//! A `[section]` header prefixes every following key with `section.`;
//! keys may themselves contain dots. Overrides use the full dotted key.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::accretive::{ResolventConfig, SolverMethod};
use crate::error::{Error, Result};
use crate::evolution::{EvolutionConfig, Splitting};
use crate::grid::{read_grid_function, BoxDomain, GridFormat};
use crate::models::{build_model, ModelOptions, ProblemData, TruncationPlan};
use crate::steady::SteadyConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Evolve,
    Continuation,
    Uniqueness,
    Steady,
    Decay,
    VerifyHypotheses,
    LorentzReport,
}

impl Experiment {
    pub const ALL: [&'static str; 7] = [
        "evolve",
        "continuation",
        "uniqueness",
        "steady",
        "decay",
        "verify-hypotheses",
        "lorentz-report",
    ];

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "evolve" => Self::Evolve,
            "continuation" => Self::Continuation,
            "uniqueness" => Self::Uniqueness,
            "steady" => Self::Steady,
            "decay" => Self::Decay,
            "verify-hypotheses" => Self::VerifyHypotheses,
            "lorentz-report" => Self::LorentzReport,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug)]
struct Entry {
    value: String,
    location: String,
}

/// Raw key/value table with source locations.
#[derive(Clone, Debug, Default)]
pub struct KeyValues {
    entries: BTreeMap<String, Entry>,
}

impl KeyValues {
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        let mut section = String::new();
        for (i, raw) in text.lines().enumerate() {
            let location = format!("{origin}:{}", i + 1);
            let line = strip_comment(raw).trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or_else(|| Error::Parse {
                    location: location.clone(),
                    message: "unterminated section header".into(),
                })?;
                let name = name.trim();
                if !valid_key(name) {
                    return Err(Error::Parse {
                        location,
                        message: format!("invalid section name '{name}'"),
                    });
                }
                section = name.to_string();
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                location: location.clone(),
                message: format!("expected 'key = value', found '{line}'"),
            })?;
            let key = key.trim();
            if !valid_key(key) {
                return Err(Error::Parse {
                    location,
                    message: format!("invalid key '{key}'"),
                });
            }
            let full = if section.is_empty() {
                key.to_string()
            } else {
                format!("{section}.{key}")
            };
            if entries.contains_key(&full) {
                return Err(Error::Parse {
                    location,
                    message: format!("duplicate key '{full}'"),
                });
            }
            entries.insert(
                full,
                Entry {
                    value: value.trim().to_string(),
                    location,
                },
            );
        }
        Ok(Self { entries })
    }

    /// Applies a `key=value` override.
    pub fn set_override(&mut self, spec: &str) -> Result<()> {
        let location = format!("--override {spec}");
        let (key, value) = spec.split_once('=').ok_or_else(|| Error::Parse {
            location: location.clone(),
            message: "expected key=value".into(),
        })?;
        let key = key.trim();
        if !valid_key(key) {
            return Err(Error::Parse {
                location,
                message: format!("invalid key '{key}'"),
            });
        }
        self.entries.insert(
            key.to_string(),
            Entry {
                value: value.trim().to_string(),
                location,
            },
        );
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn echo(&self) -> BTreeMap<String, String> {
        self.entries.iter().map(|(k, e)| (k.clone(), e.value.clone())).collect()
    }
}

fn strip_comment(line: &str) -> &str {
    match line.find(['#', ';']) {
        Some(i) => &line[..i],
        None => line,
    }
}

fn valid_key(k: &str) -> bool {
    !k.is_empty()
        && k.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
        && !k.starts_with('.')
        && !k.ends_with('.')
}

/// Typed reader that tracks which keys were consumed.
struct Reader<'a> {
    kv: &'a KeyValues,
    used: std::cell::RefCell<Vec<String>>,
}

impl<'a> Reader<'a> {
    fn raw(&self, key: &str) -> Option<&'a Entry> {
        let e = self.kv.entries.get(key);
        if e.is_some() {
            self.used.borrow_mut().push(key.to_string());
        }
        e
    }

    fn err(e: &Entry, key: &str, message: impl std::fmt::Display) -> Error {
        Error::Parse {
            location: e.location.clone(),
            message: format!("{key}: {message}"),
        }
    }

    fn string(&self, key: &str) -> Option<String> {
        self.raw(key).map(|e| e.value.clone())
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.raw(key) {
            None => Ok(None),
            Some(e) => e.value.parse::<T>().map(Some).map_err(|err| Self::err(e, key, err)),
        }
    }

    fn positive(&self, key: &str) -> Result<Option<f64>> {
        match self.raw(key) {
            None => Ok(None),
            Some(e) => match e.value.parse::<f64>() {
                Ok(v) if v > 0.0 && v.is_finite() => Ok(Some(v)),
                Ok(v) => Err(Self::err(e, key, format!("must be positive (got {v})"))),
                Err(err) => Err(Self::err(e, key, err)),
            },
        }
    }

    fn list<T: std::str::FromStr>(&self, key: &str) -> Result<Option<Vec<T>>>
    where
        T::Err: std::fmt::Display,
    {
        match self.raw(key) {
            None => Ok(None),
            Some(e) => e
                .value
                .split(',')
                .map(|s| s.trim().parse::<T>().map_err(|err| Self::err(e, key, err)))
                .collect::<Result<Vec<T>>>()
                .map(Some),
        }
    }

    fn location(&self, key: &str) -> String {
        self.kv
            .entries
            .get(key)
            .map_or_else(|| "config".to_string(), |e| e.location.clone())
    }

    fn finish(&self) -> Result<()> {
        let used = self.used.borrow();
        for (k, e) in &self.kv.entries {
            if !used.contains(k) {
                return Err(Error::Parse {
                    location: e.location.clone(),
                    message: format!("unknown key '{k}'"),
                });
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ModelSpec {
    pub name: String,
    pub drift_strength: Option<f64>,
    pub drift_center: Option<Vec<f64>>,
    pub drift_file: Option<PathBuf>,
    pub source_amplitude: Option<f64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub seed: u64,
    pub model: ModelSpec,
    pub domain: BoxDomain,
    pub dt: f64,
    pub horizon: f64,
    pub splitting: Splitting,
    pub level: Option<f64>,
    pub truncation: TruncationPlan,
    pub solver: ResolventConfig,
    pub output_dir: PathBuf,
    pub grid_format: GridFormat,
    /// Samples per hypothesis battery.
    pub hypothesis_samples: usize,
    /// `all` or one model name.
    pub hypothesis_models: String,
    pub perturbation: f64,
    pub steady_guesses: usize,
    /// Extra halvings of `dt` for the manufactured convergence table.
    pub refinements: usize,
    pub lorentz_levels: Option<Vec<f64>>,
    pub lorentz_ladder: Vec<usize>,
}

impl ExperimentConfig {
    pub fn from_file(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Parse {
            location: path.display().to_string(),
            message: e.to_string(),
        })?;
        let mut kv = KeyValues::parse(&text, &path.display().to_string())?;
        for o in overrides {
            kv.set_override(o)?;
        }
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_key_values(&kv, base)
    }

    pub fn from_key_values(kv: &KeyValues, base: &Path) -> Result<Self> {
        if kv.is_empty() {
            return Err(Error::Parse {
                location: "config".into(),
                message: "empty configuration".into(),
            });
        }
        let r = Reader {
            kv,
            used: Default::default(),
        };
        let experiment = match r.raw("experiment") {
            None => {
                return Err(Error::Parse {
                    location: "config".into(),
                    message: "missing key 'experiment'".into(),
                })
            }
            Some(e) => Experiment::parse(&e.value).ok_or_else(|| {
                Reader::err(e, "experiment", format!("expected one of {}", Experiment::ALL.join(", ")))
            })?,
        };
        let seed = r.parsed::<u64>("seed")?.unwrap_or(0);

        let dim = r.parsed::<usize>("domain.dim")?.unwrap_or(2);
        let cells = r.list::<usize>("domain.cells")?.unwrap_or_else(|| vec![32; dim]);
        let lengths = r.list::<f64>("domain.lengths")?.unwrap_or_else(|| vec![1.0; dim]);
        let domain = BoxDomain::new(lengths, cells).map_err(|e| Error::Parse {
            location: r.location("domain.cells"),
            message: e.to_string(),
        })?;
        if domain.dim() != dim {
            return Err(Error::Parse {
                location: r.location("domain.dim"),
                message: format!("domain.dim = {dim} disagrees with cells/lengths"),
            });
        }

        let name = r.string("model.name").ok_or_else(|| Error::Parse {
            location: "config".into(),
            message: "missing key 'model.name'".into(),
        })?;
        let drift_center = r.list::<f64>("model.drift.center")?;
        let model = ModelSpec {
            name,
            drift_strength: r.positive("model.drift.strength")?,
            drift_center,
            drift_file: r.string("model.drift.file").map(|p| base.join(p)),
            source_amplitude: r.parsed::<f64>("model.source.amplitude")?,
            alpha: r.positive("model.alpha")?,
            beta: r.positive("model.beta")?,
        };

        let dt = r.positive("time.dt")?.unwrap_or(0.01);
        let horizon = r.positive("time.T")?.unwrap_or(0.5);
        let splitting = r.parsed::<Splitting>("time.splitting")?.unwrap_or_default();
        let level = r.positive("time.level")?;

        let default_plan = TruncationPlan::default();
        let truncation = TruncationPlan {
            base: r.positive("truncation.M0")?,
            ratio: r.positive("truncation.factor")?.unwrap_or(default_plan.ratio),
            count: r.parsed::<usize>("truncation.levels")?.unwrap_or(default_plan.count),
        };

        let default_solver = ResolventConfig::default();
        let solver = ResolventConfig {
            lambda: dt,
            tol: r.positive("solver.tol")?.unwrap_or(default_solver.tol),
            max_iter: r.parsed::<usize>("solver.max_iter")?.unwrap_or(default_solver.max_iter),
            method: r.parsed::<SolverMethod>("solver.method")?.unwrap_or(default_solver.method),
            relaxation: r.positive("solver.relaxation")?.unwrap_or(default_solver.relaxation),
        };
        solver.validate().map_err(|e| Error::Parse {
            location: r.location("solver.relaxation"),
            message: e.to_string(),
        })?;

        let output_dir = base.join(r.string("output.directory").unwrap_or_else(|| "out".into()));
        let grid_format = match r.string("output.formats").as_deref() {
            None | Some("csv") => GridFormat::Csv,
            Some("bin") | Some("binary") => GridFormat::Binary,
            Some(other) => {
                return Err(Error::Parse {
                    location: r.location("output.formats"),
                    message: format!("unknown grid format '{other}' (csv or bin)"),
                })
            }
        };

        let cfg = Self {
            experiment,
            seed,
            model,
            domain,
            dt,
            horizon,
            splitting,
            level,
            truncation,
            solver,
            output_dir,
            grid_format,
            hypothesis_samples: r.parsed::<usize>("hypotheses.samples")?.unwrap_or(1000),
            hypothesis_models: r.string("hypotheses.models").unwrap_or_else(|| "all".into()),
            perturbation: r.positive("uniqueness.perturbation")?.unwrap_or(0.1),
            steady_guesses: r.parsed::<usize>("steady.guesses")?.unwrap_or(3),
            refinements: r.parsed::<usize>("convergence.refinements")?.unwrap_or(0),
            lorentz_levels: r.list::<f64>("lorentz.levels")?,
            lorentz_ladder: r.list::<usize>("lorentz.ladder")?.unwrap_or_default(),
        };
        r.finish()?;
        // catch inconsistent numbers before any work starts
        cfg.evolution().steps().map_err(|e| Error::Parse {
            location: r.location("time.dt"),
            message: e.to_string(),
        })?;
        cfg.problem().map_err(|e| match e {
            Error::Parse { .. } => e,
            other => Error::Parse {
                location: r.location("model.name"),
                message: other.to_string(),
            },
        })?;
        Ok(cfg)
    }

    pub fn model_options(&self) -> Result<ModelOptions> {
        let drift_samples = match &self.model.drift_file {
            Some(p) => Some(read_grid_function(p)?),
            None => None,
        };
        Ok(ModelOptions {
            drift_strength: self.model.drift_strength,
            drift_center: self.model.drift_center.clone(),
            drift_samples,
            source_amplitude: self.model.source_amplitude,
            alpha: self.model.alpha,
            beta: self.model.beta,
        })
    }

    pub fn problem(&self) -> Result<ProblemData> {
        build_model(&self.model.name, &self.domain, self.horizon, &self.model_options()?)
    }

    pub fn evolution(&self) -> EvolutionConfig {
        EvolutionConfig {
            dt: self.dt,
            horizon: self.horizon,
            splitting: self.splitting,
            truncation: self.truncation.clone(),
            level: self.level,
            resolvent: self.solver.clone(),
            keep_trajectory: false,
        }
    }

    pub fn steady(&self) -> SteadyConfig {
        SteadyConfig {
            tol: self.solver.tol,
            max_iter: self.solver.max_iter.max(2000),
            initial_guess: None,
            method: self.solver.method,
            time: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "\
experiment = decay   # trailing comment
seed = 7
[model]
name = heat
[domain]
dim = 2
cells = 16, 16
; alternative comment
[time]
dt = 0.01
T = 0.2
";

    fn parse(text: &str) -> Result<ExperimentConfig> {
        ExperimentConfig::from_key_values(&KeyValues::parse(text, "test.conf")?, Path::new("."))
    }

    #[test]
    fn sample_parses() {
        let c = parse(SAMPLE).unwrap();
        assert_eq!(c.experiment, Experiment::Decay);
        assert_eq!(c.seed, 7);
        assert_eq!(c.domain.cells(), &[16, 16]);
        assert_eq!(c.evolution().steps().unwrap(), 20);
    }

    #[test]
    fn empty_config_is_a_parse_error() {
        assert!(matches!(parse(""), Err(Error::Parse { .. })));
        assert!(matches!(parse("# nothing\n"), Err(Error::Parse { .. })));
    }

    #[test]
    fn errors_carry_line_numbers() {
        let bad = SAMPLE.replace("dt = 0.01", "dt = fast");
        match parse(&bad) {
            Err(Error::Parse { location, .. }) => assert_eq!(location, "test.conf:10"),
            other => panic!("{other:?}"),
        }
        match parse(&format!("{SAMPLE}bogus = 1\n")) {
            Err(Error::Parse { message, .. }) => assert!(message.contains("unknown key")),
            other => panic!("{other:?}"),
        }
        assert!(parse(&format!("{SAMPLE}[time]\ndt = 0.1\n")).is_err());
        assert!(parse("experiment = fly\n[model]\nname = heat\n").is_err());
        assert!(parse(&SAMPLE.replace("T = 0.2", "T = 0.205")).is_err());
    }

    #[test]
    fn overrides_replace_values() {
        let mut kv = KeyValues::parse(SAMPLE, "test.conf").unwrap();
        kv.set_override("time.dt=0.02").unwrap();
        kv.set_override("model.drift.strength = 0.3").unwrap();
        kv.set_override("model.name=singular-drift").unwrap();
        let c = ExperimentConfig::from_key_values(&kv, Path::new(".")).unwrap();
        assert_eq!(c.dt, 0.02);
        assert_eq!(c.model.drift_strength, Some(0.3));
        assert!(kv.set_override("no-equals").is_err());
    }
}
