//! Plot-ready two-column CSV and reference-curve sidecars from run outputs.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde_json::json;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlotKind {
    Energy,
    Decay,
    Convergence,
}

impl PlotKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PlotKind::Energy => "energy",
            PlotKind::Decay => "decay",
            PlotKind::Convergence => "convergence",
        }
    }
}

impl FromStr for PlotKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "energy" => Ok(PlotKind::Energy),
            "decay" => Ok(PlotKind::Decay),
            "convergence" => Ok(PlotKind::Convergence),
            other => Err(Error::InvalidArgument(format!(
                "unknown plot kind '{other}' (expected energy, decay or convergence)"
            ))),
        }
    }
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl Table {
    fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let origin = path.display();
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let header: Vec<String> = match lines.next() {
            Some((_, h)) => h.split(',').map(|s| s.trim().to_string()).collect(),
            None => {
                return Err(Error::Parse {
                    location: format!("{origin}:1"),
                    message: "empty trace".into(),
                })
            }
        };
        let mut rows = Vec::new();
        for (i, line) in lines {
            let row = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Parse {
                    location: format!("{origin}:{}", i + 1),
                    message: e.to_string(),
                })?;
            if row.len() != header.len() {
                return Err(Error::Parse {
                    location: format!("{origin}:{}", i + 1),
                    message: format!("expected {} columns, found {}", header.len(), row.len()),
                });
            }
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Error::Parse {
                location: format!("{origin}:2"),
                message: "trace has no data rows".into(),
            });
        }
        Ok(Self { header, rows })
    }

    fn column(&self, name: &str, path: &Path) -> Result<Vec<f64>> {
        let k = self.header.iter().position(|h| h == name).ok_or_else(|| Error::Parse {
            location: format!("{}:1", path.display()),
            message: format!("missing column '{name}'"),
        })?;
        Ok(self.rows.iter().map(|r| r[k]).collect())
    }
}

fn sibling(path: &Path, name: &str) -> PathBuf {
    path.parent().unwrap_or(Path::new(".")).join(name)
}

/// Writes `<stem>_<kind>.csv` (columns `x,y`) and `<stem>_<kind>.json`
/// next to `trace_path` and returns the CSV path.
///
/// * energy: `(t, ½‖u‖²)` from an evolution trace.
/// * decay: `(t, log y)` from `y_series.csv`; an evolution trace is
///   redirected to the `y_series.csv` beside it. The sidecar carries the
///   reference slope `-2ω` read from `decay_report.json` when present.
/// * convergence: `(log τ, log error)` from `convergence.csv`, with a
///   least-squares order and a slope-one reference line.
pub fn emit_plot_data(trace_path: &Path, kind: PlotKind) -> Result<PathBuf> {
    let mut source = trace_path.to_path_buf();
    let mut table = Table::read(&source)?;
    let (x, y, reference) = match kind {
        PlotKind::Energy => {
            let t = table.column("t", &source)?;
            let l2 = table.column("l2_norm", &source)?;
            let e: Vec<f64> = l2.iter().map(|v| 0.5 * v * v).collect();
            let diss = table.column("cumulative_dissipation", &source).ok();
            (t, e, json!({ "cumulative_dissipation": diss }))
        }
        PlotKind::Decay => {
            if !table.header.iter().any(|h| h == "y") {
                source = sibling(trace_path, "y_series.csv");
                table = Table::read(&source)?;
            }
            let t = table.column("t", &source)?;
            let yv = table.column("y", &source)?;
            let (t, logy): (Vec<f64>, Vec<f64>) = t
                .iter()
                .zip(&yv)
                .filter(|(_, y)| **y > 0.0)
                .map(|(t, y)| (*t, y.ln()))
                .unzip();
            if t.is_empty() {
                return Err(Error::InvalidArgument("decay series is identically zero".into()));
            }
            let report = sibling(&source, "decay_report.json");
            let omega = std::fs::read_to_string(&report)
                .ok()
                .and_then(|s| serde_json::from_str::<serde_json::Value>(&s).ok())
                .and_then(|v| v["theoretical_omega"].as_f64());
            let reference = match omega {
                Some(w) => json!({
                    "omega": w,
                    "slope": -2.0 * w,
                    "intercept": logy[0] - (-2.0 * w) * t[0],
                    "curve": "log y(0) - 2 omega t",
                }),
                None => json!({ "omega": null }),
            };
            (t, logy, reference)
        }
        PlotKind::Convergence => {
            let tau = table.column("tau", &source)?;
            let err = table.column("error", &source)?;
            let x: Vec<f64> = tau.iter().map(|v| v.ln()).collect();
            let y: Vec<f64> = err.iter().map(|v| v.ln()).collect();
            let order = if x.len() >= 2 { Some(slope(&x, &y)) } else { None };
            let reference = json!({
                "slope": 1.0,
                "intercept": y[0] - x[0],
                "fitted_order": order,
            });
            (x, y, reference)
        }
    };
    let stem = trace_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "trace".into());
    let csv = sibling(trace_path, &format!("{stem}_{}.csv", kind.as_str()));
    let mut body = String::from("x,y\n");
    for (a, b) in x.iter().zip(&y) {
        body.push_str(&format!("{a:.17e},{b:.17e}\n"));
    }
    std::fs::write(&csv, body)?;
    let sidecar = json!({
        "kind": kind.as_str(),
        "source": source.display().to_string(),
        "reference": reference,
    });
    std::fs::write(csv.with_extension("json"), serde_json::to_string_pretty(&sidecar)?)?;
    Ok(csv)
}

fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}
