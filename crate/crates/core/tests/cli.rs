use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_driftdiff"))
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn empty_config_exits_with_parse_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "empty.conf", "");
    let out = bin().arg("run").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn parse_errors_report_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.conf", "experiment = decay\n[model]\nname = heat\n[time]\ndt = soon\n");
    let out = bin().arg("run").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.conf:5"), "{err}");
}

#[test]
fn solver_failure_exits_with_code_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "tight.conf",
        "experiment = evolve\n[model]\nname = lipschitz-nonlinear\n[domain]\ncells = 16, 16\n\
         [time]\ndt = 0.1\nT = 0.2\n[solver]\nmax_iter = 1\ntol = 1e-14\n",
    );
    let out = bin().arg("run").arg(&cfg).arg("--output-dir").arg(dir.path().join("o")).output().unwrap();
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn heat_decay_run_lists_outputs_and_passes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "heat.conf",
        "experiment = decay\n[model]\nname = heat\n[domain]\ncells = 16, 16\n[time]\ndt = 0.01\nT = 0.3\n",
    );
    let outdir = dir.path().join("run");
    let out = bin()
        .args(["run"])
        .arg(&cfg)
        .arg("--output-dir")
        .arg(&outdir)
        .args(["--seed", "11", "--override", "time.T=0.2"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(outdir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["pass"], true);
    assert_eq!(manifest["seed"], 11);
    let listed: Vec<&str> = manifest["files"].as_array().unwrap().iter().map(|f| f["path"].as_str().unwrap()).collect();
    for f in ["trace.csv", "decay_report.json", "y_series.csv", "manifest.json"] {
        assert!(listed.contains(&f), "{listed:?}");
    }
    for entry in std::fs::read_dir(&outdir).unwrap() {
        let name = entry.unwrap().file_name().to_string_lossy().into_owned();
        assert!(listed.contains(&name.as_str()), "{name} not in manifest");
    }
    let trace = std::fs::read_to_string(outdir.join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 21 + 1);

    let plot = bin().args(["plot"]).arg(outdir.join("trace.csv")).args(["--kind", "decay"]).output().unwrap();
    assert_eq!(plot.status.code(), Some(0), "{}", String::from_utf8_lossy(&plot.stderr));
    let side: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(outdir.join("trace_decay.json")).unwrap()).unwrap();
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(outdir.join("decay_report.json")).unwrap()).unwrap();
    assert_eq!(
        side["reference"]["slope"].as_f64().unwrap(),
        -2.0 * report["theoretical_omega"].as_f64().unwrap()
    );
    let bad = bin().args(["plot"]).arg(outdir.join("trace.csv")).args(["--kind", "spectrum"]).output().unwrap();
    assert_ne!(bad.status.code(), Some(0));
}

#[test]
fn identical_configs_give_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "u.conf",
        "experiment = uniqueness\nseed = 3\n[model]\nname = lipschitz-nonlinear\n[domain]\ncells = 12, 12\n\
         [time]\ndt = 0.02\nT = 0.1\n",
    );
    let run = |name: &str| {
        let o = dir.path().join(name);
        let s = bin().arg("run").arg(&cfg).arg("--output-dir").arg(&o).output().unwrap();
        assert!(s.status.success());
        std::fs::read(o.join("uniqueness.csv")).unwrap()
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn hypotheses_hold_for_every_builtin_model() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "h.conf",
        "experiment = verify-hypotheses\n[model]\nname = heat\n[domain]\ndim = 3\ncells = 6, 6, 6\n\
         [hypotheses]\nsamples = 200\n",
    );
    let outdir = dir.path().join("h");
    let out = bin().arg("run").arg(&cfg).arg("--output-dir").arg(&outdir).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(outdir.join("hypotheses_report.json")).unwrap()).unwrap();
    assert_eq!(report.as_array().unwrap().len(), 6);
}
