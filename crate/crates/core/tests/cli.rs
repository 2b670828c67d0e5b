use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::process::{Command, Output};

use gasnet::io::{read_series, CsvRow, FIVE_NODE_CFG};

fn gasnet(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gasnet"))
        .args(args)
        .current_dir(cwd)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn fixture(dir: &Path) -> String {
    let path = dir.join("five_node.cfg");
    std::fs::write(&path, FIVE_NODE_CFG).unwrap();
    path.display().to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn summary(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

#[test]
fn validate_accepts_the_bundled_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture(dir.path());
    let o = gasnet(&["validate", &cfg, "--strict"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

#[test]
fn validate_reports_every_violation_with_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let text = FIVE_NODE_CFG.replace("kind = \"slack\"", "kind = \"demand\"").replacen(
        "length = 20000.0",
        "length = -20000.0",
        1,
    );
    let path = dir.path().join("bad.cfg");
    std::fs::write(&path, text).unwrap();
    let o = gasnet(&["validate", path.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("reason=validation"), "{err}");
    assert!(err.contains("slack"), "{err}");
    assert!(err.contains("length"), "{err}");
}

#[test]
fn strict_mode_rejects_unknown_keys() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("extra.cfg");
    std::fs::write(&path, format!("colour = \"blue\"\n{FIVE_NODE_CFG}")).unwrap();
    let p = path.to_str().unwrap();
    assert_eq!(gasnet(&["validate", p], dir.path()).status.code(), Some(0));
    let o = gasnet(&["validate", p, "--strict"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("colour"));
}

#[test]
fn missing_file_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = gasnet(&["validate", "nowhere.cfg"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("reason=io_error"));
}

#[test]
fn step_above_the_cfl_bound_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture(dir.path());
    let o = gasnet(
        &[
            "run",
            &cfg,
            "--dt",
            "1.0",
            "--cfl-safety",
            "1.0",
            "--t-end",
            "60",
            "--out",
            "o",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(
        stderr(&o).lines().any(|l| l == "reason=cfl_violation"),
        "{}",
        stderr(&o)
    );
}

#[test]
fn empty_run_writes_header_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture(dir.path());
    let o = gasnet(&["run", &cfg, "--t-end", "0", "--out", "o"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("o/series.csv")).unwrap();
    assert_eq!(csv, "t,entity,id,field,value\n");
    let s = summary(&dir.path().join("o"));
    assert_eq!(s["steps"], 0);
    assert_eq!(s["max_ledger_discrepancy_kg"], 0.0);
    assert_eq!(s["config_sha"].as_str().unwrap().len(), 64);
}

fn by_field(rows: &[CsvRow]) -> BTreeMap<(String, String, String), Vec<&CsvRow>> {
    let mut out: BTreeMap<_, Vec<_>> = BTreeMap::new();
    for r in rows {
        out.entry((r.entity.clone(), r.id.clone(), r.field.clone()))
            .or_default()
            .push(r);
    }
    out
}

#[test]
fn day_run_samples_every_minute() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture(dir.path());
    // coarse cells keep this quick; the cadence arithmetic is the same
    let o = gasnet(&["run", &cfg, "--dx", "5000", "--dt", "2.5", "--out", "o"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = read_series(dir.path().join("o/series.csv")).unwrap();
    let fields = by_field(&rows);
    // 5 nodes x 2, 5 pipes x 2, 3 ledger fields
    assert_eq!(fields.len(), 23);
    for (key, series) in &fields {
        assert_eq!(series.len(), 1441, "{key:?}");
        assert_eq!(series.last().unwrap().t, 86400.0);
    }
    assert!(rows.windows(2).all(|w| w[0].t <= w[1].t));
    let times: BTreeSet<u64> = rows.iter().map(|r| r.t as u64).collect();
    assert!(times.iter().all(|t| t % 60 == 0));
}

#[test]
fn ledger_recomputes_from_the_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture(dir.path());
    let o = gasnet(
        &["run", &cfg, "--dx", "1000", "--t-end", "1800", "--out", "o"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = read_series(dir.path().join("o/series.csv")).unwrap();
    let f = by_field(&rows);
    let get = |field: &str| &f[&("system".into(), "network".into(), field.to_string())];
    let (mass, thru, disc) = (get("mass"), get("throughput"), get("discrepancy"));
    let m0 = mass[0].value;
    let mut worst = 0.0f64;
    for k in 0..mass.len() {
        let recomputed = mass[k].value - m0 - thru[k].value;
        worst = worst.max((recomputed - disc[k].value).abs() / mass[k].value);
    }
    assert!(worst <= 1e-12, "{worst}");
    let s = summary(&dir.path().join("o"));
    let max_disc = disc.iter().map(|r| r.value.abs()).fold(0.0, f64::max);
    assert_eq!(s["max_ledger_discrepancy_kg"].as_f64().unwrap(), max_disc);
}

#[test]
fn identical_runs_write_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture(dir.path());
    for out in ["a", "b"] {
        let o = gasnet(
            &["run", &cfg, "--dx", "2000", "--t-end", "900", "--out", out],
            dir.path(),
        );
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let a = std::fs::read(dir.path().join("a/series.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b/series.csv")).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, b);
    assert_eq!(
        summary(&dir.path().join("a"))["config_sha"],
        summary(&dir.path().join("b"))["config_sha"]
    );
}

#[test]
fn steady_prints_the_operating_point() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture(dir.path());
    let o = gasnet(&["steady", &cfg, "--out", "s"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let doc: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let flows: Vec<f64> = doc["pipes"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| p["flow"].as_f64().unwrap())
        .collect();
    assert!((flows[0] - 300.0).abs() < 1e-6);
    assert!((flows[4] - 150.0).abs() < 1e-6);
    assert!(dir.path().join("s/steady.json").exists());
}

#[test]
fn convergence_writes_a_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = gasnet(&["convergence", "--out", "c"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("c/report.json")).unwrap()).unwrap();
    let rates = report["rates"]["last_two"].as_array().unwrap();
    let rho = rates[0].as_f64().unwrap();
    assert!((rho - 2.04).abs() <= 0.15, "{rho}");
    assert_eq!(report["resolutions"].as_array().unwrap().len(), 6);
}

#[test]
fn scenario_subcommands_finish_at_reduced_resolution() {
    let dir = tempfile::tempdir().unwrap();
    let runs: [&[&str]; 5] = [
        &["fast-transient", "--eos", "ideal", "--dx", "500", "--out", "f"],
        &["slow-transient", "--dx", "1000", "--t-end", "43200", "--out", "s"],
        &[
            "temperature",
            "--rate",
            "1e-4",
            "--dx",
            "1000",
            "--t-end",
            "21600",
            "--out",
            "t",
        ],
        &["five-node", "--dx", "2000", "--t-end", "3600", "--out", "n"],
        &[
            "fast-transient",
            "--eos",
            "cnga",
            "--dx",
            "500",
            "--t-end",
            "600",
            "--out",
            "g",
        ],
    ];
    for args in runs {
        let o = gasnet(args, dir.path());
        assert_eq!(o.status.code(), Some(0), "{args:?}: {}", stderr(&o));
        let out = dir.path().join(args[args.len() - 1]);
        let s = summary(&out);
        assert!(s["steps"].as_u64().unwrap() > 0, "{args:?}");
        let rows = read_series(out.join("series.csv")).unwrap();
        assert!(!rows.is_empty(), "{args:?}");
    }
}

#[test]
fn bad_eos_choice_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = gasnet(&["fast-transient", "--eos", "vdw"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}
