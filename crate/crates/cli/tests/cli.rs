use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn qwres(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qwres"))
        .args(args)
        .output()
        .expect("run qwres")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// Parses CSV text into a header and rows of fields.
fn csv(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, rows)
}

fn column(header: &[String], rows: &[Vec<String>], name: &str) -> Vec<f64> {
    let k = header
        .iter()
        .position(|h| h == name)
        .unwrap_or_else(|| panic!("no column {name}"));
    rows.iter().map(|r| r[k].parse().unwrap()).collect()
}

#[test]
fn c4_three_tails_resonances() {
    let o = qwres(&[
        "resonances",
        "--preset",
        "cycle:4",
        "--tails",
        "v0,v1,v2",
        "--eps",
        "0.25",
    ]);
    assert!(o.status.success());
    let (h, rows) = csv(&stdout(&o));
    assert_eq!(rows.len(), 8);
    let modulus = column(&h, &rows, "modulus");
    let re = column(&h, &rows, "re");
    assert!(modulus.iter().any(|m| *m < 0.99));
    for target in [1.0, -1.0] {
        assert!(re
            .iter()
            .zip(&modulus)
            .any(|(r, m)| (r - target).abs() < 1e-9 && (m - 1.0).abs() < 1e-9));
    }
}

#[test]
fn unperturbed_rows_on_circle() {
    let o = qwres(&["resonances", "--preset", "cycle:4", "--tails", "v0,v1,v2", "--eps", "0"]);
    let (h, rows) = csv(&stdout(&o));
    assert!(column(&h, &rows, "on_circle").iter().all(|x| *x == 1.0));
}

#[test]
fn k4_four_tails_flags_degenerate_branches() {
    let o = qwres(&[
        "resonances",
        "--preset",
        "complete:4",
        "--tails",
        "v0,v1,v2,v3",
        "--eps",
        "0.25",
    ]);
    let (h, rows) = csv(&stdout(&o));
    assert_eq!(rows.len(), 12);
    let degenerate = column(&h, &rows, "degenerate");
    let modulus = column(&h, &rows, "modulus");
    assert!(degenerate.iter().zip(&modulus).any(|(d, m)| *d == 1.0 && *m < 0.99));
}

#[test]
fn transmission_conserves_flux_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let run = |sub: &str| {
        let out = dir.path().join(sub);
        let o = qwres(&[
            "transmission",
            "--preset",
            "cycle:4",
            "--tails",
            "v0,v1,v2",
            "--eps",
            "0,0.25",
            "--grid",
            "512",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        out
    };
    let a = run("a");
    let b = run("b");
    let text = fs::read_to_string(a.join("transmission.csv")).unwrap();
    assert_eq!(text, fs::read_to_string(b.join("transmission.csv")).unwrap());
    let (h, rows) = csv(&text);
    assert_eq!(rows.len(), 1024);
    let eps = column(&h, &rows, "eps");
    let tau = column(&h, &rows, "transmission");
    let flux = column(&h, &rows, "flux");
    assert!(flux.iter().all(|f| (f - 1.0).abs() < 1e-9));
    assert!(eps
        .iter()
        .zip(&tau)
        .filter(|(e, _)| **e == 0.0)
        .all(|(_, t)| *t < 1e-20));
    assert!(eps.iter().zip(&tau).filter(|(e, _)| **e == 0.25).any(|(_, t)| *t > 0.9));
    let meta: Value = serde_json::from_str(&fs::read_to_string(a.join("transmission.csv.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["tolerances"]["cluster"], 1e-7);
    assert!(meta["software"].as_str().unwrap().starts_with("qwres "));
    assert!(meta["decisions"][1]["spectrum"]["clusters"].as_array().unwrap().len() >= 4);
}

#[test]
fn resonances_json_with_sidecars() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = qwres(&[
        "resonances",
        "--preset",
        "cycle:4",
        "--tails",
        "0,1,2",
        "--eps",
        "0:0.5:3",
        "--format",
        "json",
        "--out",
        out,
    ]);
    assert!(o.status.success());
    let rows: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("resonances.json")).unwrap()).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 24);
    for f in [
        "resonances.json.meta.json",
        "unit_circle.json",
        "unit_circle.json.meta.json",
    ] {
        assert!(Path::new(out).join(f).exists(), "{f}");
    }
    let meta: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("resonances.json.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["classification_eps0"].as_array().unwrap().len(), 4);
}

#[test]
fn graph_file_input() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.json");
    fs::write(
        &path,
        r#"{"vertices": 3, "edges": [[0,1],[1,2],[2,0]], "tails": [{"vertex": 0, "count": 1}]}"#,
    )
    .unwrap();
    let o = qwres(&["resonances", "--graph", path.to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(csv(&stdout(&o)).1.len(), 6);
    let o = qwres(&["resonances", "--graph", path.to_str().unwrap(), "--tails", "v0,v0,v1"]);
    assert!(o.status.success());
}

#[test]
fn perturb_slopes() {
    let dir = tempfile::tempdir().unwrap();
    let o = qwres(&[
        "perturb",
        "--preset",
        "cycle:4",
        "--tails",
        "v0,v1,v2",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (h, rows) = csv(&fs::read_to_string(dir.path().join("slopes.csv")).unwrap());
    let persistent = column(&h, &rows, "persistent");
    let motion = column(&h, &rows, "max_motion");
    let first = column(&h, &rows, "slope_first");
    for ((p, m), s) in persistent.iter().zip(&motion).zip(&first) {
        if *p == 1.0 {
            assert!(*m < 1e-12);
        } else {
            assert!((s - 2.0).abs() < 0.1, "slope {s}");
        }
    }
    // Away from resonances the deviation is first order: the tail reflection itself moves with kappa.
    let (h, rows) = csv(&fs::read_to_string(dir.path().join("sigma_nonresonant.csv")).unwrap());
    assert!(column(&h, &rows, "slope").iter().all(|s| (s - 1.0).abs() < 0.1));
    let ledger: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("ledger.json")).unwrap()).unwrap();
    assert_eq!(ledger["ledger"].as_array().unwrap().len(), 4);
    assert!(ledger["ledger"][0]["mu2_bound"]["holds"].as_bool().unwrap());
}

#[test]
fn perturb_needs_three_points() {
    let o = qwres(&["perturb", "--preset", "cycle:4", "--tails", "v0", "--eps", "0.1,0.05"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_errors_exit_two() {
    for args in [
        vec!["resonances", "--preset", "cycle:4", "--tails", "v7"],
        vec!["resonances", "--preset", "cycle:4", "--tails", "v0", "--eps", "1.5"],
        vec!["transmission", "--preset", "cycle:4", "--tails", "v0", "--grid", "4"],
        vec![
            "transmission",
            "--preset",
            "cycle:4",
            "--tails",
            "v0,v1",
            "--inflow",
            "3",
        ],
        vec!["resonances", "--preset", "star:3", "--tails", "v0"],
        vec!["resonances", "--tails", "v0"],
    ] {
        assert_eq!(qwres(&args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn verify_single_fixture_and_strict_tolerance() {
    let o = qwres(&["verify", "--fixture", "k4-4tails", "--format", "json"]);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["fixtures"], serde_json::json!(["k4-4tails"]));
    let o = qwres(&["verify", "--fixture", "k4-4tails", "--tol", "1e-20", "--format", "json"]);
    assert_eq!(o.status.code(), Some(1));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let unit = v["criteria"].as_array().unwrap().iter().find(|c| c["id"] == 2).unwrap();
    assert_eq!(unit["status"], "fail");
    assert!(unit["measured"].as_f64().unwrap() > 0.0);
}

#[test]
fn verify_default_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = qwres(&["verify", "--out", dir.path().to_str().unwrap()]);
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 12);
    let v: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("verify.json")).unwrap()).unwrap();
    let failed: Vec<u64> = v["criteria"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["status"] == "fail")
        .map(|c| c["id"].as_u64().unwrap())
        .collect();
    assert_eq!(o.status.code(), Some(if failed.is_empty() { 0 } else { 1 }));
}
