use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn qetchain(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qetchain")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("JSON on stdout")
}

fn num(v: &Value) -> f64 {
    v.as_f64().unwrap_or_else(|| panic!("not a number: {v}"))
}

fn read_rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, rows)
}

fn column(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap()
}

#[test]
fn point_with_teleportation() {
    let out = qetchain(&["point", "--kappa", "1", "--lambda", "1", "--temp", "0"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert!(num(&v["analytic"]["e_b"]) > 0.0);
    assert!(num(&v["analytic"]["eta"]) <= 100.0);
    assert!((num(&v["numeric"]["e_b"]) - num(&v["analytic"]["e_b"])).abs() < 1e-9);
    assert_eq!(v["spectrum"]["numeric"].as_array().unwrap().len(), 8);
    assert!(num(&v["residuals"]["spectrum"]) < 1e-9);
    assert_eq!(v["consistent"], Value::Bool(true));
}

#[test]
fn point_at_zero_field_has_only_discord() {
    let v = json(&qetchain(&["point", "--kappa", "1", "--lambda", "0", "--temp", "1"]));
    assert!(num(&v["analytic"]["e_b"]).abs() < 1e-12);
    assert!(num(&v["correlations"]["discord"]) > 0.0);
    assert!(num(&v["correlations"]["negativity"]).abs() < 1e-12);
    assert!(v["residuals"]["functional_identities"]["lambda_zero"].is_object());
}

#[test]
fn point_product_state_is_uncorrelated() {
    let v = json(&qetchain(&["point", "--kappa", "0", "--lambda", "5", "--temp", "2"]));
    for q in ["concurrence", "negativity", "mutual_information", "classical_correlations", "discord"] {
        assert!(num(&v["correlations"][q]).abs() < 1e-10, "{q}");
    }
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(qetchain(&["point", "--kappa", "x", "--lambda", "1"]).status.code(), Some(1));
    assert_eq!(qetchain(&["point", "--lambda", "1"]).status.code(), Some(1));
    assert_eq!(qetchain(&["point", "--kappa", "1", "--lambda", "1", "--temp", "-1"]).status.code(), Some(1));
    assert_eq!(qetchain(&["sweep", "--kappa-range", "0:1:1", "--lambda-range", "0:1:2"]).status.code(), Some(1));
    assert_eq!(qetchain(&["sweep", "--kappa-range", "0:1:2", "--lambda-range", "0:1:2", "--quantities", "heat"]).status.code(), Some(1));
    assert_eq!(qetchain(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(qetchain(&["--help"]).status.code(), Some(0));
}

#[test]
fn smoke_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("smoke.csv");
    let out = qetchain(&["sweep", "--kappa-range", "0.5:1:2", "--lambda-range", "0.5:1:2", "--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    let (header, rows) = read_rows(&path);
    assert_eq!(header.len(), 3 + 7);
    assert_eq!(rows.len(), 4);
    for row in &rows {
        for cell in row {
            assert!(cell.parse::<f64>().unwrap().is_finite());
        }
    }
}

#[test]
fn zero_temperature_grid_vanishes_on_edges() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("grid.csv");
    let out = qetchain(&[
        "sweep", "--kappa-range", "0:10:50", "--lambda-range", "0:10:50", "--temps", "0,1",
        "--quantities", "e_b_max", "--out", path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let (header, rows) = read_rows(&path);
    let (k, l, t, e) = (column(&header, "kappa"), column(&header, "lambda"), column(&header, "temperature"), column(&header, "e_b_max"));
    assert_eq!(rows.len(), 2 * 50 * 50);
    let mut sums = [0.0, 0.0];
    for row in &rows {
        let value: f64 = row[e].parse().unwrap();
        let temp: f64 = row[t].parse().unwrap();
        if row[k].parse::<f64>().unwrap() == 0.0 || row[l].parse::<f64>().unwrap() == 0.0 {
            assert!(value.abs() <= 1e-12);
        }
        sums[usize::from(temp == 1.0)] += value;
    }
    assert!(sums[1] < sums[0]);
    // Temperature outermost, then κ, then λ.
    assert_eq!(&rows[1][..3], &[rows[0][0].clone(), rows[1][1].clone(), rows[0][2].clone()]);
    assert_ne!(rows[0][1], rows[1][1]);
    assert_eq!(rows[2500][t].parse::<f64>().unwrap(), 1.0);
}

#[test]
fn json_sweep_format() {
    let out = qetchain(&["sweep", "--kappa-range", "0:1:2", "--lambda-range", "0:1:2", "--quantities", "eta", "--format", "json"]);
    let v = json(&out);
    assert_eq!(v["quantities"], serde_json::json!(["eta"]));
    assert_eq!(v["records"].as_array().unwrap().len(), 4);
}

#[test]
fn identical_runs_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let render = |name: &str, threads: &str| {
        let path = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_qetchain"))
            .env("QETCHAIN_THREADS", threads)
            .args(["sweep", "--kappa-range", "0:5:12", "--lambda-range", "-5:5:12", "--temps", "0,0.5"])
            .arg("--out")
            .arg(&path)
            .status()
            .unwrap();
        assert!(status.success());
        std::fs::read(path).unwrap()
    };
    let one = render("a.csv", "1");
    assert_eq!(one, render("b.csv", "3"));
    assert_eq!(one, render("c.csv", "1"));
}

#[test]
fn bad_thread_count_is_usage_error() {
    let status = Command::new(env!("CARGO_BIN_EXE_qetchain"))
        .env("QETCHAIN_THREADS", "0")
        .args(["audit", "--trials", "2"])
        .output()
        .unwrap()
        .status;
    assert_eq!(status.code(), Some(1));
}

#[test]
fn unwritable_output_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("missing").join("out.csv");
    let out = qetchain(&["sweep", "--kappa-range", "0:1:2", "--lambda-range", "0:1:2", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn efficiency_reports_maxima() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("eta.csv");
    let out = qetchain(&[
        "efficiency", "--kappa-range", "0.1:10:100", "--lambda-range", "0.1:10:100", "--temps", "0,1",
        "--out", path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let summaries: Vec<Value> =
        String::from_utf8(out.stderr).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(summaries.len(), 2);
    let cold = num(&summaries[0]["eta_max"]);
    let warm = num(&summaries[1]["eta_max"]);
    assert!(warm < cold);

    let (header, rows) = read_rows(&path);
    let (t, eta) = (column(&header, "temperature"), column(&header, "eta"));
    let grid_max = rows
        .iter()
        .filter(|r| r[t].parse::<f64>().unwrap() == 0.0)
        .map(|r| r[eta].parse::<f64>().unwrap())
        .fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(grid_max, cold);
}

#[test]
fn efficiency_on_uncoupled_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("eta0.csv");
    let out = qetchain(&["efficiency", "--kappa-range", "0:0:2", "--lambda-range", "0:3:4", "--temps", "0,1", "--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    let (header, rows) = read_rows(&path);
    let eta = column(&header, "eta");
    assert_eq!(rows.len(), 16);
    for row in rows {
        assert!(row[eta].is_empty() || row[eta].parse::<f64>().unwrap().abs() <= 1e-12);
    }
}

#[test]
fn certify_grid() {
    let out = qetchain(&["certify", "--kappa", "0.5,1,2,5", "--temps", "0.1,1,10", "--trials", "50"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["all_certified"], Value::Bool(true));
    let points = v["points"].as_array().unwrap();
    assert_eq!(points.len(), 12);
    for p in points {
        assert!(num(&p["min_eig"]) >= -1e-10);
        assert!(num(&p["adversarial_max"]) <= 1e-8);
    }
}

#[test]
fn certify_single_point_spectrum() {
    let v = json(&qetchain(&["certify", "--kappa", "1", "--temps", "1", "--trials", "10"]));
    let p = &v["points"][0];
    let closed: Vec<f64> = p["closed_form_spectrum"].as_array().unwrap().iter().map(num).collect();
    let spectrum: Vec<f64> = p["spectrum"].as_array().unwrap().iter().map(num).collect();
    assert_eq!(spectrum.len(), 24);
    let mut expected: Vec<f64> = closed.iter().flat_map(|&c| [c; 8]).collect();
    expected.sort_by(f64::total_cmp);
    for (a, b) in spectrum.iter().zip(&expected) {
        assert!((a - b).abs() < 1e-9);
    }
}

#[test]
fn certify_empty_grid_is_error() {
    assert_ne!(qetchain(&["certify", "--temps", "1"]).status.code(), Some(0));
    assert_ne!(qetchain(&["certify", "--kappa", "1"]).status.code(), Some(0));
}

#[test]
fn audit_passes_and_is_deterministic() {
    let a = qetchain(&["audit", "--seed", "42", "--trials", "100"]);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(json(&a)["passed"], Value::Bool(true));
    assert_eq!(a.stdout, qetchain(&["audit", "--seed", "42", "--trials", "100"]).stdout);
    assert!(qetchain(&["audit"]).status.success());
}

#[test]
fn audit_below_noise_floor_fails() {
    let out = qetchain(&["audit", "--tolerance", "1e-15"]);
    assert_eq!(out.status.code(), Some(2));
    let v = json(&out);
    assert_eq!(v["passed"], Value::Bool(false));
    assert!(!v["failures"].as_array().unwrap().is_empty());
    assert!(String::from_utf8_lossy(&out.stderr).contains("audit check(s) failed"));
}
