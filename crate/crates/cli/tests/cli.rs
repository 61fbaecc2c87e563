use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn hdls(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hdls"))
        .args(args)
        .env("HDLS_LOG", "error")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

fn case11_grid() -> &'static str {
    r#"{"family": "AR", "order": 1, "structure": "product",
        "factors": [{"values": [0.5], "weights": [1.0]},
                    {"values": [1.0, 2.0], "weights": [0.5, 0.5]}]}"#
}

fn sim_config(p: usize, n: usize) -> String {
    format!(
        r#"{{"grid": {}, "p": {p}, "n": {n}, "basis": "random_orthogonal", "burn_in": 200}}"#,
        case11_grid()
    )
}

fn error_line(out: &Output) -> Value {
    let text = String::from_utf8(out.stderr.clone()).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 1, "stderr: {text}");
    serde_json::from_str(lines[0]).unwrap()
}

#[test]
fn simulate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "sim.json", &sim_config(4, 8));
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = hdls(&[
            "simulate",
            "--config",
            &cfg,
            "--seed",
            "7",
            "--output",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{o:?}");
    }
    let (pa, pb) = (
        fs::read(a.join("panel.csv")).unwrap(),
        fs::read(b.join("panel.csv")).unwrap(),
    );
    assert_eq!(pa, pb);
    let text = String::from_utf8(pa).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert!(text.lines().all(|l| l.split(',').count() == 8));
}

#[test]
fn estimate_then_sdm_on_simulated_panel() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let cfg = write(dir.path(), "sim.json", &sim_config(40, 160));
    assert!(
        hdls(&["simulate", "--config", &cfg, "--seed", "3", "--output", out])
            .status
            .success()
    );
    let est = write(
        dir.path(),
        "est.json",
        &format!(
            r#"{{"grid": {}, "gfamily": "bspline4", "optimizer": {{"random_starts": 1, "max_iters": 10}}}}"#,
            case11_grid()
        ),
    );
    let panel = dir.path().join("panel.csv");
    let o = hdls(&[
        "estimate",
        "--config",
        &est,
        "--input",
        panel.to_str().unwrap(),
        "--output",
        out,
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let fit: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("fit.json")).unwrap()).unwrap();
    let omega: Vec<f64> = fit["omega_hat"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    assert_eq!(omega.len(), 2);
    assert!((omega.iter().sum::<f64>() - 1.0).abs() < 1e-10);
    assert!(omega.iter().all(|w| *w >= 0.0));
    assert!(dir.path().join("cdf_sigma.csv").exists());
    assert!(dir.path().join("cdf_ar.csv").exists());

    // fit.json doubles as the sdm config
    let fit_path = dir.path().join("fit.json");
    let o = hdls(&[
        "sdm",
        "--config",
        fit_path.to_str().unwrap(),
        "--input",
        panel.to_str().unwrap(),
        "--output",
        out,
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let atoms: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("atoms.json")).unwrap()).unwrap();
    let total: u64 = atoms
        .as_array()
        .unwrap()
        .iter()
        .map(|a| a["multiplicity"].as_u64().unwrap())
        .sum();
    assert_eq!(total, 40);
    let sdm = fs::read_to_string(dir.path().join("sdm.csv")).unwrap();
    assert_eq!(sdm.lines().count(), 1 + 16 * 40 * 40);
}

#[test]
fn lsd_matches_marchenko_pastur() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "lsd.json",
        r#"{"grid": {"family": "IID", "structure": "product", "factors": [{"values": [1.0]}]},
            "c": 0.5, "z": [[1.0, 1.0]], "density": {"from": 0.5, "to": 2.0, "count": 4}}"#,
    );
    let o = hdls(&["lsd", "--config", &cfg, "--output", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(dir.path().join("transforms.csv")).unwrap();
    let row: Vec<f64> = text
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .map(|v| v.parse().unwrap())
        .collect();
    // companion transform: root of z s^2 + (z + 1 - c) s + 1 = 0 with Im s > 0
    let (c, z) = (0.5, hdls_core::C64::new(1.0, 1.0));
    let b = z + 1.0 - c;
    let d = (b * b - 4.0 * z).sqrt();
    let s = [(-b + d) / (2.0 * z), (-b - d) / (2.0 * z)]
        .into_iter()
        .find(|s| s.im > 0.0)
        .unwrap();
    assert!(
        (row[3] - s.re).abs() < 1e-6 && (row[4] - s.im).abs() < 1e-6,
        "{row:?} vs {s}"
    );
    assert_eq!(
        fs::read_to_string(dir.path().join("density.csv"))
            .unwrap()
            .lines()
            .count(),
        5
    );
}

#[test]
fn select_reports_every_lag() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let sim = write(
        dir.path(),
        "sim.json",
        r#"{"grid": {"family": "ARMA", "structure": "product",
                     "factors": [{"values": [-0.35]}, {"values": [0.65]}, {"values": [1.0, 2.0]}]},
            "p": 20, "n": 80, "basis": "random_orthogonal", "burn_in": 200}"#,
    );
    assert!(
        hdls(&["simulate", "--config", &sim, "--seed", "5", "--output", out])
            .status
            .success()
    );
    let cfg = write(
        dir.path(),
        "select.json",
        r#"{"candidates": [
              {"grid": {"family": "IID", "structure": "product", "factors": [{"values": [1.0, 2.0, 3.0]}]}},
              {"grid": {"family": "AR", "order": 1, "structure": "product", "factors": [{"values": [-0.3, 0.0, 0.3]}, {"values": [1.0, 2.0]}]}},
              {"grid": {"family": "AR", "order": 2, "structure": "product", "factors": [{"values": [0.0, 0.3]}, {"values": [-0.3, 0.0]}, {"values": [1.0, 2.0]}]}},
              {"label": "ARMA_Ind(1,1)", "grid": {"family": "ARMA", "structure": "product", "factors": [{"values": [-0.35, 0.0]}, {"values": [0.0, 0.65]}, {"values": [1.0, 2.0]}]}}
            ],
            "gfamily": "bspline4", "replicates": 3,
            "optimizer": {"random_starts": 0, "max_iters": 5}}"#,
    );
    let panel = dir.path().join("panel.csv");
    let o = hdls(&[
        "select",
        "--config",
        &cfg,
        "--input",
        panel.to_str().unwrap(),
        "--output",
        out,
        "--seed",
        "1",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    let rankings = report["rankings"].as_array().unwrap();
    assert_eq!(rankings.len(), 6);
    for r in rankings {
        assert_eq!(r.as_str().unwrap().split(" ≺ ").count(), 4);
    }
    assert!(rankings[0].as_str().unwrap().contains("ARMA_Ind(1,1)"));
    let table = fs::read_to_string(dir.path().join("rankings.csv")).unwrap();
    assert!(table.starts_with("ordering,lag_0,lag_1,lag_2,lag_3,lag_4,lag_5"));

    // --tau overrides the config lags
    let o = hdls(&[
        "select",
        "--config",
        &cfg,
        "--input",
        panel.to_str().unwrap(),
        "--output",
        out,
        "--tau",
        "1,3",
    ]);
    assert!(o.status.success());
    let report: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["taus"], serde_json::json!([1, 3]));
}

#[test]
fn corrhist_after_log_returns_and_factor_removal() {
    let dir = tempfile::tempdir().unwrap();
    let prices = write(
        dir.path(),
        "prices.csv",
        "id,d1,d2,d3,d4,d5\nA,10,11,12,11,13\nB,20,21,23,22,25\nC,5,5.5,5.2,5.4,5.3\n",
    );
    let cfg = write(
        dir.path(),
        "pre.json",
        r#"{"preprocess": {"log_returns": true, "remove_factors": 1}}"#,
    );
    let o = hdls(&[
        "corrhist",
        "--config",
        &cfg,
        "--input",
        &prices,
        "--output",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let corr = fs::read_to_string(dir.path().join("correlations.csv")).unwrap();
    assert_eq!(corr.lines().count(), 1 + 3);
    let pve: Vec<f64> = fs::read_to_string(dir.path().join("pve.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert!((pve.iter().sum::<f64>() - 1.0).abs() < 1e-12);
}

#[test]
fn errors_are_single_json_lines() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = hdls(&["corrhist", "--input", "/nonexistent/panel.csv", "--output", out]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(error_line(&o)["error"]["kind"], "io");

    let bad = write(dir.path(), "bad.csv", "1,2\n3,oops\n4,5\n");
    let o = hdls(&["corrhist", "--input", &bad, "--output", out]);
    assert_eq!(o.status.code(), Some(1));
    let e = error_line(&o);
    assert_eq!(e["error"]["kind"], "parse");
    assert!(e["error"]["message"]
        .as_str()
        .unwrap()
        .contains("line 2, column 2"));

    let prices = write(dir.path(), "neg.csv", "1,2\n3,-4\n");
    let cfg = write(dir.path(), "pre.json", r#"{"preprocess": {"log_returns": true}}"#);
    let o = hdls(&["corrhist", "--config", &cfg, "--input", &prices, "--output", out]);
    assert_eq!(error_line(&o)["error"]["kind"], "domain");

    let o = hdls(&["estimate", "--kappa", "3"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_line(&o)["error"]["kind"], "usage");

    let cfg = write(dir.path(), "broken.json", "{not json");
    let o = hdls(&["simulate", "--config", &cfg, "--output", out]);
    assert_eq!(error_line(&o)["error"]["kind"], "config");
}
