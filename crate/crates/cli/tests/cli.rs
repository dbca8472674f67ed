//! End-to-end runs of the `pricelab` binary.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn pricelab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pricelab")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("config.json");
    std::fs::write(&path, text).unwrap();
    path.display().to_string()
}

#[test]
fn bias_worked_instance() {
    let v = json(&pricelab(&[
        "bias", "--design", "lr", "--p", "5", "--V", "5", "--rho", "1", "--lambda", "1", "--tau", "1", "--eps", "1",
        "--c", "1",
    ]));
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["command"], "bias");
    assert!((v["bias_pi"].as_f64().unwrap() - 0.260_991).abs() < 1e-6);
    assert!((v["gte_pi"].as_f64().unwrap() + 0.301_316).abs() < 1e-6);
    assert!((v["s_star"].as_f64().unwrap() - 0.618_034).abs() < 1e-6);
}

#[test]
fn gte_at_cost_has_no_bias() {
    for design in ["lr", "cr"] {
        let v = json(&pricelab(&["gte", "--p", "1", "--design", design]));
        assert_eq!(v["command"], "gte");
        assert_eq!(v["gte_pi"], v["demand"]);
        assert_eq!(v["bias_pi"].as_f64().unwrap(), 0.0);
    }
}

#[test]
fn config_point_and_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"schema_version": 1, "point": {"p": 5, "design": "cr", "q": 0.3},
            "params": {"rho": 1, "lambda": 1, "tau": 1, "epsilon": 1, "cost": 1,
                       "valuation": {"family": "exponential", "V": 5}}}"#,
    );
    let v = json(&pricelab(&["steady", "--config", &cfg]));
    assert_eq!(v["design"], "cr");
    assert_eq!(v["q"], 0.3);
    let v = json(&pricelab(&["steady", "--config", &cfg, "--p", "3"]));
    assert_eq!(v["price"], 3.0);
}

#[test]
fn invalid_input_exits_2() {
    let out = pricelab(&["bias", "--p", "5", "--lambda", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("lambda"));
    assert_eq!(pricelab(&["bias"]).status.code(), Some(2));
    assert_eq!(pricelab(&["bias", "--p", "0.5"]).status.code(), Some(2));
    assert_eq!(pricelab(&["bias", "--p", "5", "--bogus"]).status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"schema_version": 2}"#);
    assert_eq!(pricelab(&["bias", "--p", "5", "--config", &cfg]).status.code(), Some(2));
    let cfg = write_config(dir.path(), r#"{"schema_version": 1, "point": {"price": 5}}"#);
    let out = pricelab(&["bias", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("point"));
    let cfg = write_config(dir.path(), r#"{"schema_version": 1, "tolerances": {"abs_tol": 1e-9}}"#);
    let out = pricelab(&["bias", "--p", "5", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("tolerances.abs_tol"));
}

#[test]
fn sweep_csv_layout() {
    let out = pricelab(&[
        "sweep",
        "--p-lo",
        "2",
        "--p-hi",
        "6",
        "--p-n",
        "2",
        "--axis2-lo",
        "0.1",
        "--axis2-hi",
        "10",
        "--axis2-n",
        "2",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(!text.contains('\r'));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 5);
    assert!(lines[0].starts_with("p,lambda,beta,s_star,demand,gte_pi,bias_lr,bias_cr"));
    assert!(lines[0].ends_with(",status"));
    assert!(lines[1].starts_with("2,0.1,0.1,"));
    assert!(lines[4].starts_with("6,10,10,"));
    assert!(lines[1..].iter().all(|l| l.ends_with(",ok")));
}

#[test]
fn sweep_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("grid.csv");
    let out = pricelab(&["sweep", "--p-n", "3", "--axis2-n", "3", "--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    assert_eq!(std::fs::read_to_string(&path).unwrap().lines().count(), 10);
}

#[test]
fn limits_targets() {
    let v = json(&pricelab(&["limits", "--p", "5", "--betas", "1e-4,1,1e4"]));
    assert_eq!(v["command"], "limits");
    let t = &v["targets"];
    assert_eq!(t["gte0"], -0.5);
    assert_eq!(t["bias_lr0"], 1.0);
    assert_eq!(t["bias_cr_inf"], 4.0);
    let ladder = v["ladder"].as_array().unwrap();
    assert_eq!(ladder.len(), 3);
    assert!(ladder[0]["gap_bias_lr0"].as_f64().unwrap() < 1e-3);
    assert!(ladder[2]["gap_bias_cr_inf"].as_f64().unwrap() < 1e-3);
}

#[test]
fn simulate_single_replication_and_reproducibility() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, seed: &str| {
        let out = dir.path().join(name);
        let status = pricelab(&[
            "simulate",
            "--design",
            "lr",
            "--n-listings",
            "60",
            "--p0",
            "5",
            "--p1",
            "5.5",
            "--horizon",
            "80",
            "--replications",
            "1",
            "--seed",
            seed,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
        (std::fs::read(&out).unwrap(), std::fs::read(out.with_extension("csv")).unwrap())
    };
    let (a_json, a_csv) = run("a.json", "9");
    let (b_json, b_csv) = run("b.json", "9");
    let (c_json, _) = run("c.json", "10");
    assert_eq!(a_json, b_json);
    assert_eq!(a_csv, b_csv);
    assert_ne!(a_json, c_json);

    let v: Value = serde_json::from_slice(&a_json).unwrap();
    assert_eq!(v["command"], "simulate");
    assert!(v["outcome"]["ci_halfwidth"].is_null());
    assert!(v["outcome"]["naive_estimator_hat"].is_f64());
    assert!(v["mean_field"]["naive_estimator"].is_f64());
    assert_eq!(String::from_utf8(a_csv).unwrap().lines().count(), 2);
}

#[test]
fn simulate_requires_its_settings() {
    assert_eq!(pricelab(&["simulate", "--p0", "5", "--horizon", "50"]).status.code(), Some(2));
    assert_eq!(pricelab(&["simulate", "--n-listings", "50", "--p0", "5", "--horizon", "5"]).status.code(), Some(2));
    // Without p1 an LR run is an A/A test: no estimator, still a success.
    let v = json(&pricelab(&["simulate", "--n-listings", "50", "--p0", "5", "--horizon", "30", "--design", "lr"]));
    assert!(v["outcome"]["naive_estimator_hat"].is_null());
}

#[test]
fn check_exit_codes() {
    let out = pricelab(&["check"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stderr).lines().all(|l| l.starts_with("[PASS]")));
    assert_eq!(json(&out)["passed"], true);

    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"schema_version": 1,
            "params": {"rho": 1, "lambda": 1, "tau": 1, "epsilon": 1, "cost": 0,
                       "valuation": {"family": "power", "scale": 1, "exponent": 1}}}"#,
    );
    let out = pricelab(&["check", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("[FAIL] failure_rate_increasing"), "{stderr}");
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["passed"], false);

    assert_eq!(pricelab(&["check", "--eps", "-1"]).status.code(), Some(2));
    assert_eq!(pricelab(&["check", "--tol", "0"]).status.code(), Some(2));
}

#[test]
fn threads_flag() {
    let one = pricelab(&["sweep", "--p-n", "4", "--axis2-n", "4", "--threads", "1"]);
    let four = pricelab(&["sweep", "--p-n", "4", "--axis2-n", "4", "--threads", "4"]);
    assert!(one.status.success() && four.status.success());
    assert_eq!(one.stdout, four.stdout);
    assert_eq!(pricelab(&["sweep", "--threads", "0"]).status.code(), Some(2));
}
