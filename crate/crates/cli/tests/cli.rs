use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const SMALL: &str = r#"{"L": 8, "M": 16, "R_bits": 1.0, "snr": 7.0, "mc_samples": 2000, "se_seed": 3,
  "num_trials": 6, "master_seed": 11, "epsilon_list": [0.0, 0.25, 1.0]}"#;

fn sparc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sparc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn run_to_file(cmd: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![cmd, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    sparc(&args)
}

fn data_lines(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#')).collect()
}

fn footer<'a>(text: &'a str, key: &str) -> &'a str {
    let prefix = format!("# {key}=");
    text.lines()
        .find_map(|l| l.strip_prefix(prefix.as_str()))
        .unwrap_or_else(|| panic!("no footer {key}"))
}

#[test]
fn se_table_schema_and_first_row() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "c.json", SMALL);
    let out = dir.path().join("se.csv");
    let res = run_to_file("se", &cfg, &out, &[]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("# sparc "));
    assert!(text.lines().nth(1).unwrap().starts_with("# config {"));
    let rows = data_lines(&text);
    assert_eq!(rows[0], "t,x_t,tau2_t,sigma2_t,sigma_perp2_t,tau_perp2_t");
    let first: Vec<f64> = rows[1].split(',').map(|f| f.parse().unwrap()).collect();
    assert_eq!(first[0], 0.0);
    assert_eq!(first[1], 0.0);
    assert_eq!(first[2], 8.0);
    for key in ["T", "f_R", "delta_R", "delta_R_min", "chi", "chi1"] {
        footer(&text, key);
    }
}

#[test]
fn se_rerun_is_byte_identical() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "c.json", SMALL);
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    assert!(run_to_file("se", &cfg, &a, &[]).status.success());
    assert!(run_to_file("se", &cfg, &b, &[]).status.success());
    assert!(std::fs::read(&a).unwrap() == std::fs::read(&b).unwrap(), "outputs differ");
}

#[test]
fn se_json_parses() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "c.json", &SMALL.replace("\"L\": 8", "\"L\": 8, \"format\": \"json\""));
    let out = dir.path().join("se.json");
    assert!(run_to_file("se", &cfg, &out, &[]).status.success());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["trace"]["x"][0], 0.0);
    assert!(v["version"].is_string());
    assert_eq!(v["config"]["L"], 8);
}

#[test]
fn rate_above_capacity_exits_2() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "c.json", &SMALL.replace("\"R_bits\": 1.0", "\"R_bits\": 2.0"));
    let res = run_to_file("se", &cfg, &dir.path().join("x.csv"), &[]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn config_errors_exit_1_with_position() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "c.json", "{\"L\": 8,\n  \"M\": 16,\n  \"R_bits\": 1.0, \"snr\": 7.0, \"oops\": 1}");
    let res = run_to_file("se", &cfg, &dir.path().join("x.csv"), &[]);
    assert_eq!(res.status.code(), Some(1));
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("line 3") && err.contains("oops"), "{err}");

    let both = write_config(&dir, "d.json", &SMALL.replace("\"R_bits\": 1.0", "\"R_bits\": 1.0, \"R_nats\": 0.7"));
    assert_eq!(run_to_file("se", &both, &dir.path().join("x.csv"), &[]).status.code(), Some(1));
    assert_eq!(sparc(&["se", "--config", "/nonexistent.json"]).status.code(), Some(1));
    assert_eq!(sparc(&["frobnicate"]).status.code(), Some(1));
}

#[test]
fn sim_outputs_are_consistent() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "c.json", SMALL);
    let out = dir.path().join("trials.csv");
    let res = run_to_file("sim", &cfg, &out, &[]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let rows = data_lines(&text);
    assert!(rows[0].starts_with("trial,seed,ser,decoded_ok,mse_0,"));
    assert_eq!(rows.len(), 7);
    let sers: Vec<f64> = rows[1..].iter().map(|r| r.split(',').nth(2).unwrap().parse().unwrap()).collect();
    for r in &rows[1..] {
        assert_eq!(r.split(',').nth(1).unwrap(), "11");
        let mse0: f64 = r.split(',').nth(4).unwrap().parse().unwrap();
        assert!((mse0 - 7.0).abs() <= 1e-10 * 7.0);
    }

    let agg: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("trials.aggregate.json")).unwrap()).unwrap();
    let mean = sers.iter().sum::<f64>() / sers.len() as f64;
    assert!((agg["aggregate"]["mean_ser"].as_f64().unwrap() - mean).abs() < 1e-15);
    assert_eq!(agg["aggregate"]["failures"], 0);
    assert_eq!(agg["aggregate"]["matrix_mode"], "fresh");
    let devs = agg["aggregate"]["deviations"].as_array().unwrap();
    assert_eq!(devs[2]["fraction"], 0.0);
    assert_eq!(agg["config"]["master_seed"], 11);
}

#[test]
fn sim_overrides_apply() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "c.json", SMALL);
    let out = dir.path().join("t.csv");
    assert!(run_to_file("sim", &cfg, &out, &["--seed", "5", "--trials", "3"]).status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    let rows = data_lines(&text);
    assert_eq!(rows.len(), 4);
    assert!(rows[1].starts_with("0,5,"));
}

#[test]
fn sweep_has_one_row_per_m() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "c.json", SMALL);
    let out = dir.path().join("sweep.csv");
    let res = run_to_file("sweep", &cfg, &out, &["--m-grid", "4,8,16", "--trials", "3"]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let rows = data_lines(&text);
    assert_eq!(rows[0], "M,n,T,num_trials,mean_ser,std_err_ser,se_predicted_ser");
    assert_eq!(rows.len(), 4);
    let ms: Vec<&str> = rows[1..].iter().map(|r| r.split(',').next().unwrap()).collect();
    assert_eq!(ms, ["4", "8", "16"]);

    let again = dir.path().join("sweep2.csv");
    assert!(run_to_file("sweep", &cfg, &again, &["--m-grid", "4,8,16", "--trials", "3"]).status.success());
    assert!(std::fs::read(&out).unwrap() == std::fs::read(&again).unwrap(), "outputs differ");

    assert_eq!(run_to_file("sweep", &cfg, &out, &[]).status.code(), Some(1));
}

#[test]
fn bounds_json_fields() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "c.json", r#"{"L": 2000, "M": 512, "R_nats": 0.1, "snr": 1.0}"#);
    let out = dir.path().join("b.json");
    let res = run_to_file("bounds", &cfg, &out, &["--T", "1", "--epsilon", "0.5"]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    for key in ["log_bound", "bound", "vacuous_flag", "K_T", "kappa_T", "exponent_scale", "capacity_gap", "note"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    let ln_b = v["log_bound"].as_f64().unwrap();
    assert!(ln_b.is_finite());
    assert_eq!(v["vacuous_flag"].as_bool().unwrap(), ln_b > 0.0);
    assert!(v["capacity_gap"]["delta_r_min"].as_f64().unwrap() > 0.0);
}

#[test]
fn bounds_vacuous_flag_when_above_one() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "c.json", r#"{"L": 20, "M": 512, "R_nats": 0.1, "snr": 1.0}"#);
    let out = dir.path().join("b.json");
    assert!(run_to_file("bounds", &cfg, &out, &["--T", "4", "--epsilon", "0.5"]).status.success());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert!(v["log_bound"].as_f64().unwrap() > 0.0);
    assert_eq!(v["vacuous_flag"], true);
}

#[test]
fn bounds_threshold_violation_exits_2() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "c.json", r#"{"L": 2000, "M": 512, "R_nats": 0.1, "snr": 1.0}"#);
    let res = run_to_file("bounds", &cfg, &dir.path().join("b.json"), &["--T", "1", "--epsilon", "0.01"]);
    assert_eq!(res.status.code(), Some(2));
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("must exceed"), "{err}");
}
