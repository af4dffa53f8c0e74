use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use sha2::{Digest, Sha256};
use tempfile::TempDir;

fn ppboot(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ppboot")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = ppboot(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn unit_square_pattern(dir: &Path, rows: &str) -> PathBuf {
    write(dir, "p.window.json", r#"{"window": {"x_min": 0, "x_max": 1, "y_min": 0, "y_max": 1}}"#);
    write(dir, "p.csv", &format!("x,y\n{rows}"))
}

fn digest(path: &Path) -> String {
    hex::encode(Sha256::digest(fs::read(path).unwrap()))
}

#[test]
fn three_row_file_loads_as_three_points() {
    let dir = TempDir::new().unwrap();
    let csv = unit_square_pattern(dir.path(), "0.1,0.1\n0.15,0.1\n0.8,0.9\n");
    let out = ok(&["boot-var", "--input", csv.to_str().unwrap(), "--f-spec", "const:1", "--N", "200"]);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["n"], 3);
    assert_eq!(v["theta_hat"], 6.0);
    // n = 3, f ≡ 1: T3 = R = 6 and Q4 = 0.
    let (a2, a3) = (6.0 / 9.0, -2.0 / 9.0);
    let limit = 4.0 * a3 * 6.0 + 2.0 * a2 * 6.0;
    assert!((v["limit"].as_f64().unwrap() - limit).abs() < 1e-12);
}

#[test]
fn duplicate_rows_are_rejected() {
    let dir = TempDir::new().unwrap();
    let csv = unit_square_pattern(dir.path(), "0.1,0.1\n0.5,0.5\n0.1,0.1\n");
    let out = ppboot(&["pcf", "--input", csv.to_str().unwrap(), "--rmin", "0.1", "--rmax", "0.2", "--bandwidth", "0.05"]);
    assert_eq!(out.status.code(), Some(4));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("rows 1 and 3") && err.contains("pairwise different"), "{err}");
}

#[test]
fn out_of_window_rows_are_reported_by_number() {
    let dir = TempDir::new().unwrap();
    let csv = unit_square_pattern(dir.path(), "0.1,0.1\n1.5,0.5\n0.3,0.3\n");
    let out = ppboot(&["boot-var", "--input", csv.to_str().unwrap(), "--f-spec", "zero"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("data row 2"));
}

#[test]
fn malformed_inputs_are_data_errors() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "p.window.json", r#"{"window": {"x_min": 0, "x_max": 1}}"#);
    let csv = write(dir.path(), "p.csv", "x,y\n0.1,0.2\n");
    let out = ppboot(&["ci-band", "--input", csv.to_str().unwrap(), "--h", "0.1"]);
    assert_eq!(out.status.code(), Some(4));
    let csv = write(dir.path(), "p.csv", "x\nabc\n");
    assert_eq!(ppboot(&["ci-band", "--input", csv.to_str().unwrap(), "--h", "0.1"]).status.code(), Some(4));
    let csv = write(dir.path(), "q.csv", "x\n0.5\n");
    assert_eq!(ppboot(&["ci-band", "--input", csv.to_str().unwrap(), "--h", "0.1"]).status.code(), Some(4));
}

#[test]
fn bad_parameters_are_config_errors() {
    assert_eq!(ppboot(&[]).status.code(), Some(2));
    assert_eq!(ppboot(&["alpha-table", "--nmax", "5", "--scheme", "jackknife"]).status.code(), Some(2));
    assert_eq!(ppboot(&["moments", "--lambda", "10", "--f-spec", "pcf:r=0.1"]).status.code(), Some(2));
    assert_eq!(ppboot(&["coverage", "--lambda-spec", "linear:50", "--h", "0.05"]).status.code(), Some(2));
    assert_eq!(ppboot(&["alpha-table", "--nmax", "bogus"]).status.code(), Some(2));
}

#[test]
fn alpha_table_columns() {
    let out = ok(&["alpha-table", "--nmin", "3", "--nmax", "4"]);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "n,alpha2,alpha3,alpha4");
    assert_eq!(lines[2], "4,1.03125,-0.09375,-0.46875");
    let out = ok(&["alpha-table", "--nmin", "7", "--nmax", "7", "--scheme", "poissonized"]);
    assert_eq!(out.lines().nth(1), Some("7,3,1,0"));
}

#[test]
fn simulate_then_pcf_round_trips() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("sim.csv");
    ok(&["simulate", "--lambda", "200", "--seed", "4", "--out", csv.to_str().unwrap()]);
    assert!(dir.path().join("sim.window.json").exists());
    let out = ok(&["pcf", "--input", csv.to_str().unwrap(), "--rmin", "0.05", "--rmax", "0.1", "--rsteps", "2", "--bandwidth", "0.02"]);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "r,rho_hat");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("0.05,"));
}

#[test]
fn ci_band_and_coverage_columns() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("line.csv");
    ok(&["simulate", "--lambda-spec", "linear:50,20", "--window", "0,1", "--seed", "1", "--out", csv.to_str().unwrap()]);
    for method in ["mc", "closed", "exact"] {
        let out = ok(&["ci-band", "--input", csv.to_str().unwrap(), "--h", "0.05", "--method", method, "--grid-steps", "10", "--resamples", "1000"]);
        let lines: Vec<&str> = out.lines().collect();
        assert_eq!(lines[0], "x,lambda_hat,lo,hi,flag,count,t");
        assert_eq!(lines.len(), 11);
    }
    let out = ppboot(&["ci-band", "--input", csv.to_str().unwrap(), "--h", "0.05", "--method", "oracle"]);
    assert_eq!(out.status.code(), Some(2));
    let out = ok(&["coverage", "--lambda-spec", "linear:50,20", "--h", "0.05", "--reps", "200", "--grid-steps", "5", "--seed", "3"]);
    assert!(out.starts_with("x,coverage_true_lambda,coverage_e_lambda_hat,se_true_lambda,se_e_lambda_hat,interior\n"));
}

const VARIANCE_CONFIG: &str = r#"
experiment = "variance_comparison"
seed = 17
lambda = 300.0
f = "pcf:r=0.01,b=0.004,kernel=box"
reps = 300
scheme = "poissonized"

[integration]
method = "quad"
nodes = 24
"#;

#[test]
fn variance_comparison_reruns_are_byte_identical_across_thread_counts() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "vc.toml", VARIANCE_CONFIG);
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    ok(&["--config", cfg.to_str().unwrap(), "--threads", "1", "--out", a.to_str().unwrap()]);
    ok(&["--config", cfg.to_str().unwrap(), "--threads", "4", "--out", b.to_str().unwrap()]);
    assert_eq!(digest(&a), digest(&b));

    let record: Value = serde_json::from_slice(&fs::read(&a).unwrap()).unwrap();
    assert_eq!(record["experiment"], "variance_comparison");
    assert_eq!(record["seed"], 17);
    assert!(record.get("wall_clock_seconds").is_none());
    let results = &record["results"];
    let errors = &record["errors"];
    for key in ["s2", "s3", "s4", "e_theta", "true_variance_4s3_2s2", "bootstrap_variance_4s3_6s2", "ratio_predicted"] {
        assert!(results[key].is_number() && errors[key].is_number(), "{key}");
    }
    let ratio = results["ratio_predicted"].as_f64().unwrap();
    assert!(ratio > 2.5 && ratio < 3.5, "{ratio}");
}

#[test]
fn zero_function_gives_an_all_zero_record() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "zero.toml",
        "experiment = \"variance_comparison\"\nlambda = 50.0\nf = \"zero\"\nreps = 20\n",
    );
    let record: Value = serde_json::from_str(&ok(&["--config", cfg.to_str().unwrap(), "--timing"])).unwrap();
    for (key, value) in record["results"].as_object().unwrap() {
        if let Some(x) = value.as_f64() {
            if key != "reps" {
                assert_eq!(x, 0.0, "{key}");
            }
        }
    }
    assert!(record["wall_clock_seconds"].is_number());
}

#[test]
fn config_schema_is_enforced() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "bad.toml", &format!("{VARIANCE_CONFIG}\nlamda = 3.0\n"));
    let out = ppboot(&["--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let cfg = write(dir.path(), "bad2.toml", "experiment = \"ci_suite\"\nintensity = \"linear:50,20\"\nh = 0.05\n");
    assert_eq!(ppboot(&["--config", cfg.to_str().unwrap()]).status.code(), Some(2));
    let cfg = write(dir.path(), "ok.toml", VARIANCE_CONFIG);
    assert_eq!(ppboot(&["--config", cfg.to_str().unwrap(), "alpha-table", "--nmax", "3"]).status.code(), Some(2));
}

#[test]
fn ci_suite_with_alpha_one_gives_zero_width_bootstrap_bands() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "ci.toml",
        "experiment = \"ci_suite\"\nseed = 2\nintensity = \"linear:50,20\"\nh = 0.1\nalpha = 1.0\nmethods = [\"mc\", \"closed\"]\nreps = 100\ngrid_steps = 8\nresamples = 1000\n",
    );
    let record: Value = serde_json::from_str(&ok(&["--config", cfg.to_str().unwrap()])).unwrap();
    for band in record["results"]["bands"].as_array().unwrap() {
        let (lo, hi, lam) = (band["lo"].as_array().unwrap(), band["hi"].as_array().unwrap(), band["lambda_hat"].as_array().unwrap());
        for i in 0..lam.len() {
            if band["count"][i].as_u64().unwrap() > 0 {
                assert_eq!(lo[i], lam[i]);
                assert_eq!(hi[i], lam[i]);
            }
        }
    }
}

#[test]
fn ci_suite_t_star_columns_agree_and_series_are_written() {
    let dir = TempDir::new().unwrap();
    let series = dir.path().join("series.csv");
    let cfg = write(
        dir.path(),
        "ci.toml",
        &format!(
            "experiment = \"ci_suite\"\nseed = 9\nintensity = \"linear:50,20\"\nh = 0.05\nalpha = 0.05\nreps = 400\ngrid_steps = 20\nresamples = 20000\nseries_out = {:?}\n",
            series.to_str().unwrap()
        ),
    );
    let record: Value = serde_json::from_str(&ok(&["--config", cfg.to_str().unwrap()])).unwrap();
    let results = &record["results"];
    assert_eq!(results["bands"].as_array().unwrap().len(), 4);
    assert_eq!(record["errors"]["t_star_outside_mc_band"], 0);
    for row in results["t_star"].as_array().unwrap() {
        assert_eq!(row["agree"], true, "{row}");
    }
    let exact = results["coverage"].as_array().unwrap().iter().find(|c| c["method"] == "exact").unwrap();
    for i in 0..20 {
        if exact["interior"][i] == true {
            let cov = exact["coverage_true_lambda"][i].as_f64().unwrap();
            let se = exact["se_true_lambda"][i].as_f64().unwrap();
            assert!(cov >= 0.95 - 3.0 * se.max(0.011), "x index {i}: {cov}");
        }
    }
    let text = fs::read_to_string(&series).unwrap();
    assert!(text.starts_with("method,x,lambda_hat,lo,hi,flag,count,t,coverage_true_lambda"));
    assert_eq!(text.lines().count(), 1 + 4 * 20);
}
