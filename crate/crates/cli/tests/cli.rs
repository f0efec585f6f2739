use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn fracheat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fracheat"))
        .args(args)
        .env_remove("FRACHEAT_THREADS")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn validator() -> jsonschema::Validator {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/output.schema.json");
    let schema: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    jsonschema::validator_for(&schema).expect("schema compiles")
}

fn assert_valid(doc: &Value) {
    let v = validator();
    let errors: Vec<String> = v.iter_errors(doc).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "schema violations: {errors:?}");
}

#[test]
fn existence_riesz_d4() {
    let out = fracheat(&["existence", "--kernel", "riesz", "--alpha", "1", "--dim", "4", "--hurst", "0.8"]);
    assert_eq!(out.status.code(), Some(0));
    let doc = json(&out);
    assert_eq!(doc["values"]["admissible"], true);
    assert_eq!(doc["values"]["threshold"], 0.75);
    assert_valid(&doc);
}

#[test]
fn riesz_order_above_dimension_is_usage_error() {
    let out = fracheat(&["existence", "--kernel", "riesz", "--alpha", "5", "--dim", "3", "--hurst", "0.8"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(out.stdout.is_empty());
    assert!(String::from_utf8_lossy(&out.stderr).contains("0 < alpha < d"));
}

#[test]
fn missing_command_lists_commands() {
    let out = fracheat(&[]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    for cmd in ["existence", "kernel", "norm", "covariance", "simulate", "verify"] {
        assert!(err.contains(cmd), "{err}");
    }
}

#[test]
fn white_noise_d3_below_threshold_exits_3() {
    let out = fracheat(&["norm", "--kernel", "white", "--dim", "3", "--hurst", "0.7"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(out.stdout.is_empty());
}

#[test]
fn simulate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for name in ["a.csv", "b.csv"] {
        let path = dir.path().join(name);
        let out = fracheat(&[
            "simulate", "--grid-times", "4", "--grid-sites", "5", "--draws", "100", "--seed", "42", "--format", "csv",
            "--output", path.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        files.push(std::fs::read(path).unwrap());
    }
    assert_eq!(files[0], files[1]);
    let text = String::from_utf8(files[0].clone()).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 101);
    assert_eq!(lines[0].split(',').count(), 21);
}

#[test]
fn thread_count_does_not_change_samples() {
    let args = ["simulate", "--grid-times", "2", "--grid-sites", "3", "--draws", "50", "--seed", "7", "--format", "csv"];
    let one = Command::new(env!("CARGO_BIN_EXE_fracheat")).args(args).env("FRACHEAT_THREADS", "1").output().unwrap();
    let two = Command::new(env!("CARGO_BIN_EXE_fracheat")).args(args).env("FRACHEAT_THREADS", "2").output().unwrap();
    assert_eq!(one.status.code(), Some(0));
    assert_eq!(one.stdout, two.stdout);
}

#[test]
fn every_command_emits_schema_valid_json() {
    let runs: [&[&str]; 6] = [
        &["existence", "--kernel", "heat", "--alpha", "0.5", "--dim", "2", "--hurst", "0.7"],
        &["kernel", "--kernel", "poisson", "--alpha", "0.5", "--dim", "3", "--x", "0.1,0,0", "--r", "0.2", "--s", "0.4"],
        &["norm", "--kernel", "bessel", "--alpha", "1.5", "--dim", "2", "--hurst", "0.8"],
        &["norm", "--kernel", "riesz", "--alpha", "1", "--dim", "2", "--hurst", "0.8"],
        &["covariance", "--kernel", "heat", "--alpha", "0.5", "--dim", "1", "--hurst", "0.75", "--t1", "1", "--x1", "0",
          "--t2", "0.5", "--x2", "-0.3"],
        &["simulate", "--grid-times", "2", "--grid-sites", "2", "--draws", "5"],
    ];
    for args in runs {
        let out = fracheat(args);
        assert_eq!(out.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        let doc = json(&out);
        assert_valid(&doc);
        assert_eq!(doc["converged"], true);
    }
}

#[test]
fn verify_subset_reports_and_validates() {
    let out = fracheat(&["verify", "--criteria", "6"]);
    assert_eq!(out.status.code(), Some(0));
    let doc = json(&out);
    assert_valid(&doc);
    assert_eq!(doc["values"]["all_passed"], true);
    assert!(String::from_utf8_lossy(&out.stderr).contains("criterion 6: PASS"));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "command = \"existence\"\n[kernel]\nfamily = \"riesz\"\nalpha = 1.0\ndim = 4\n[time]\nhurst = 0.7\n",
    )
    .unwrap();
    let out = fracheat(&["--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["values"]["admissible"], false);
    let out = fracheat(&["--config", cfg.to_str().unwrap(), "--hurst", "0.8"]);
    assert_eq!(json(&out)["values"]["admissible"], true);
}

#[test]
fn unknown_config_key_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "command = \"existence\"\n[kernel]\nfamily = \"riesz\"\norder = 1.0\n").unwrap();
    let out = fracheat(&["--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("order"));
}

#[test]
fn failed_run_leaves_no_output_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.json");
    let out = fracheat(&["norm", "--kernel", "white", "--dim", "3", "--hurst", "0.7", "--output", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(!path.exists());
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn csv_floats_have_17_significant_digits() {
    let out = fracheat(&["existence", "--kernel", "riesz", "--alpha", "1", "--dim", "4", "--hurst", "0.8", "--format", "csv"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("values,threshold,7.5000000000000000e-1"), "{text}");
}

#[test]
fn help_exits_zero() {
    let out = fracheat(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("Exit codes"));
}

#[test]
fn fuzz_seeds_parse_without_panicking() {
    let corpus = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus");
    for target in ["config_file", "cli_args", "grid_descriptor"] {
        for entry in std::fs::read_dir(corpus.join(target)).unwrap() {
            let text = std::fs::read_to_string(entry.unwrap().path()).unwrap();
            match target {
                "config_file" => _ = fracheat_cli::parse_config(&[], Some(&text)),
                "cli_args" => {
                    let args: Vec<String> = text.lines().map(String::from).collect();
                    fracheat_cli::parse_config(&args, None).unwrap();
                }
                _ => _ = fracheat_cli::parse_config(&[], Some(&format!("command = \"simulate\"\n{text}"))),
            }
        }
    }
}
