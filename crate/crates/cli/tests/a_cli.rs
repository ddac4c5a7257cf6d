mod common;

use std::path::{Path, PathBuf};
use std::process::Command;

use common::*;
use proptest::prelude::*;
use ratecode::datagen::{sample_mixture, MixtureSpec, Rng};
use ratecode::segmentation::segment_greedy;
use ratecode_cli::report::TaskResult;
use ratecode_cli::{io, run, ExperimentConfig, Report, Task};

const BLOBS: &str = r#"seed = 4

[[components]]
mean = [0.0, 0.0]
kind = "gaussian"
covariance = [[0.01, 0.0], [0.0, 0.01]]
weight = 0.5

[[components]]
mean = [4.0, 4.0]
kind = "gaussian"
covariance = [[0.01, 0.0], [0.0, 0.01]]
weight = 0.5
"#;

fn fixture() -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let spec: MixtureSpec = toml::from_str(BLOBS).unwrap();
    let (w, labels) = sample_mixture(&spec, 60).unwrap();
    io::save_matrix(&dir.path().join("blobs.csv"), &w).unwrap();
    io::save_labels(&dir.path().join("blobs_labels.csv"), &labels).unwrap();
    std::fs::write(dir.path().join("spec.toml"), BLOBS).unwrap();
    let path = dir.path().to_path_buf();
    (dir, path)
}

fn failing(dir: &Path, args: &[&str]) -> serde_json::Value {
    let out = Command::new(env!("CARGO_BIN_EXE_ratecode"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap();
    assert!(!out.status.success());
    serde_json::from_slice(&out.stderr).unwrap()
}

#[test]
fn segment_two_blobs_matches_library() {
    let (_guard, d) = fixture();
    let config = ExperimentConfig {
        task: Some(Task::Segment),
        epsilon: Some(0.05),
        input: Some(d.join("blobs.csv")),
        labels: Some(d.join("blobs_labels.csv")),
        ..Default::default()
    };
    let report = run(&config).unwrap();
    let w = io::load_matrix(&d.join("blobs.csv"), false).unwrap();
    let lib = segment_greedy(&w, eps(0.05)).unwrap();
    let TaskResult::Segmentation { result, agreement, .. } = &report.results else {
        panic!("wrong result kind");
    };
    assert_eq!(result.partition.num_groups(), 2);
    assert!((result.total_length - lib.total_length).abs() <= 1e-6);
    assert_eq!(*agreement, Some(1.0));
    assert!(report.checks.values().all(|&ok| ok));
}

#[test]
fn report_reparses_to_the_same_value() {
    let (_guard, d) = fixture();
    for config in [
        ExperimentConfig {
            task: Some(Task::SelectEps),
            eps_grid: Some(vec![0.05, 0.5]),
            input: Some(d.join("blobs.csv")),
            ..Default::default()
        },
        ExperimentConfig {
            task: Some(Task::Mcr2Eval),
            input: Some(d.join("blobs.csv")),
            labels: Some(d.join("blobs_labels.csv")),
            ..Default::default()
        },
        ExperimentConfig {
            task: Some(Task::Gen),
            spec_file: Some(d.join("spec.toml")),
            samples: Some(10),
            ..Default::default()
        },
    ] {
        let report = run(&config).unwrap();
        let text = serde_json::to_string(&report).unwrap();
        let back: Report = serde_json::from_str(&text).unwrap();
        assert_eq!(back, report);
        assert_eq!(back.schema_version, 1);
    }
}

#[test]
fn flags_override_the_config_file() {
    let (_guard, d) = fixture();
    std::fs::write(
        d.join("exp.toml"),
        "task = \"segment\"\nepsilon = 0.5\ninput = \"blobs.csv\"\noutput = \"from_file.json\"\n",
    )
    .unwrap();
    ratecode(&d, &["run", "--config", "exp.toml", "--epsilon", "0.05"]);
    let report = report_without_timings(&d.join("from_file.json"));
    assert_eq!(report["config"]["epsilon"], 0.05);
    assert_eq!(report["task"], "segment");
    // The subcommand names the task even when the file names another.
    ratecode(&d, &["gen", "--config", "exp.toml", "--spec-file", "spec.toml", "--samples", "5"]);
    assert_eq!(report_without_timings(&d.join("from_file.json"))["task"], "gen");
}

#[test]
fn report_goes_to_stdout_without_output() {
    let (_guard, d) = fixture();
    let out = ratecode(&d, &["mcr2-eval", "--input", "blobs.csv", "--labels", "blobs_labels.csv"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["results"]["kind"], "rates");
    assert!(v["results"]["report"]["delta_r"].as_f64().unwrap() > 0.0);
}

#[test]
fn errors_are_json_objects_with_names() {
    let (_guard, d) = fixture();
    std::fs::write(d.join("bad.csv"), "1,2\n3,4\n5,oops\n").unwrap();
    let e = failing(&d, &["segment", "--input", "bad.csv", "--epsilon", "1"]);
    assert_eq!(e["error"]["name"], "ParseError");
    assert!(e["error"]["message"].as_str().unwrap().contains("row 3, column 2"));

    let e = failing(&d, &["segment", "--input", "blobs.csv", "--epsilon", "0"]);
    assert_eq!(e["error"]["name"], "InvalidDistortion");

    let e = failing(&d, &["segment", "--input", "blobs.csv"]);
    assert_eq!(e["error"]["name"], "ConfigError");

    let e = failing(&d, &["classify-kernel", "--kernel", "sigmoid", "--epsilon", "1"]);
    assert_eq!(e["error"]["name"], "InvalidInput");

    let e = failing(&d, &["segment", "--input", "missing.csv", "--epsilon", "1"]);
    assert_eq!(e["error"]["name"], "IoError");

    std::fs::write(d.join("typo.toml"), "task = \"segment\"\nepsilonn = 1.0\n").unwrap();
    let e = failing(&d, &["run", "--config", "typo.toml"]);
    assert_eq!(e["error"]["name"], "ConfigError");

    let e = failing(&d, &["segment", "--no-such-flag"]);
    assert_eq!(e["error"]["name"], "UsageError");

    std::fs::write(d.join("soft.csv"), "0.5,0.5\n0.5,0.5\n").unwrap();
    std::fs::write(d.join("two.csv"), "1,0\n0,1\n").unwrap();
    let e = failing(&d, &["mcr2-eval", "--input", "two.csv", "--membership", "soft.csv", "--norm", "frobenius"]);
    assert_eq!(e["error"]["name"], "HardLabelsRequired");
}

#[test]
fn header_flag_skips_the_first_line() {
    let (_guard, d) = fixture();
    let body = std::fs::read_to_string(d.join("blobs.csv")).unwrap();
    std::fs::write(d.join("headed.csv"), format!("x,y\n{body}")).unwrap();
    let plain = ratecode(&d, &["segment", "--input", "blobs.csv", "--epsilon", "0.05"]);
    let headed = ratecode(&d, &["segment", "--input", "headed.csv", "--header", "true", "--epsilon", "0.05"]);
    let a: serde_json::Value = serde_json::from_slice(&plain.stdout).unwrap();
    let b: serde_json::Value = serde_json::from_slice(&headed.stdout).unwrap();
    assert_eq!(a["results"]["result"], b["results"]["result"]);
}

#[test]
fn thread_cap_does_not_change_results() {
    let (_guard, d) = fixture();
    let args = ["classify-kernel", "--kernel", "poly:2", "--epsilon", "0.3", "--input", "blobs.csv", "--labels", "blobs_labels.csv", "--test-input", "blobs.csv"];
    let run_with = |threads: &str| {
        let out = Command::new(env!("CARGO_BIN_EXE_ratecode"))
            .current_dir(&d)
            .env("RATECODE_THREADS", threads)
            .args(args)
            .output()
            .unwrap();
        assert!(out.status.success());
        let mut v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        v.as_object_mut().unwrap().remove("timings");
        v
    };
    assert_eq!(run_with("1"), run_with("0"));
    let out = Command::new(env!("CARGO_BIN_EXE_ratecode"))
        .current_dir(&d)
        .env("RATECODE_THREADS", "many")
        .args(args)
        .output()
        .unwrap();
    assert!(!out.status.success());
}

#[test]
fn mcr2_train_writes_checks_and_curves() {
    let (_guard, d) = fixture();
    let labels: Vec<usize> = (0..200).map(|i| i / 100).collect();
    io::save_labels(&d.join("k2.csv"), &labels).unwrap();
    ratecode(
        &d,
        &[
            "mcr2-train", "--labels", "k2.csv", "--dim", "8", "--seed", "2", "--steps", "300", "--rank-cap", "3,3",
            "--plots", "plots", "--features-out", "z.csv", "--output", "train.json",
        ],
    );
    let r = report_without_timings(&d.join("train.json"));
    assert_eq!(r["checks"]["trajectory_non_decreasing"], true);
    assert!(r["results"]["between_class_coherence"].as_f64().unwrap() <= 1e-2);
    let curve = std::fs::read_to_string(d.join("plots/delta_r_trajectory.csv")).unwrap();
    assert!(curve.starts_with("x,y\n"));
    assert_eq!(curve.lines().count(), 302);
    let z = io::load_matrix(&d.join("z.csv"), false).unwrap();
    assert_eq!((z.n(), z.m()), (8, 200));
}

#[test]
fn gen_with_outliers_reports_their_count() {
    let (_guard, d) = fixture();
    let out = ratecode(
        &d,
        &["gen", "--spec-file", "spec.toml", "--samples", "50", "--outlier-fraction", "0.1", "--data-out", "o.csv"],
    );
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["results"]["outliers"], 5);
    assert_eq!(v["results"]["label_counts"].as_array().unwrap().iter().map(|c| c.as_u64().unwrap()).sum::<u64>(), 50);
}

#[test]
fn seed_flag_overrides_spec_seed() {
    let (_guard, d) = fixture();
    ratecode(&d, &["gen", "--spec-file", "spec.toml", "--samples", "20", "--seed", "9", "--data-out", "a.csv"]);
    let mut spec: MixtureSpec = toml::from_str(BLOBS).unwrap();
    spec.seed = 9;
    let (w, _) = sample_mixture(&spec, 20).unwrap();
    assert_eq!(io::load_matrix(&d.join("a.csv"), false).unwrap(), w);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn matrices_round_trip_through_csv(seed in any::<u64>(), n in 1usize..6, m in 1usize..20) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.csv");
        let mut rng = Rng::new(seed);
        let w = data(rng.normal_matrix(n, m) * 10f64.powi(rng.below(20) as i32 - 10));
        io::save_matrix(&path, &w).unwrap();
        prop_assert_eq!(io::load_matrix(&path, false).unwrap(), w);
    }
}
