//! End-to-end tests of the `certbound` binary: exit codes, JSON report
//! shapes (read back through the crate's own reader types), and the
//! worker-count invariance of experiment artifacts.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use certbound_cli::experiment::{Summary, CSV_HEADER};
use certbound_cli::report::{MatrixCertifyReport, SpectralReport, VectorCertifyReport};
use certbound_core::rng::stream_rng;
use certbound_core::solvers::{sensing_matrix, Ensemble};
use certbound_core::{linalg, DenseMatrix};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_certbound")
}

fn run_with_env(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(bin());
    cmd.args(args);
    cmd.env_remove("CERTBOUND_WORKERS");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn run(args: &[&str]) -> Output {
    run_with_env(args, &[])
}

fn stdout_str(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("stdout is UTF-8")
}

fn stderr_str(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).expect("stderr is UTF-8")
}

fn write_vector_csv(path: &Path, values: &[f64]) {
    let m = DenseMatrix::from_column_slice(values.len(), 1, values);
    linalg::write_matrix_csv(path, &m).unwrap();
}

fn tmp() -> tempfile::TempDir {
    tempfile::tempdir().unwrap()
}

#[test]
fn spectral_exact_reports_min_column_norm() {
    let dir = tmp();
    let matrix = dir.path().join("a.csv");
    // Columns have norms 5, 2, 0.5; over single columns sigma_min is 0.5.
    let a = DenseMatrix::from_row_slice(2, 3, &[3.0, 0.0, 0.5, 4.0, 2.0, 0.0]);
    linalg::write_matrix_csv(&matrix, &a).unwrap();

    let out = run(&[
        "spectral",
        "--matrix",
        matrix.to_str().unwrap(),
        "--quantity",
        "sigma-min",
        "--p",
        "1",
        "--mode",
        "exact",
    ]);
    assert!(out.status.success(), "stderr: {}", stderr_str(&out));
    let text = stdout_str(&out);
    assert!(text.contains("\"mode\": \"exact\""));
    let report: SpectralReport = serde_json::from_str(&text).unwrap();
    assert!((report.certificate.value - 0.5).abs() < 1e-12);
    assert_eq!(report.certificate.order, 1);
    assert_eq!(report.schema_version, 1);
    assert_eq!(report.inputs.len(), 1);
    assert_eq!(report.inputs[0].sha256.len(), 64);
    assert_eq!(report.params.quantity, "sigma-min");
}

#[test]
fn spectral_gaussian_closed_form() {
    let out = run(&[
        "spectral",
        "--quantity",
        "sigma-min",
        "--mode",
        "gaussian",
        "--n",
        "100",
        "--p",
        "25",
        "--t",
        "0.1",
    ]);
    assert!(out.status.success(), "stderr: {}", stderr_str(&out));
    let report: SpectralReport = serde_json::from_str(&stdout_str(&out)).unwrap();
    // 1 - sqrt(25/100) - 0.1 and exp(-100 * 0.01 / 2).
    assert!((report.certificate.value - 0.4).abs() < 1e-12);
    assert!((report.certificate.failure_probability - 0.6065306597126334).abs() < 1e-12);
    assert!(report.inputs.is_empty());
}

#[test]
fn missing_matrix_file_exits_1() {
    let out = run(&[
        "spectral",
        "--matrix",
        "/nonexistent/never.csv",
        "--quantity",
        "sigma-min",
        "--p",
        "2",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_str(&out).contains("error"));
}

#[test]
fn unknown_flag_exits_1_and_help_exits_0() {
    let out = run(&["spectral", "--nonsense"]);
    assert_eq!(out.status.code(), Some(1));
    let help = run(&["--help"]);
    assert_eq!(help.status.code(), Some(0));
    assert!(stdout_str(&help).contains("certbound"));
}

#[test]
fn budget_exhaustion_exits_2_with_hint() {
    let dir = tmp();
    let matrix = dir.path().join("wide.csv");
    let a = sensing_matrix(4, 12, Ensemble::GaussianOneOverN, &mut stream_rng(5, 0)).unwrap();
    linalg::write_matrix_csv(&matrix, &a).unwrap();

    let out = run(&[
        "spectral",
        "--matrix",
        matrix.to_str().unwrap(),
        "--quantity",
        "sigma-min",
        "--p",
        "4",
        "--budget",
        "10",
    ]);
    assert_eq!(out.status.code(), Some(2), "stderr: {}", stderr_str(&out));
    assert!(stderr_str(&out).contains("hint"));
}

#[test]
fn domain_violations_exit_3() {
    let dir = tmp();
    let matrix = dir.path().join("a.csv");
    let a = sensing_matrix(4, 8, Ensemble::GaussianOneOverN, &mut stream_rng(6, 0)).unwrap();
    linalg::write_matrix_csv(&matrix, &a).unwrap();
    let cand = dir.path().join("x.csv");
    write_vector_csv(&cand, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);

    // m = 8 with k = 4 breaks m > 2k; the enumeration of 8-column subsets
    // of a rank-4 matrix fails even earlier. Either way: exit 3.
    let out = run(&[
        "certify",
        "vector",
        "--matrix",
        matrix.to_str().unwrap(),
        "--candidate",
        cand.to_str().unwrap(),
        "--k",
        "4",
    ]);
    assert_eq!(out.status.code(), Some(3), "stderr: {}", stderr_str(&out));
}

#[test]
fn exactly_sparse_candidate_certifies_to_zero() {
    let dir = tmp();
    let matrix = dir.path().join("a.csv");
    let a = sensing_matrix(4, 8, Ensemble::GaussianOneOverN, &mut stream_rng(7, 0)).unwrap();
    linalg::write_matrix_csv(&matrix, &a).unwrap();
    let cand = dir.path().join("x.csv");
    write_vector_csv(&cand, &[1.5, 0.0, 0.0, -2.0, 0.0, 0.0, 0.0, 0.0]);
    let out_path = dir.path().join("report.json");

    let out = run(&[
        "certify",
        "vector",
        "--matrix",
        matrix.to_str().unwrap(),
        "--candidate",
        cand.to_str().unwrap(),
        "--k",
        "2",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", stderr_str(&out));
    let report: VectorCertifyReport = serde_json::from_str(&stdout_str(&out)).unwrap();
    assert_eq!(report.report.bound, 0.0);
    assert_eq!(report.report.bound_squared, Some(0.0));
    assert!(report.report.certified);
    assert_eq!(report.delta_resid_measured, 0.0);
    assert_eq!(report.report.alpha, 0.0);

    // The --out copy parses back through the same reader.
    let from_file: VectorCertifyReport =
        serde_json::from_str(&fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(from_file.report.bound, 0.0);
    assert_eq!(from_file.inputs.len(), 2);
}

fn unit_column_instance(dir: &Path) -> (PathBuf, PathBuf) {
    let matrix = dir.join("unit.csv");
    let a = sensing_matrix(12, 20, Ensemble::GaussianUnitColumns, &mut stream_rng(8, 0)).unwrap();
    linalg::write_matrix_csv(&matrix, &a).unwrap();
    let cand = dir.join("x.csv");
    let mut x = vec![0.0; 20];
    x[3] = 0.9;
    x[11] = 0.4;
    x[17] = -0.2;
    write_vector_csv(&cand, &x);
    (matrix, cand)
}

#[test]
fn unit_columns_expose_loose_baseline_and_comparison() {
    let dir = tmp();
    let (matrix, cand) = unit_column_instance(dir.path());
    let out = run(&[
        "certify",
        "vector",
        "--matrix",
        matrix.to_str().unwrap(),
        "--candidate",
        cand.to_str().unwrap(),
        "--k",
        "1",
        "--ric",
    ]);
    assert!(out.status.success(), "stderr: {}", stderr_str(&out));
    let report: VectorCertifyReport = serde_json::from_str(&stdout_str(&out)).unwrap();
    let loose = report.report.baseline_loose.expect("unit columns: baseline applies");
    assert!(report.report.bound > 0.0);
    assert!(report.report.bound < loose);
    assert_eq!(report.bound_below_loose, Some(true));
    // The defect restatement is present and no tighter than the direct form.
    let ric = report.report.ric_form.expect("--ric fills the restatement");
    assert!(report.report.bound <= ric * (1.0 + 1e-12));
    assert!(report.report.certified);
}

#[test]
fn sampled_sigma_is_uncertified_with_caveat() {
    let dir = tmp();
    let (matrix, cand) = unit_column_instance(dir.path());
    let out = run(&[
        "certify",
        "vector",
        "--matrix",
        matrix.to_str().unwrap(),
        "--candidate",
        cand.to_str().unwrap(),
        "--k",
        "1",
        "--mode",
        "sampled",
        "--trials",
        "64",
        "--seed",
        "9",
    ]);
    assert!(out.status.success(), "stderr: {}", stderr_str(&out));
    let report: VectorCertifyReport = serde_json::from_str(&stdout_str(&out)).unwrap();
    assert!(!report.report.certified);
    assert!(report.report.notes.iter().any(|n| n.contains("sampled")));
    assert_eq!(report.sigma_mode, "sampled");
}

#[test]
fn matrix_certify_with_supplied_constants_hits_known_value() {
    let dir = tmp();
    let op_path = dir.path().join("op.csv");
    // The plain vectorization operator on 4x4 inputs: matricized identity.
    linalg::write_matrix_csv(&op_path, &DenseMatrix::identity(16, 16)).unwrap();
    // Default sidecar location: <operator>.meta.json.
    fs::write(
        dir.path().join("op.csv.meta.json"),
        "{\"n1\": 4, \"n2\": 4, \"m\": 16}\n",
    )
    .unwrap();
    let cand_path = dir.path().join("x.csv");
    let mut x = DenseMatrix::zeros(4, 4);
    x[(0, 0)] = 1.0;
    x[(1, 1)] = 0.1;
    x[(2, 2)] = 0.1;
    x[(3, 3)] = 0.1;
    linalg::write_matrix_csv(&cand_path, &x).unwrap();

    let out = run(&[
        "certify",
        "matrix",
        "--operator",
        op_path.to_str().unwrap(),
        "--candidate",
        cand_path.to_str().unwrap(),
        "--r",
        "1",
        "--delta1",
        "0",
        "--delta2r",
        "0",
    ]);
    assert!(out.status.success(), "stderr: {}", stderr_str(&out));
    let report: MatrixCertifyReport = serde_json::from_str(&stdout_str(&out)).unwrap();
    // n = 4, r = 1, alpha = 0.1, both defects 0:
    // bound^2 = (1 + (n-2r)) * (n-2r) * alpha^2 = 3 * 2 * 0.01 = 0.06.
    let squared = report.report.bound_squared.expect("consistent candidate");
    assert!((squared - 0.06).abs() < 1e-12, "got {squared}");
    assert!((report.report.bound - 0.06f64.sqrt()).abs() < 1e-12);
    assert!(report.report.certified);
    assert!(report.constants_supplied);
    assert!(report
        .report
        .notes
        .iter()
        .any(|n| n.contains("supplied")));
    assert_eq!((report.n1, report.n2, report.m), (4, 4, 16));
}

fn write_experiment_config(path: &Path, seed: u64, trials: u64) {
    let config = format!(
        r#"{{
  "instance": {{"kind": "vector", "n": 10, "m": 20, "k": 2,
               "noise_sigma": 0.0, "ensemble": "gaussian_1_over_n", "seed": {seed}}},
  "solver": {{"kind": "null_perturb", "scale": 0.1}},
  "trials": {trials}
}}"#
    );
    fs::write(path, config).unwrap();
}

#[test]
fn experiment_campaign_is_sound_and_worker_invariant() {
    let dir = tmp();
    let config = dir.path().join("config.json");
    write_experiment_config(&config, 3, 40);

    let out_one = dir.path().join("run1");
    let out = run(&[
        "experiment",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_one.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", stderr_str(&out));

    let summary: Summary =
        serde_json::from_str(&fs::read_to_string(out_one.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary.ok_trials, 40);
    assert_eq!(summary.violations, 0);
    assert_eq!(summary.workers, 1);
    assert_eq!(summary.config_sha256.len(), 64);
    let tightness = summary.tightness.expect("positive errors");
    assert!(tightness.min >= 1.0 - 1e-9);

    let csv_one = fs::read_to_string(out_one.join("trials.csv")).unwrap();
    assert!(csv_one.starts_with(CSV_HEADER));
    assert_eq!(csv_one.lines().count(), 41);

    // Same seed, different worker count: byte-identical CSV.
    let out_four = dir.path().join("run4");
    let rerun = run_with_env(
        &[
            "experiment",
            "--config",
            config.to_str().unwrap(),
            "--out",
            out_four.to_str().unwrap(),
        ],
        &[("CERTBOUND_WORKERS", "4")],
    );
    assert!(rerun.status.success(), "stderr: {}", stderr_str(&rerun));
    let csv_four = fs::read_to_string(out_four.join("trials.csv")).unwrap();
    assert_eq!(csv_one, csv_four);
    let summary4: Summary =
        serde_json::from_str(&fs::read_to_string(out_four.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary4.workers, 4);
}

#[test]
fn falsely_supplied_constants_trigger_violations_and_exit_4() {
    // A gaussian measurement operator is nowhere near an isometry; claiming
    // zero defects produces certified-looking bounds that real null-space
    // perturbations blow through. The harness must catch and report that.
    let dir = tmp();
    let config = dir.path().join("bad.json");
    fs::write(
        &config,
        r#"{
  "instance": {"kind": "matrix", "n1": 3, "n2": 3, "m": 6, "r": 1,
               "noise_sigma": 0.0, "ensemble": "gaussian_1_over_n", "seed": 17},
  "solver": {"kind": "null_perturb", "scale": 10.0},
  "trials": 20,
  "known_delta1": 0.0,
  "known_delta2r": 0.0
}"#,
    )
    .unwrap();

    let out_dir = dir.path().join("run");
    let out = run(&[
        "experiment",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(4), "stderr: {}", stderr_str(&out));
    let summary: Summary =
        serde_json::from_str(&fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    assert!(summary.violations > 0);
    let csv = fs::read_to_string(out_dir.join("trials.csv")).unwrap();
    assert!(csv.lines().skip(1).any(|l| l.ends_with(",true")));
}

#[test]
fn experiment_rejects_bad_config_with_parse_exit() {
    let dir = tmp();
    let config = dir.path().join("typo.json");
    fs::write(
        &config,
        r#"{"instance": {"kind": "vector", "n": 10, "m": 20, "k": 2,
            "noise_sigma": 0.0, "ensemble": "gaussian_1_over_n", "seed": 1},
            "solver": {"kind": "omp", "steps": 4}, "trials": 2, "unknown_knob": 1}"#,
    )
    .unwrap();
    let out = run(&[
        "experiment",
        "--config",
        config.to_str().unwrap(),
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1), "stderr: {}", stderr_str(&out));
}
