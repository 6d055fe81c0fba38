//! Black-box tests of the `klda` binary: exit codes, file round trips,
//! determinism of the pipelines.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn klda(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_klda"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("spawn klda")
}

fn assert_code(out: &Output, code: i32, context: &str) {
    assert_eq!(
        out.status.code(),
        Some(code),
        "{context}: stdout={} stderr={}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn help_and_usage_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_code(&klda(&["--help"], dir.path()), 0, "--help");
    assert_code(&klda(&["frobnicate"], dir.path()), 1, "unknown subcommand");
    assert_code(
        &klda(&["simulate", "--model", "9"], dir.path()),
        1,
        "missing/invalid flags",
    );
}

#[test]
fn model3_dimension_restriction_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = klda(
        &["simulate", "--model", "3", "--r", "16", "--c", "64", "--seed", "1", "--out-prefix", "x"],
        dir.path(),
    );
    assert_code(&out, 1, "model 3 with r=16, c=64");
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("positive definite"), "stderr: {msg}");
}

#[test]
fn missing_files_are_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_code(
        &klda(
            &["fit", "--train", "nope.kld", "--lambda1", "0", "--lambda2", "0", "--out", "m.json"],
            dir.path(),
        ),
        2,
        "missing training file",
    );
    assert_code(
        &klda(&["predict", "--model", "nope.json", "--data", "nope.kld", "--out", "p.csv"], dir.path()),
        2,
        "missing model file",
    );
}

#[test]
fn simulate_writes_expected_sample_sizes() {
    let dir = tempfile::tempdir().unwrap();
    let out = klda(
        &["simulate", "--model", "1", "--r", "8", "--c", "8", "--seed", "7", "--out-prefix", "m1"],
        dir.path(),
    );
    assert_code(&out, 0, "simulate");
    for (name, n) in [("m1.train.kld", 75), ("m1.validate.kld", 75), ("m1.test.kld", 1000)] {
        let text = fs::read_to_string(dir.path().join(name)).unwrap();
        let header: Vec<&str> = text.lines().next().unwrap().split_whitespace().collect();
        assert_eq!(header[0], "KLDA1");
        assert_eq!(header[1], n.to_string());
    }
}

#[test]
fn dataset_write_read_write_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    assert_code(
        &klda(
            &["simulate", "--model", "2", "--r", "5", "--c", "6", "--seed", "3", "--out-prefix", "d"],
            dir.path(),
        ),
        0,
        "simulate",
    );
    // Re-simulating with the same seed is the round trip at the pipeline
    // level; byte-identical files.
    assert_code(
        &klda(
            &["simulate", "--model", "2", "--r", "5", "--c", "6", "--seed", "3", "--out-prefix", "e"],
            dir.path(),
        ),
        0,
        "re-simulate",
    );
    for suffix in ["train.kld", "validate.kld", "test.kld", "truth.json"] {
        let a = fs::read(dir.path().join(format!("d.{suffix}"))).unwrap();
        let b = fs::read(dir.path().join(format!("e.{suffix}"))).unwrap();
        assert_eq!(a, b, "{suffix} differs across identical invocations");
    }
}

#[test]
fn zero_penalty_fit_recovers_sample_means_via_model_file() {
    let dir = tempfile::tempdir().unwrap();
    assert_code(
        &klda(
            &["simulate", "--model", "1", "--r", "4", "--c", "4", "--seed", "11", "--out-prefix", "s"],
            dir.path(),
        ),
        0,
        "simulate",
    );
    assert_code(
        &klda(
            &[
                "fit",
                "--train",
                "s.train.kld",
                "--lambda1",
                "0",
                "--lambda2",
                "0",
                "--out",
                "mle.json",
            ],
            dir.path(),
        ),
        0,
        "fit",
    );

    // Recompute the class means from the dataset text and compare.
    let text = fs::read_to_string(dir.path().join("s.train.kld")).unwrap();
    let mut lines = text.lines();
    let header: Vec<usize> = lines
        .next()
        .unwrap()
        .split_whitespace()
        .skip(1)
        .map(|t| t.parse().unwrap())
        .collect();
    let (n, r, c, j) = (header[0], header[1], header[2], header[3]);
    let mut sums = vec![vec![0.0f64; r * c]; j];
    let mut counts = vec![0usize; j];
    for _ in 0..n {
        let toks: Vec<&str> = lines.next().unwrap().split_whitespace().collect();
        let label: usize = toks[0].parse().unwrap();
        counts[label - 1] += 1;
        for (k, t) in toks[1..].iter().enumerate() {
            sums[label - 1][k] += t.parse::<f64>().unwrap();
        }
    }
    let model: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("mle.json")).unwrap()).unwrap();
    for (k, sum) in sums.iter().enumerate() {
        let mean = &model["means"][k];
        for i in 0..r {
            for l in 0..c {
                let expect = sum[i * c + l] / counts[k] as f64;
                let got = mean[i][l].as_f64().unwrap();
                assert!(
                    (got - expect).abs() <= 1e-10 * expect.abs().max(1.0),
                    "class {k} entry ({i},{l}): {got} vs {expect}"
                );
            }
        }
    }
    // Trace sidecar exists and is monotone.
    let trace = fs::read_to_string(dir.path().join("mle.json.trace")).unwrap();
    let vals: Vec<f64> = trace.lines().map(|l| l.parse().unwrap()).collect();
    assert!(vals.len() >= 2);
    for w in vals.windows(2) {
        assert!(w[1] <= w[0] + 1e-8);
    }
}

#[test]
fn predict_csv_is_consistent_with_reported_rate() {
    let dir = tempfile::tempdir().unwrap();
    assert_code(
        &klda(
            &["simulate", "--model", "1", "--r", "4", "--c", "4", "--seed", "5", "--out-prefix", "p"],
            dir.path(),
        ),
        0,
        "simulate",
    );
    assert_code(
        &klda(
            &["fit", "--train", "p.train.kld", "--lambda1", "0", "--lambda2", "0", "--out", "m.json"],
            dir.path(),
        ),
        0,
        "fit",
    );
    let out = klda(
        &["predict", "--model", "m.json", "--data", "p.test.kld", "--out", "pred.csv"],
        dir.path(),
    );
    assert_code(&out, 0, "predict");
    let stdout = String::from_utf8_lossy(&out.stdout);
    let reported: f64 = stdout
        .lines()
        .find_map(|l| l.strip_prefix("misclassification_rate "))
        .expect("rate line")
        .parse()
        .unwrap();

    let csv = fs::read_to_string(dir.path().join("pred.csv")).unwrap();
    let mut total = 0usize;
    let mut wrong = 0usize;
    for line in csv.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        total += 1;
        if cols[1] != cols[2] {
            wrong += 1;
        }
    }
    assert!((reported - wrong as f64 / total as f64).abs() < 1e-12);
}

#[test]
fn predict_handles_unlabeled_data() {
    let dir = tempfile::tempdir().unwrap();
    assert_code(
        &klda(
            &["simulate", "--model", "1", "--r", "4", "--c", "4", "--seed", "9", "--out-prefix", "u"],
            dir.path(),
        ),
        0,
        "simulate",
    );
    assert_code(
        &klda(
            &["fit", "--train", "u.train.kld", "--lambda1", "0", "--lambda2", "0", "--out", "m.json"],
            dir.path(),
        ),
        0,
        "fit",
    );
    // Strip the labels (set to 0).
    let text = fs::read_to_string(dir.path().join("u.test.kld")).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().to_string();
    let mut unlabeled = header + "\n";
    for line in lines {
        let rest = line.split_once(' ').unwrap().1;
        unlabeled.push_str("0 ");
        unlabeled.push_str(rest);
        unlabeled.push('\n');
    }
    fs::write(dir.path().join("unlabeled.kld"), unlabeled).unwrap();

    let out = klda(
        &["predict", "--model", "m.json", "--data", "unlabeled.kld", "--out", "un.csv"],
        dir.path(),
    );
    assert_code(&out, 0, "predict unlabeled");
    assert!(!String::from_utf8_lossy(&out.stdout).contains("misclassification_rate"));
    let csv = fs::read_to_string(dir.path().join("un.csv")).unwrap();
    let first = csv.lines().nth(1).unwrap();
    assert_eq!(first.split(',').nth(1).unwrap(), "NA");
}

#[test]
fn dimension_mismatch_between_model_and_data() {
    let dir = tempfile::tempdir().unwrap();
    for (prefix, r) in [("a", "4"), ("b", "5")] {
        assert_code(
            &klda(
                &[
                    "simulate", "--model", "1", "--r", r, "--c", "4", "--seed", "2",
                    "--out-prefix", prefix,
                ],
                dir.path(),
            ),
            0,
            "simulate",
        );
    }
    assert_code(
        &klda(
            &["fit", "--train", "a.train.kld", "--lambda1", "0", "--lambda2", "0", "--out", "m.json"],
            dir.path(),
        ),
        0,
        "fit",
    );
    assert_code(
        &klda(
            &["predict", "--model", "m.json", "--data", "b.test.kld", "--out", "x.csv"],
            dir.path(),
        ),
        2,
        "mismatched dims",
    );
}

#[test]
fn bench_shape_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "bench", "--model", "1", "--dims", "8x8", "--reps", "2", "--seed", "77",
        "--grid", "0,0.5", "--out", "b1.tsv",
    ];
    assert_code(&klda(&args, dir.path()), 0, "bench");
    let mut args2 = args;
    args2[args.len() - 1] = "b2.tsv";
    assert_code(&klda(&args2, dir.path()), 0, "bench again");
    let a = fs::read(dir.path().join("b1.tsv")).unwrap();
    let b = fs::read(dir.path().join("b2.tsv")).unwrap();
    assert_eq!(a, b, "bench output not deterministic");

    let text = String::from_utf8(a).unwrap();
    let body: Vec<&str> =
        text.lines().filter(|l| !l.starts_with('#') && !l.starts_with("method")).collect();
    assert_eq!(body.len(), 4, "2 reps x 2 methods");
    let aggs: Vec<&str> = text.lines().filter(|l| l.starts_with("#agg")).collect();
    assert_eq!(aggs.len(), 2);
}

#[test]
fn cross_validated_fit_runs() {
    let dir = tempfile::tempdir().unwrap();
    assert_code(
        &klda(
            &["simulate", "--model", "1", "--r", "4", "--c", "4", "--seed", "13", "--out-prefix", "cv"],
            dir.path(),
        ),
        0,
        "simulate",
    );
    let out = klda(
        &[
            "fit", "--train", "cv.train.kld", "--cv", "3", "--grid", "0,0.1",
            "--out", "cvm.json",
        ],
        dir.path(),
    );
    assert_code(&out, 0, "cv fit");
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("chosen lambda1"), "stderr: {stderr}");
}

#[test]
fn config_file_is_applied_with_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("cfg.json"),
        r#"{ "max_outer_iter": 1, "grid": "0,0.25" }"#,
    )
    .unwrap();
    assert_code(
        &klda(
            &["simulate", "--model", "1", "--r", "4", "--c", "4", "--seed", "21", "--out-prefix", "c"],
            dir.path(),
        ),
        0,
        "simulate",
    );
    // max_outer_iter = 1 forces non-convergence, recorded in the model file.
    let out = klda(
        &[
            "--config", "cfg.json", "fit", "--train", "c.train.kld", "--lambda1", "0.1",
            "--lambda2", "0.1", "--out", "m.json",
        ],
        dir.path(),
    );
    assert_code(&out, 0, "non-converged fit still exits 0");
    assert!(String::from_utf8_lossy(&out.stderr).contains("did not converge"));
    let model: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("m.json")).unwrap()).unwrap();
    assert_eq!(model["fit"]["converged"], serde_json::Value::Bool(false));
}
