use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_medbma");

fn medbma(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) {
    let out = medbma(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{}: {e}", dir.join(name).display()))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Synthetic data plus a short fit of it.
fn fitted(tmp: &Path) -> (PathBuf, PathBuf) {
    let data_dir = tmp.join("data");
    ok(&["simulate", "--study", "data", "--scenario", "I", "--n", "300", "--seed", "3", "--out", s(&data_dir)]);
    let fit_dir = tmp.join("fit");
    ok(&[
        "fit", "--data", s(&data_dir.join("data.csv")), "--out", s(&fit_dir), "--iterations", "3000",
        "--burn-in", "1000", "--anneal-evaluations", "2000", "--seed", "11",
    ]);
    (data_dir.join("data.csv"), fit_dir)
}

#[test]
fn fit_pipeline_outputs_and_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let (data, fit_dir) = fitted(tmp.path());
    let models = read(&fit_dir, "model_probs.csv");
    assert!(models.starts_with("family,model,probability\n"));
    assert_eq!(models.lines().count(), 24);
    let coefs = read(&fit_dir, "coefficients.csv");
    assert_eq!(coefs.lines().count(), 13);
    let draws = read(&fit_dir, "draws.csv");
    assert_eq!(draws.lines().count(), 1 + 2 * 2000);

    // same flags, fresh directory
    let again = tmp.path().join("fit2");
    ok(&[
        "fit", "--data", s(&data), "--out", s(&again), "--iterations", "3000", "--burn-in", "1000",
        "--anneal-evaluations", "2000", "--seed", "11", "--threads", "1",
    ]);
    for f in ["draws.csv", "coefficients.csv", "model_probs.csv", "prior_probs.csv", "psi.csv"] {
        assert_eq!(read(&fit_dir, f), read(&again, f), "{f}");
    }

    // the manifest alone reproduces the run
    let replay = tmp.path().join("fit3");
    ok(&["fit", "--config", s(&fit_dir.join("manifest.txt")), "--out", s(&replay)]);
    assert_eq!(read(&fit_dir, "draws.csv"), read(&replay, "draws.csv"));
    assert!(!read(&fit_dir, "manifest.txt").contains("time"));

    let rr = tmp.path().join("rr");
    ok(&[
        "riskratio", "--draws", s(&fit_dir.join("draws.csv")), "--data", s(&data), "--out", s(&rr),
        "--grid-points", "10", "--landmark", "1.2", "--max-draws", "200",
    ]);
    let lrr = read(&rr, "lrr_curves.csv");
    assert_eq!(lrr.lines().count(), 1 + 3 * 10);
    for line in lrr.lines().skip(1) {
        let err: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert!(err < 1e-12, "{line}");
    }
    assert_eq!(read(&rr, "medprop_curves.csv").lines().count(), 11);

    let pw = tmp.path().join("pw");
    let draws_path = fit_dir.join("draws.csv");
    let frame = tmp.path().join("frame.csv");
    let frame_text: String = read(data.parent().unwrap(), "data.csv")
        .lines()
        .map(|l| l.split(',').take(2).collect::<Vec<_>>().join(",") + "\n")
        .collect();
    std::fs::write(&frame, frame_text).unwrap();
    let pw_args = [
        "power", "--draws", s(&draws_path), "--frame", s(&frame), "--landmark", "1.2",
        "--max-draws", "100", "--seed", "5", "--out", s(&pw),
    ];
    ok(&pw_args);
    let power = read(&pw, "power.csv");
    let row: Vec<&str> = power.lines().nth(1).unwrap().split(',').collect();
    let p: f64 = row[0].parse().unwrap();
    assert!((0.0..=1.0).contains(&p));
    assert_eq!(row[1], "100");
    let first = read(&pw, "power_pvalues.csv");
    ok(&pw_args);
    assert_eq!(first, read(&pw, "power_pvalues.csv"));

    let interim = tmp.path().join("interim");
    let out = medbma(&[
        "power", "--draws", s(&draws_path), "--frame", s(&frame), "--landmark", "1.2",
        "--mode", "interim_completion", "--max-draws", "20", "--out", s(&interim),
    ]);
    assert_eq!(out.status.code(), Some(2), "interim mode without data is an input error");
}

#[test]
fn equal_priors_give_uniform_model_prior() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("cal");
    ok(&["calibrate-priors", "--equal-priors", "--out", s(&out), "--anneal-evaluations", "5000"]);
    let table = read(&out, "prior_probs.csv");
    let mut counts = (0, 0);
    for line in table.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let prior: f64 = f[3].parse().unwrap();
        let expect = if f[0] == "response" { counts.0 += 1; 0.2 } else { counts.1 += 1; 1.0 / 18.0 };
        assert!((prior - expect).abs() < 1e-6, "{line}");
    }
    assert_eq!(counts, (5, 18));
}

#[test]
fn config_file_with_flag_override() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.cfg");
    std::fs::write(&cfg, "# data only\nstudy = data\nscenario = II\nn = 40\nseed = 4\n").unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    ok(&["simulate", "--config", s(&cfg), "--out", s(&a)]);
    ok(&["simulate", "--config", s(&cfg), "--out", s(&b), "--n", "20"]);
    assert_eq!(read(&a, "data.csv").lines().count(), 41);
    assert_eq!(read(&b, "data.csv").lines().count(), 21);
    assert!(read(&b, "manifest.txt").contains("n = 20"));

    std::fs::write(&cfg, "study = data\nscenario = II\nbogus_key = 1\n").unwrap();
    let out = medbma(&["simulate", "--config", s(&cfg), "--out", s(&a)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus-key"));
}

#[test]
fn input_errors_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = medbma(&["fit", "--data", "/no/such/file.csv", "--out", s(tmp.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/no/such/file.csv"));

    let out = medbma(&["simulate", "--scenario", "VII", "--out", s(tmp.path())]);
    assert_eq!(out.status.code(), Some(2));

    let out = medbma(&["simulate", "--scenario", "I", "--study", "data", "--n", "7", "--out", s(tmp.path())]);
    assert_eq!(out.status.code(), Some(2));

    assert_eq!(medbma(&["fit", "--no-such-flag"]).status.code(), Some(2));
    assert_eq!(medbma(&["--threads", "0", "calibrate-priors", "--equal-priors"]).status.code(), Some(2));
}

#[test]
fn simulate_recovery_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |dir: &Path| {
        ok(&[
            "simulate", "--scenario", "IV", "--n", "200", "--reps", "2", "--seed", "7", "--iterations", "1500",
            "--burn-in", "500", "--anneal-evaluations", "1000", "--population", "2000", "--grid-points", "5",
            "--curve-draws", "50", "--out", s(dir),
        ])
    };
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run(&a);
    run(&b);
    for f in ["coef_summary.csv", "model_probs.csv", "lrr_curves.csv", "medprop_curves.csv", "failures.csv"] {
        assert_eq!(read(&a, f), read(&b, f), "{f}");
    }
    let settings = |d: &Path| read(d, "manifest.txt").lines().filter(|l| !l.starts_with("out =")).collect::<Vec<_>>().join("\n");
    assert_eq!(settings(&a), settings(&b));
    assert_eq!(read(&a, "coef_summary.csv").lines().count(), 13);
    assert_eq!(read(&a, "model_probs.csv").lines().count(), 24);
}
