use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn ngmres(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ngmres"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn sweep_is_byte_identical_across_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let out = ngmres(&[
            "sweep",
            "--trials",
            "40",
            "--radius",
            "0.4",
            "--seed",
            "42",
            "--m",
            "1",
            "--out",
            dir.path().to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    }
    for file in ["history.csv", "summary.csv"] {
        let x = fs::read(a.path().join(file)).unwrap();
        let y = fs::read(b.path().join(file)).unwrap();
        assert!(!x.is_empty());
        assert_eq!(x, y, "{file} differs");
    }
}

#[test]
fn summary_iterations_match_history_lengths() {
    let dir = tempfile::tempdir().unwrap();
    let out = ngmres(&[
        "sweep",
        "--trials",
        "5",
        "--radius",
        "0.4",
        "--seed",
        "3",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let history = read_csv(&dir.path().join("history.csv"));
    let summary = read_csv(&dir.path().join("summary.csv"));
    assert_eq!(
        history[0],
        [
            "trial",
            "k",
            "res_norm",
            "q_factor",
            "root_factor",
            "sum_abs_beta",
            "ls_ratio"
        ]
    );
    assert_eq!(
        summary[0][..4],
        ["trial", "status", "iterations", "g_evals"]
    );
    for row in &summary[1..] {
        let rows = history[1..].iter().filter(|h| h[0] == row[0]).count();
        assert_eq!(row[2].parse::<usize>().unwrap(), rows - 1);
        assert_eq!(row[1], "converged");
    }
    // Factors are undefined at k = 0.
    let first = &history[1];
    assert_eq!(first[1], "0");
    assert!(first[3].is_empty() && first[4].is_empty());
}

#[test]
fn compare_case2_fp_terminates_last() {
    let dir = tempfile::tempdir().unwrap();
    let out = ngmres(&[
        "compare",
        "--c1",
        "1",
        "--c2",
        "1",
        "--method",
        "fp",
        "--method",
        "ngmres",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let table = read_csv(&dir.path().join("compare.csv"));
    assert_eq!(table[0], ["k", "fp", "ngmres(0)"]);
    let last = table.last().unwrap();
    assert!(!last[1].is_empty());
    assert!(last[2].is_empty());
}

#[test]
fn compare_case3_window_sizes() {
    let out = ngmres(&[
        "compare", "--c1", "1", "--c2", "2", "--method", "ngmres", "--m", "0", "--m", "1",
    ]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().map(|l| l.split(',').collect()).collect();
    assert_eq!(rows[0], ["k", "ngmres(0)", "ngmres(1)"]);
    let m1_final: f64 = rows
        .iter()
        .skip(1)
        .rev()
        .find_map(|r| r[2].parse().ok())
        .unwrap();
    assert!(m1_final <= 1e-14);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.json");
    fs::write(
        &config,
        r#"{
            "problem": {"name": "trigonometric", "s": 10},
            "method": "ngmres",
            "m": 2,
            "x0": {"kind": "sphere", "radius": 0.1, "center": [0.7853981633974483], "seed": 9},
            "trials": 3
        }"#,
    )
    .unwrap();
    let out = ngmres(&[
        "sweep",
        "--config",
        config.to_str().unwrap(),
        "--trials",
        "2",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 3);

    fs::write(
        &config,
        r#"{"problem": {"name": "trigonometric"}, "method": "ngmres"}"#,
    )
    .unwrap();
    let out = ngmres(&["sweep", "--config", config.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("line"));
}

#[test]
fn diagnose_emits_report_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = ngmres(&["diagnose", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let eta = report["eta_bound"].as_f64().unwrap();
    assert!((eta - 14.0 / 15.0).abs() < 1e-12);
    assert_eq!(report["q_bound_satisfied"], serde_json::Value::Bool(true));
    assert!(dir.path().join("diagnostics.json").exists());
}

#[test]
fn exit_codes() {
    assert_eq!(code(&ngmres(&["solve", "--method", "bogus"])), 1);
    assert_eq!(code(&ngmres(&["solve", "--problem", "rosenbrock"])), 1);
    assert_eq!(code(&ngmres(&["solve", "--x0", "1,2,3"])), 1);
    assert_eq!(
        code(&ngmres(&["sweep", "--trials", "0", "--radius", "0.4"])),
        1
    );
    assert_eq!(code(&ngmres(&["solve", "--radius", "-1"])), 1);
    assert_eq!(
        code(&ngmres(&[
            "compare",
            "--c1",
            "1",
            "--problem",
            "trigonometric"
        ])),
        1
    );
    assert_eq!(code(&ngmres(&[])), 1);
    assert_eq!(code(&ngmres(&["--help"])), 0);
    // Overflow in the very first residual is an evaluation failure.
    assert_eq!(code(&ngmres(&["solve", "--x0", "1e200,1e200"])), 2);
    // Divergence is a terminal status, not an error.
    let out = ngmres(&["solve", "--c1", "1", "--c2", "2", "--method", "fp"]);
    assert_eq!(code(&out), 0);
}

#[test]
fn unwritable_output_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let out = ngmres(&["solve", "--out", blocker.join("sub").to_str().unwrap()]);
    assert_eq!(code(&out), 1);
}
