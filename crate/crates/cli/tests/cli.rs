use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_comonoflow"))
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

fn run(args: &[&str]) -> (i32, String, String) {
    let Output { status, stdout, stderr } = bin().args(args).output().unwrap();
    (status.code().unwrap(), String::from_utf8(stdout).unwrap(), String::from_utf8(stderr).unwrap())
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn counterexample_default_report() {
    let (code, out, _) = run(&["counterexample"]);
    assert_eq!(code, 0);
    assert!(out.contains("monotone: true; P(a→a)=0.362; P(b→b)=0.374; violation: true"), "{out}");
    assert!(out.contains("VIOLATION CONFIRMED"));
}

#[test]
fn counterexample_at_time_zero_is_degenerate() {
    let (code, out, _) = run(&["counterexample", "--t", "0"]);
    assert_eq!(code, 1);
    assert!(out.contains("P(a→a)=1.000; P(b→b)=0.000; violation: false"), "{out}");
    assert!(!out.contains("CONFIRMED"));
}

#[test]
fn counterexample_skips_non_monotone_generators() {
    let dir = tempfile::tempdir().unwrap();
    let q = write(dir.path(), "bad.q", "3\n-1 0 1\n1 -1 0\n0 1 -1\n");
    let (code, out, _) = run(&["counterexample", "--qmatrix", &q]);
    assert_eq!(code, 1);
    assert!(out.contains("monotone: false; violation check skipped"), "{out}");
    assert!(out.contains("violated cut"));
}

#[test]
fn check_monotone_exit_codes() {
    let (code, out, _) = run(&["check-monotone", data("counterexample.q").to_str().unwrap()]);
    assert_eq!((code, out.trim()), (0, "monotone: true"));

    let dir = tempfile::tempdir().unwrap();
    let doctored = write(dir.path(), "doctored.q", "3\n-2.5 1.75 0.75\n1.5 -2.5 1.0\n2 0 -2\n");
    let (code, out, _) = run(&["check-monotone", &doctored]);
    assert_eq!(code, 1);
    assert!(out.starts_with("monotone: false"));
    assert!(out.lines().any(|l| l.starts_with("violated cut")), "{out}");

    let malformed = write(dir.path(), "malformed.q", "3\n-1 1 0\n0 x 0\n0 0 0\n");
    let (code, _, err) = run(&["check-monotone", &malformed]);
    assert_eq!(code, 2);
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn simulate_single_row_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sim");
    let (code, summary, _) = run(&["simulate", "--n", "1", "--m", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{summary}");
    let csv = std::fs::read_to_string(out.join("simulate_m1.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], "x,y,x_keep,y_minus_x");
    let cells: Vec<f64> = lines[1].split(',').map(|c| c.parse().unwrap()).collect();
    assert_eq!(cells.len(), 4);
    assert_eq!(cells[0], cells[2]);
    assert_eq!(cells[3], cells[1] - cells[0]);
    assert!(summary.contains("order_fraction=1.0"));
}

#[test]
fn simulate_rejects_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let o = dir.path().to_str().unwrap();
    let (code, _, err) = run(&["simulate", "--t", "0.3", "--out", o]);
    assert_eq!(code, 2);
    assert!(err.contains("--t-num 1229 --t-log2den 12"), "{err}");
    assert_eq!(run(&["simulate", "--starts", "0,1,2", "--n", "2", "--out", o]).0, 2);
    assert_eq!(run(&["simulate", "--m", "2", "--m-range", "1:3", "--out", o]).0, 2);
    assert_eq!(run(&["simulate", "--t-num", "1", "--t-log2den", "3", "--m", "2", "--out", o]).0, 2);
    assert_eq!(run(&["simulate", "--t-num", "0", "--out", o]).0, 2);
    assert_eq!(run(&["simulate", "--n", "0", "--out", o]).0, 2);
    let blocker = write(dir.path(), "file", "");
    let (code, _, err) = run(&["simulate", "--n", "2", "--m", "1", "--out", &format!("{blocker}/sub")]);
    assert_eq!(code, 2, "{err}");
}

#[test]
fn simulate_same_seed_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let go = |name: &str, seed: &str| {
        let out = dir.path().join(name);
        let (code, _, _) =
            run(&["simulate", "--n", "50", "--m-range", "1:3", "--seed", seed, "--out", out.to_str().unwrap()]);
        assert_eq!(code, 0);
        (1..=3).map(|m| std::fs::read(out.join(format!("simulate_m{m}.csv"))).unwrap()).collect::<Vec<_>>()
    };
    assert_eq!(go("a", "9"), go("b", "9"));
    assert_ne!(go("c", "9"), go("d", "10"));
}

#[test]
fn converge_single_level_has_empty_deltas() {
    let (code, out, _) = run(&["converge", "--m", "2", "--n", "100"]);
    assert_eq!(code, 0, "{out}");
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 2);
    let header: Vec<&str> = lines[0].split(',').collect();
    let row: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(header.len(), row.len());
    let delta = header.iter().position(|h| *h == "delta_phi_product_0_1").unwrap();
    assert_eq!(row[delta], "");
}

#[test]
fn converge_on_a_frozen_chain_is_constant() {
    let dir = tempfile::tempdir().unwrap();
    let q = write(dir.path(), "still.q", "3\n0 0 0\n0 0 0\n0 0 0\n-1 0 2\n");
    let (code, out, _) =
        run(&["converge", "--model", "chain", "--qmatrix", &q, "--starts", "-1,2", "--m-range", "1:3", "--n", "20"]);
    assert_eq!(code, 0, "{out}");
    let rows: Vec<Vec<&str>> = out.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 3);
    for r in &rows {
        assert_eq!(r[1], (-(1f64.tanh()) * 2f64.tanh()).to_string());
    }
    assert_eq!(rows[1][3], "0");
    assert_eq!(rows[2][3], "0");
}

#[test]
fn converge_writes_to_file_and_honors_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "run.json",
        r#"{"model": "brownian", "drift": -0.5, "starts": "0,1,-2", "m-range": "1:2", "n": 30, "out": "table.csv"}"#,
    );
    let (code, out, _) = run(&["converge", "--config", &cfg, "--n", "40"]);
    assert_eq!(code, 0, "{out}");
    let table = std::fs::read_to_string(dir.path().join("table.csv")).unwrap();
    assert_eq!(table.lines().count(), 3);
    assert!(table.starts_with("m,phi_product_0_1,spearman_0_1"));
    let bad = write(dir.path(), "bad.json", r#"{"modle": "cir"}"#);
    assert_eq!(run(&["converge", "--config", &bad]).0, 2);
}

#[test]
fn dominance_small_run() {
    let (code, out, _) = run(&["dominance", "--m", "2", "--n", "400", "--starts", "0.5,2,1"]);
    assert_eq!(code, 0, "{out}");
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "m,comparison,function,mean_lower,mean_upper,difference,std_error,pass");
    assert_eq!(lines.len(), 1 + 2 * 10);
}

#[test]
fn thread_count_zero_is_an_input_error() {
    assert_eq!(run(&["--threads", "0", "counterexample"]).0, 2);
}
