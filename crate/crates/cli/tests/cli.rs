use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn carascale(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_carascale"))
        .args(args)
        .env("CARASCALE_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn manual_instance(dir: &TempDir, name: &str, column: &[f64]) -> PathBuf {
    let mut text = format!(
        "n {}\nm 1\nseed 0\ngenerator_id manual\nwitness_tag none\nbasis\nprmat {} 1\n",
        column.len(),
        column.len()
    );
    for v in column {
        text.push_str(&format!("{v}\n"));
    }
    let path = dir.path().join(name);
    fs::write(&path, text).unwrap();
    path
}

fn generate(dir: &TempDir, name: &str, n: usize, m: usize, seed: u64, kind: &str) -> PathBuf {
    let path = dir.path().join(name);
    let out = carascale(&[
        "generate",
        "--n",
        &n.to_string(),
        "--m",
        &m.to_string(),
        "--seed",
        &seed.to_string(),
        "--kind",
        kind,
        "-o",
        path_str(&path),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    path
}

#[test]
fn generate_is_deterministic_and_checks_dimensions() {
    let dir = TempDir::new().unwrap();
    let a = generate(&dir, "a.txt", 20, 4, 7, "primal");
    let b = generate(&dir, "b.txt", 20, 4, 7, "primal");
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let c = generate(&dir, "c.txt", 20, 4, 8, "primal");
    assert_ne!(fs::read(&a).unwrap(), fs::read(&c).unwrap());

    let bad = dir.path().join("bad.txt");
    let out = carascale(&["generate", "--n", "5", "--m", "5", "-o", path_str(&bad)]);
    assert_eq!(code(&out), 2);
    assert!(!bad.exists());
}

#[test]
fn solve_strict_on_the_diagonal_line() {
    let dir = TempDir::new().unwrap();
    let inst = manual_instance(&dir, "diag.txt", &[1.0, 1.0]);
    let out = carascale(&["solve", path_str(&inst), "--procedure", "lsvn", "--format", "json"]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    let doc: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(doc["result"], "primal_strict");
    assert_eq!(doc["iterations"], 0);
    let y: Vec<f64> = serde_json::from_value(doc["solution"].clone()).unwrap();
    assert_eq!(y.len(), 2);
    for v in y {
        assert!((v - 0.5).abs() <= 1e-12);
    }
}

#[test]
fn solve_boundary_line_is_undetermined() {
    let dir = TempDir::new().unwrap();
    let inst = manual_instance(&dir, "axis.txt", &[0.0, 1.0]);
    let out = carascale(&["solve", path_str(&inst), "--max-rounds", "4"]);
    assert_eq!(code(&out), 3);
    assert!(stdout(&out).contains("result: undetermined"));
}

#[test]
fn solve_and_verify_round_trip() {
    let dir = TempDir::new().unwrap();
    let inst = generate(&dir, "p.txt", 50, 5, 3, "primal");
    let sol = dir.path().join("y.txt");
    let out = carascale(&["solve", path_str(&inst), "--solution-out", path_str(&sol)]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("result: primal_strict"));
    assert!(stdout(&out).contains("verification: pass"));

    let out = carascale(&["verify", path_str(&inst), path_str(&sol), "--side", "primal"]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    let out = carascale(&["verify", path_str(&inst), path_str(&sol), "--side", "dual"]);
    assert_eq!(code(&out), 5);

    // Negating one entry breaks positivity.
    let text = fs::read_to_string(&sol).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_owned).collect();
    let first = lines.iter().position(|l| !l.starts_with('#') && !l.starts_with("prmat")).unwrap();
    lines[first] = format!("-{}", lines[first]);
    let negated = dir.path().join("neg.txt");
    fs::write(&negated, lines.join("\n")).unwrap();
    assert_eq!(code(&carascale(&["verify", path_str(&inst), path_str(&negated)])), 5);

    // A positive vector off the subspace fails membership.
    let off = dir.path().join("off.txt");
    fs::write(&off, vec!["1.0"; 50].join(" ")).unwrap();
    assert_eq!(code(&carascale(&["verify", path_str(&inst), path_str(&off)])), 5);
}

#[test]
fn solve_dual_instance_reports_dual_side() {
    let dir = TempDir::new().unwrap();
    let inst = generate(&dir, "d.txt", 30, 4, 2, "dual");
    let sol = dir.path().join("y.txt");
    let out = carascale(&["solve", path_str(&inst), "--solution-out", path_str(&sol)]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("result: dual_strict"));
    let out = carascale(&["verify", path_str(&inst), path_str(&sol)]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("dual: pass"));
}

#[test]
fn bench_writes_one_row_per_entry() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("bench.csv");
    let out = carascale(&[
        "bench",
        "--n",
        "50",
        "--m",
        "5",
        "--seeds",
        "1..10",
        "--procedures",
        "lsvn,baseline_vn",
        "-o",
        path_str(&csv),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&csv).unwrap();
    let mut rows = text.lines();
    assert_eq!(
        rows.next().unwrap(),
        "instance_id,procedure,n,m,iterations,max_support,rescalings,counted_ops,wall_nanoseconds,result_tag"
    );
    let rows: Vec<Vec<&str>> = rows.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 20);
    for r in &rows {
        assert_eq!(r[9], "primal_strict");
        if r[1] == "lsvn" {
            assert!(r[5].parse::<usize>().unwrap() <= 6);
        }
    }
    assert_eq!(rows.iter().filter(|r| r[1] == "baseline_vn").count(), 10);
}

#[test]
fn bench_rejects_an_empty_suite() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("bench.csv");
    let out = carascale(&["bench", "--n", "50", "--m", "5", "--seeds", "", "-o", path_str(&csv)]);
    assert_eq!(code(&out), 2);
    let out = carascale(&["bench", "--n", "5", "--m", "5", "--seeds", "1", "-o", path_str(&csv)]);
    assert_eq!(code(&out), 2);
}

#[test]
fn missing_instance_is_an_error() {
    let out = carascale(&["solve", "/nonexistent/instance.txt"]);
    assert_eq!(code(&out), 1);
}
