use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn polyls(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_polyls"))
        .args(args)
        .env("POLYLS_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn write(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, body).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn values(out: &str) -> Vec<f64> {
    out.lines().filter_map(|l| l.parse().ok()).collect()
}

fn summary(out: &str) -> &str {
    out.lines().last().unwrap_or("")
}

#[test]
fn solve_duplicate_column() {
    let dir = TempDir::new().unwrap();
    let x = write(&dir, "x.csv", "1\n1\n");
    let y = write(&dir, "y.csv", "1\n1\n");
    let o = polyls(&["solve", "--x", s(&x), "--y", s(&y)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert_eq!(values(&out), vec![1.0]);
    let line = summary(&out);
    assert!(line.starts_with("objective=0 kkt=pass positives=1 time_s="), "{line}");
}

#[test]
fn solve_with_header_and_vector_bounds() {
    let dir = TempDir::new().unwrap();
    let x = write(&dir, "x.csv", "a,b\n1,0\n0,1\n");
    let y = write(&dir, "y.csv", "y\n3\n-2\n");
    let lo = write(&dir, "lo.csv", "-1\n-1\n");
    let o = polyls(&["solve", "--x", s(&x), "--y", s(&y), "--lower", s(&lo), "--upper", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(values(&stdout(&o)), vec![2.0, -1.0]);
}

#[test]
fn solve_pinned_bounds_give_zero() {
    let dir = TempDir::new().unwrap();
    let x = write(&dir, "x.csv", "1,2\n3,4\n");
    let y = write(&dir, "y.csv", "5\n6\n");
    let o = polyls(&["solve", "--x", s(&x), "--y", s(&y), "--lower", "0", "--upper", "0"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(values(&stdout(&o)), vec![0.0, 0.0]);
}

#[test]
fn solve_writes_to_file() {
    let dir = TempDir::new().unwrap();
    let x = write(&dir, "x.csv", "1\n1\n");
    let y = write(&dir, "y.csv", "1\n1\n");
    let out = dir.path().join("beta.csv");
    let o = polyls(&["solve", "--x", s(&x), "--y", s(&y), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(fs::read_to_string(&out).unwrap(), "1\n");
    assert_eq!(stdout(&o).lines().count(), 1);
}

#[test]
fn solve_dimension_mismatch_is_input_error() {
    let dir = TempDir::new().unwrap();
    let x = write(&dir, "x.csv", "1,2\n3,4\n");
    let y = write(&dir, "y.csv", "1\n2\n3\n");
    let o = polyls(&["solve", "--x", s(&x), "--y", s(&y)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!stderr(&o).is_empty());
}

#[test]
fn malformed_csv_names_row_and_column() {
    let dir = TempDir::new().unwrap();
    let x = write(&dir, "x.csv", "1,2\n3,oops\n");
    let y = write(&dir, "y.csv", "1\n2\n");
    let o = polyls(&["solve", "--x", s(&x), "--y", s(&y)]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(
        err.contains("row 2") && err.contains("column 2") && err.contains("oops"),
        "{err}"
    );
}

#[test]
fn inverted_bounds_are_input_error() {
    let dir = TempDir::new().unwrap();
    let x = write(&dir, "x.csv", "1\n");
    let y = write(&dir, "y.csv", "1\n");
    let o = polyls(&["solve", "--x", s(&x), "--y", s(&y), "--lower", "1", "--upper", "0"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(polyls(&["solve"]).status.code(), Some(1));
    assert_eq!(polyls(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(polyls(&["--help"]).status.code(), Some(0));
}

#[test]
fn missing_file_is_input_error() {
    let o = polyls(&["solve", "--x", "/nonexistent/x.csv", "--y", "/nonexistent/y.csv"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("/nonexistent/x.csv"));
}

#[test]
fn round_cap_reports_non_convergence() {
    let dir = TempDir::new().unwrap();
    let (n, p) = (20, 60);
    let mut xs = String::new();
    for i in 0..n {
        let row: Vec<String> = (0..p)
            .map(|j| format!("{}", ((i * 7 + j * 13) % 17) as f64 - 8.0))
            .collect();
        xs.push_str(&row.join(","));
        xs.push('\n');
    }
    let ys: String = (0..n).map(|i| format!("{}\n", (i % 5) as f64 - 1.5)).collect();
    let x = write(&dir, "x.csv", &xs);
    let y = write(&dir, "y.csv", &ys);
    let o = polyls(&["solve", "--x", s(&x), "--y", s(&y), "--max-iters", "1", "--kappa", "1"]);
    assert_eq!(o.status.code(), Some(2), "{}", stdout(&o));
    assert!(summary(&stdout(&o)).contains("kkt=fail"));
}

#[test]
fn sparsify_orthant_binds_one() {
    let dir = TempDir::new().unwrap();
    let q = write(&dir, "q.csv", "1,1\n");
    let w = write(&dir, "w.csv", "0.5\n0.5\n");
    let o = polyls(&["sparsify", "--q", s(&q), "--w", s(&w), "--polyhedron", "orthant"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert_eq!(values(&out), vec![1.0, 0.0]);
    assert!(summary(&out).starts_with("binding=1 guarantee=1 recon_err=0"), "{out}");
}

#[test]
fn sparsify_simplex_keeps_mean() {
    let dir = TempDir::new().unwrap();
    let q = write(&dir, "q.csv", "0,1,0,1\n0,0,1,1\n");
    let w = write(&dir, "w.csv", "0.25\n0.25\n0.25\n0.25\n");
    let o = polyls(&["sparsify", "--q", s(&q), "--w", s(&w), "--polyhedron", "simplex"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let w = values(&stdout(&o));
    assert!(w.iter().filter(|&&v| v > 1e-9).count() <= 3);
    let line = stdout(&o);
    let binding: usize = summary(&line)["binding=".len()..]
        .split(' ')
        .next()
        .unwrap()
        .parse()
        .unwrap();
    assert!(binding >= 1 && summary(&line).contains("guarantee=1 "), "{line}");
    assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert!((w[1] + w[3] - 0.5).abs() < 1e-12 && (w[2] + w[3] - 0.5).abs() < 1e-12);
}

#[test]
fn sparsify_already_sparse_point_is_unchanged() {
    let dir = TempDir::new().unwrap();
    let q = write(&dir, "q.csv", "1,1\n");
    let w = write(&dir, "w.csv", "1\n0\n");
    let o = polyls(&["sparsify", "--q", s(&q), "--w", s(&w), "--polyhedron", "orthant"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(values(&stdout(&o)), vec![1.0, 0.0]);
}

#[test]
fn sparsify_infeasible_point_is_input_error() {
    let dir = TempDir::new().unwrap();
    let q = write(&dir, "q.csv", "1,1\n");
    let w = write(&dir, "w.csv", "-0.5\n1\n");
    let o = polyls(&["sparsify", "--q", s(&q), "--w", s(&w), "--polyhedron", "orthant"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!stderr(&o).is_empty());
}

#[test]
fn bench_sim_writes_one_row_per_mean_and_solver() {
    let o = polyls(&[
        "bench",
        "sim",
        "--n",
        "50",
        "--p",
        "500",
        "--no-timing",
        "--solvers",
        "cd,projected_gradient",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    let mut lines = out.lines();
    assert_eq!(
        lines.next(),
        Some("instance,solver,wall_time_s,objective,n_positive,kkt_passed")
    );
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 40);
    for solver in ["cd", "projected_gradient"] {
        assert_eq!(rows.iter().filter(|r| r[1] == solver).count(), 20);
    }
    assert!(rows.iter().all(|r| r[2] == "0"));
    assert!(rows.iter().filter(|r| r[1] == "cd").all(|r| r[5] == "true"));
}

#[test]
fn bench_csv_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = polyls(&[
            "bench",
            "sim",
            "--n",
            "20",
            "--p",
            "80",
            "--seed",
            "7",
            "--no-timing",
            "--out",
            s(&out),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        fs::read(out).unwrap()
    };
    assert_eq!(run("a.csv"), run("b.csv"));
}

#[test]
fn bench_spike_synthetic() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("spike.csv");
    let o = polyls(&[
        "bench",
        "spike",
        "--p",
        "200",
        "--n",
        "100",
        "--k",
        "5",
        "--solvers",
        "cd,cd_sparsify",
        "--out",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(&out).unwrap();
    assert_eq!(csv.lines().count(), 3);
    let text = stdout(&o);
    assert!(
        text.contains("solver=cd spikes=") && text.contains("solver=cd_sparsify spikes="),
        "{text}"
    );
}

#[test]
fn bench_spike_from_data_file() {
    let dir = TempDir::new().unwrap();
    let mut body = String::from("time,value\n");
    for i in 0..80 {
        let t = i as f64 * 0.5;
        let v = (-(t - 10.0) * (t - 10.0) / 4.0).exp() + 0.5 * (-(t - 25.0) * (t - 25.0) / 4.0).exp();
        if i % 9 == 4 {
            body.push_str(&format!("{t},\n"));
        } else {
            body.push_str(&format!("{t},{v}\n"));
        }
    }
    let data = write(&dir, "series.csv", &body);
    let o = polyls(&["bench", "spike", "--data", s(&data), "--p", "60", "--solvers", "cd"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.lines().nth(1).unwrap().starts_with("spike_data,cd,"), "{out}");
}

#[test]
fn bench_enumeration_refused_for_wide_problems() {
    let o = polyls(&["bench", "sim", "--n", "5", "--p", "40", "--solvers", "enumeration"]);
    assert_eq!(o.status.code(), Some(1));
}
