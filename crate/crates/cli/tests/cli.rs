use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stein-gamma"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn selftest_succeeds() {
    let o = run(&["selftest"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).lines().skip(1).all(|l| l.contains(",true,")));
}

#[test]
fn example1_csv_schema() {
    let o = run(&[
        "example1",
        "--n-sweep",
        "10,30,100,300",
        "--samples",
        "5000",
        "--seed",
        "3",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "n,discrepancy,cross_term,bound_total,empirical_dw,slope_running"
    );
    let rows: Vec<Vec<String>> = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[0][0], "10");
    assert_eq!(rows[0][5], "");
    let disc: f64 = rows[0][1].parse().unwrap();
    assert!((disc - (800.0 / 729.0 + 4.0 / 81.0)).abs() < 1e-14);
    let slope: f64 = rows[3][5].parse().unwrap();
    assert!((slope + 0.5).abs() < 0.1);
}

#[test]
fn example1_json_has_metadata_and_reports() {
    let o = run(&[
        "example1",
        "--n-sweep",
        "10,20,40,80",
        "--samples",
        "0",
        "--seed",
        "9",
        "--format",
        "json",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["metadata"]["seed"], 9);
    assert_eq!(v["metadata"]["version"], env!("CARGO_PKG_VERSION"));
    assert!(v["metadata"]["started"].is_string());
    let report = &v["points"][0]["report"];
    for key in ["discrepancy", "cross_terms", "marginal_d2", "constant", "total"] {
        assert!(!report[key].is_null(), "{key}");
    }
    assert!((v["rate"]["slope"].as_f64().unwrap() + 0.5).abs() < 0.1);
}

#[test]
fn out_flag_writes_file() {
    let dir = std::env::temp_dir().join(format!("stein-gamma-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("rates.csv");
    let o = run(&["rates", "--n-sweep", "10,20,40,80,160", "--out", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("series,slope,intercept,residual"));
    assert!(text.contains("example2_bound"));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn example2_runs_and_checks_pair_sum() {
    let o = run(&[
        "example2",
        "--n-sweep",
        "3,10,30",
        "--samples",
        "200",
        "--format",
        "json",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v["points"][0]["cross_covariance"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert!(String::from_utf8_lossy(&o.stderr).contains("frame rank 5"));
}

#[test]
fn stein_solve_reports_residuals() {
    let o = run(&[
        "stein-solve",
        "--nu",
        "0.5",
        "--h",
        "bump",
        "--y",
        "-0.3",
        "--points",
        "8",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 17);
    for line in text.lines().skip(1) {
        let r: f64 = line.split(',').nth(3).unwrap().parse().unwrap();
        assert!(r < 1e-6);
    }
}

#[test]
fn bad_arguments_exit_with_two() {
    assert_eq!(run(&["example1", "--format", "xml"]).status.code(), Some(2));
    assert_eq!(run(&["example1", "--n-sweep", "1,5"]).status.code(), Some(2));
    assert_eq!(run(&["stein-solve", "--nu", "-1"]).status.code(), Some(2));
    assert_eq!(run(&["stein-solve", "--h", "cosh"]).status.code(), Some(2));
    assert_eq!(run(&["example2", "--a", "0"]).status.code(), Some(2));
    assert_eq!(run(&["rates", "--n-sweep", "10,20"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
}
