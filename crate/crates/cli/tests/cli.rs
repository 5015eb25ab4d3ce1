use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use beta_loclik::kernel::{Degree, KernelSpec};
use beta_loclik::loclik::{fit_curve, regular_grid, Dataset, FitConfig, Optimizer, StartMode};

fn scratch(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("cli").join(name);
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn betaloc(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_betaloc"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = betaloc(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn read_rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(str::to_string).collect();
    let rows = lines.map(|l| l.split(',').map(str::to_string).collect()).collect();
    (header, rows)
}

#[test]
fn toy_pipeline_end_to_end() {
    let dir = scratch("toy");
    ok(&dir, &["simulate", "--toy", "--m", "201", "--seed", "7", "-o", "toy.csv"]);
    ok(&dir, &["fit", "-i", "toy.csv", "--degree", "linear", "--h", "0.12", "-o", "fit.csv", "--summary", "s.csv", "--svg", "f.svg"]);
    let (header, rows) = read_rows(&dir.join("fit.csv"));
    assert_eq!(header, ["t", "alpha", "beta", "delta", "eta", "converged"]);
    assert_eq!(rows.len(), 101);
    let (header, rows) = read_rows(&dir.join("s.csv"));
    assert_eq!(header, ["t", "mean", "median", "q025", "q975"]);
    assert_eq!(rows.len(), 101);
    assert!(std::fs::read_to_string(dir.join("f.svg")).unwrap().starts_with("<svg"));
    let sidecar: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.join("fit.json")).unwrap()).unwrap();
    assert_eq!(sidecar["bandwidth"], 0.12);
    assert_eq!(sidecar["points"].as_array().unwrap().len(), 101);

    let chosen = ok(&dir, &["select-bandwidth", "-i", "toy.csv", "--method", "kfold", "--k", "5", "-o", "cv.csv"]);
    let h: f64 = chosen.trim().parse().unwrap();
    assert!(beta_loclik::bandwidth::default_grid().contains(&h));
    let (header, rows) = read_rows(&dir.join("cv.csv"));
    assert_eq!(header, ["h", "cv_naive", "cv_approx", "nu", "aic", "cv_kfold"]);
    assert_eq!(rows.len(), 15);
    assert!(rows.iter().all(|r| r[1].is_empty() && r[2].is_empty() && !r[5].is_empty()));
}

#[test]
fn csv_round_trip_is_exact() {
    let dir = scratch("roundtrip");
    ok(&dir, &["simulate", "--m", "150", "--seed", "3", "-o", "d.csv"]);
    ok(&dir, &["fit", "-i", "d.csv", "--h", "0.15", "--degree", "constant", "--grid-size", "31", "-o", "fit.csv"]);

    let (_, rows) = read_rows(&dir.join("d.csv"));
    let t: Vec<f64> = rows.iter().map(|r| r[0].parse().unwrap()).collect();
    let y: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    let sim = beta_loclik::simulation::simulate_dataset(150, 3, &beta_loclik::simulation::ToyParams).unwrap();
    assert_eq!(t, sim.times());
    assert_eq!(y, sim.values());

    let data = Dataset::new(t, y).unwrap();
    let cfg = FitConfig::new(KernelSpec::gaussian(0.15).unwrap(), Degree::Constant, Optimizer::Newton);
    let curve = fit_curve(&data, &regular_grid(31), &cfg, StartMode::Independent).unwrap();
    let (_, rows) = read_rows(&dir.join("fit.csv"));
    for (v, r) in rows.iter().enumerate() {
        let vals: Vec<f64> = r[..5].iter().map(|s| s.parse().unwrap()).collect();
        assert_eq!(vals, [curve.grid[v], curve.alpha[v], curve.beta[v], curve.delta[v], curve.eta[v]]);
    }
}

#[test]
fn hours_are_mapped_to_the_unit_interval() {
    let dir = scratch("hours");
    ok(&dir, &["simulate", "--m", "120", "--seed", "4", "-o", "unit.csv"]);
    ok(&dir, &["simulate", "--m", "120", "--seed", "4", "--time-unit", "hours24", "-o", "hours.csv"]);
    let (_, unit) = read_rows(&dir.join("unit.csv"));
    let (_, hours) = read_rows(&dir.join("hours.csv"));
    assert_eq!(hours.last().unwrap()[0], "24");
    for (u, h) in unit.iter().zip(&hours) {
        let (u, h): (f64, f64) = (u[0].parse().unwrap(), h[0].parse().unwrap());
        assert!((u * 24.0 - h).abs() < 1e-12);
    }
    ok(&dir, &["fit", "-i", "unit.csv", "--h", "0.1", "--grid-size", "25", "-o", "a.csv"]);
    ok(&dir, &["fit", "-i", "hours.csv", "--h", "2.4", "--grid-size", "25", "--time-unit", "hours24", "-o", "b.csv"]);
    let (_, a) = read_rows(&dir.join("a.csv"));
    let (_, b) = read_rows(&dir.join("b.csv"));
    for (ra, rb) in a.iter().zip(&b) {
        let (ta, tb): (f64, f64) = (ra[0].parse().unwrap(), rb[0].parse().unwrap());
        assert!((ta * 24.0 - tb).abs() < 1e-12);
        let (xa, xb): (f64, f64) = (ra[1].parse().unwrap(), rb[1].parse().unwrap());
        assert!((xa - xb).abs() <= 1e-6 * xa);
    }
}

#[test]
fn multilevel_baseline_cohort_evaluate() {
    let dir = scratch("multilevel");
    ok(&dir, &["simulate", "--multilevel", "--individuals", "5", "--days", "8", "--per-day", "33", "--seed", "2", "-o", "ml.csv"]);
    let (header, rows) = read_rows(&dir.join("ml.csv"));
    assert_eq!(header, ["id", "day", "t", "y"]);
    assert_eq!(rows.len(), 5 * 8 * 33);
    ok(&dir, &["baseline", "-i", "ml.csv", "--out-dir", "base"]);
    let curves: Vec<String> = (0..5).map(|i| format!("base/{i}.csv")).collect();
    let mut args = vec!["cohort", "--out-dir", "coh", "--mode", "exact_gram"];
    args.extend(curves.iter().map(String::as_str));
    ok(&dir, &args);
    for f in ["distances.csv", "scores.csv", "eigenfunctions.csv", "eigenvalues.csv", "summary_mean.csv", "cohort.json"] {
        assert!(dir.join("coh").join(f).exists(), "{f}");
    }
    let (header, rows) = read_rows(&dir.join("coh/distances.csv"));
    assert_eq!(header, ["id", "0", "1", "2", "3", "4"]);
    assert_eq!(rows[2][3], "0");

    ok(&dir, &["simulate", "--multilevel", "--days", "10", "--per-day", "49", "--seed", "6", "--subsample", "200", "--holdout", "ho.csv", "-o", "sub.csv"]);
    ok(&dir, &["fit", "-i", "sub.csv", "--h", "0.1", "-o", "lin.csv"]);
    ok(&dir, &["fit", "-i", "sub.csv", "--h", "0.1", "--degree", "constant", "-o", "con.csv"]);
    let out = ok(&dir, &["evaluate", "--model", "lin.csv", "--holdout", "ho.csv", "--compare", "con.csv"]);
    let first = out.lines().next().unwrap();
    assert!(first.starts_with("mean_loglik,"));
    let v: f64 = first["mean_loglik,".len()..].parse().unwrap();
    assert!(v.is_finite());
}

#[test]
fn exit_codes() {
    let dir = scratch("exit");
    assert_eq!(betaloc(&dir, &[]).status.code(), Some(1));
    assert_eq!(betaloc(&dir, &["fit", "--h", "x"]).status.code(), Some(1));
    assert_eq!(betaloc(&dir, &["--help"]).status.code(), Some(0));
    assert_eq!(betaloc(&dir, &["fit", "-i", "missing.csv", "--h", "0.1", "-o", "o.csv"]).status.code(), Some(2));

    std::fs::write(dir.join("bad.csv"), "t,y\n0.1,0.5\n0.2,oops\n0.3,0.2\n0.4,0.1\n").unwrap();
    let out = betaloc(&dir, &["fit", "-i", "bad.csv", "--h", "0.1", "-o", "o.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("row 3"));

    // an Epanechnikov window narrower than the gaps leaves nothing to fit
    ok(&dir, &["simulate", "--m", "20", "--seed", "1", "-o", "small.csv"]);
    let out = betaloc(&dir, &["fit", "-i", "small.csv", "--h", "0.001", "--kernel", "epanechnikov", "-o", "o.csv"]);
    assert_eq!(out.status.code(), Some(3));
    let out = betaloc(&dir, &["select-bandwidth", "-i", "small.csv", "--grid", "0.001,0.002", "--kernel", "epanechnikov", "--method", "loo"]);
    assert_eq!(out.status.code(), Some(3));
}
