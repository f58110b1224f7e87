use std::collections::HashMap;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_twin-assets"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn rows(csv: &str) -> Vec<Vec<f64>> {
    csv.lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

fn record(text: &str) -> HashMap<String, String> {
    text.lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

fn num(rec: &HashMap<String, String>, key: &str) -> f64 {
    rec[key].parse().unwrap()
}

#[test]
fn simulate_one_year_of_days() {
    let csv = stdout(&run(&["simulate", "--steps", "252"]));
    assert_eq!(csv.lines().next(), Some("t,s_i,s_j,s_j_predicted"));
    let data = rows(&csv);
    assert_eq!(data.len(), 253);
    assert_eq!(data[0], vec![0.0, 80.0, 90.0, 90.0]);
}

#[test]
fn simulate_perfect_twin_columns_agree() {
    let csv = stdout(&run(&["simulate", "--rho", "1", "--alpha", "1", "--steps", "100"]));
    for row in rows(&csv) {
        assert!(((row[2] - row[3]) / row[2]).abs() < 1e-12, "{row:?}");
    }
}

#[test]
fn simulate_is_byte_identical_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        assert!(run(&["simulate", "--seed", "5", "--out", p.to_str().unwrap()])
            .status
            .success());
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let other = stdout(&run(&["simulate", "--seed", "6"]));
    assert_ne!(std::fs::read_to_string(&a).unwrap(), other);
}

#[test]
fn price_identical_twins_match_black_scholes() {
    let out = stdout(&run(&[
        "price",
        "--mu-i",
        "0.1",
        "--sigma-i",
        "0.3",
        "--spot-i",
        "100",
        "--mu-j",
        "0.1",
        "--sigma-j",
        "0.3",
        "--spot-j",
        "100",
        "--rho",
        "1",
        "--strike",
        "95",
        "--n",
        "500",
    ]));
    let rec = record(&out);
    assert_eq!(rec["bs_price"], rec["twin_price_mean"]);
    assert_eq!(num(&rec, "twin_price_se"), 0.0);
}

#[test]
fn price_defaults_are_finite_and_stable_across_seeds() {
    let a = record(&stdout(&run(&["price", "--seed", "1"])));
    let b = record(&stdout(&run(&["price", "--seed", "2"])));
    for rec in [&a, &b] {
        assert!(num(rec, "bs_price") > 0.0 && num(rec, "twin_price_mean") > 0.0);
        assert!(num(rec, "twin_price_mean").is_finite());
        assert_eq!(rec["n"], "10000");
    }
    let band = 4.0 * (num(&a, "twin_price_se").powi(2) + num(&b, "twin_price_se").powi(2)).sqrt();
    assert!((num(&a, "twin_price_mean") - num(&b, "twin_price_mean")).abs() < band);
}

#[test]
fn validation_errors_exit_2_with_one_line() {
    for args in [
        &["price", "--sigma-j", "-0.1"][..],
        &["price", "--sigma-j", "0"],
        &["mape", "--alpha-grid", "-0.5,1"],
        &["mape", "--rho-grid", "0.5,1.5"],
        &["simulate", "--steps", "0"],
        &["frobnicate"],
        &["price", "--threads", "zero"],
    ] {
        let out = run(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        let err = String::from_utf8(out.stderr).unwrap();
        assert_eq!(err.lines().count(), 1, "{args:?}: {err}");
        assert!(err.starts_with("error: usage:"), "{err}");
        assert!(out.stdout.is_empty());
    }
}

#[test]
fn unwritable_output_exits_3_and_leaves_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("missing").join("out.csv");
    let out = run(&["simulate", "--out", target.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8(out.stderr).unwrap().starts_with("error: io:"));
    assert!(!target.exists());
}

#[test]
fn invalid_run_does_not_touch_existing_output() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("keep.csv");
    std::fs::write(&target, "previous").unwrap();
    let out = run(&["mape", "--alpha-grid", "0,1", "--out", target.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(std::fs::read_to_string(&target).unwrap(), "previous");
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
}

#[test]
fn asset_mape_default_grid_has_441_rows() {
    let csv = stdout(&run(&["mape", "--mode", "asset", "--n", "2000"]));
    assert_eq!(csv.lines().next(), Some("rho,alpha,mape,se"));
    let data = rows(&csv);
    assert_eq!(data.len(), 441);
    let perfect = data.iter().find(|r| r[0] == 1.0 && r[1] == 1.0).unwrap();
    assert!(perfect[2] <= 1e-8);
    assert!(data.iter().all(|r| r[2] >= 0.0 && r[3] >= 0.0));
}

#[test]
fn option_mape_at_perfect_correlation_and_unit_alpha() {
    let csv = stdout(&run(&[
        "mape",
        "--mode",
        "option",
        "--rho-grid",
        "1",
        "--alpha-grid",
        "1.0",
    ]));
    let data = rows(&csv);
    assert_eq!(data.len(), 1);
    assert!(data[0][2] < 10.0, "{:?}", data[0]);
}

#[test]
fn horizon_compare_month_dominates_day() {
    let csv = stdout(&run(&[
        "mape",
        "--mode",
        "horizon-compare",
        "--n",
        "4000",
        "--rho-grid",
        "-1:1:0.5",
        "--alpha-grid",
        "0.5:1.5:0.25",
    ]));
    assert_eq!(csv.lines().next(), Some("horizon,rho,alpha,mape,se"));
    let data = rows(&csv);
    assert_eq!(data.len(), 50);
    let (day, month) = data.split_at(25);
    for (d, m) in day.iter().zip(month) {
        assert_eq!((d[1], d[2]), (m[1], m[2]));
        assert!(m[3] >= d[3] - 2.0 * (d[4].powi(2) + m[4].powi(2)).sqrt(), "{d:?} {m:?}");
    }
}

#[test]
fn sigma_sweep_adds_column() {
    let csv = stdout(&run(&[
        "mape",
        "--mode",
        "sigma-sweep",
        "--n",
        "1000",
        "--rho-grid",
        "1",
        "--alpha-grid",
        "0.8,1,1.2",
    ]));
    assert_eq!(csv.lines().next(), Some("sigma_j,rho,alpha,mape,se"));
    let data = rows(&csv);
    assert_eq!(data.len(), 9);
    assert_eq!(
        data.iter().map(|r| r[0]).collect::<Vec<_>>(),
        vec![0.2, 0.2, 0.2, 0.4, 0.4, 0.4, 0.6, 0.6, 0.6]
    );
}

#[test]
fn config_file_sits_between_flags_and_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    std::fs::write(&cfg, "# experiment\nstrike = 100\nrate = 0.02\nn = 50\nseed = 3\n").unwrap();
    let cfg_str = cfg.to_str().unwrap();

    let from_config = record(&stdout(&run(&["price", "--config", cfg_str])));
    assert_eq!(from_config["n"], "50");
    assert_eq!(from_config["seed"], "3");
    let with_flag = record(&stdout(&run(&["price", "--config", cfg_str, "--n", "60"])));
    assert_eq!(with_flag["n"], "60");
    let direct = record(&stdout(&run(&[
        "price", "--strike", "100", "--rate", "0.02", "--n", "50", "--seed", "3",
    ])));
    assert_eq!(from_config, direct);

    let missing = run(&["price", "--config", Path::new("/nonexistent/x.conf").to_str().unwrap()]);
    assert_eq!(missing.status.code(), Some(3));
}
