use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_affinecf"))
        .args(args)
        .env_remove("AFFINECF_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn parse(csv: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = csv.lines();
    let header = lines.next().unwrap().split(',').map(str::to_string).collect();
    let rows = lines.map(|l| l.split(',').map(str::to_string).collect()).collect();
    (header, rows)
}

fn col(header: &[String], rows: &[Vec<String>], name: &str) -> Vec<String> {
    let j = header.iter().position(|h| h == name).unwrap();
    rows.iter().map(|r| r[j].clone()).collect()
}

#[test]
fn price_regenerates_integration_domain_table() {
    let hh = config("heston-heston.toml");
    let out = run(&["price", "--config", hh.to_str().unwrap(), "--strikes", "10", "--maturities", "1", "--l", "2,4,8,16,32,64"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let (header, rows) = parse(&stdout(&out));
    assert_eq!(header, ["K", "T", "L", "price_exact", "price_approx", "rel_error"]);
    let exact: Vec<f64> = col(&header, &rows, "price_exact").iter().map(|s| s.parse().unwrap()).collect();
    let expected = [0.8350, 0.9621, 1.1105, 1.1832, 1.1884];
    for (p, e) in exact.iter().zip(expected) {
        assert!((p - e).abs() <= 2e-3, "{p} vs {e}");
    }
    // ten significant digits
    assert_eq!(col(&header, &rows, "price_exact")[3].replace(['.', '-'], "").trim_start_matches('0').len(), 10);
}

#[test]
fn empty_strike_list_gives_header_only() {
    let out = run(&["price", "--config", config("heston-heston.toml").to_str().unwrap(), "--strikes", ""]);
    assert!(out.status.success());
    assert_eq!(stdout(&out), "K,T,L,price_exact,price_approx,rel_error\n");
}

#[test]
fn rows_are_sorted_by_strike_maturity_and_l() {
    let out = run(&[
        "price",
        "--config",
        config("heston-heston.toml").to_str().unwrap(),
        "--strikes",
        "11,9",
        "--maturities",
        "1,0.5",
        "--l",
        "32,16",
    ]);
    assert!(out.status.success());
    let (header, rows) = parse(&stdout(&out));
    let keys: Vec<(f64, f64, f64)> = rows
        .iter()
        .map(|r| (r[0].parse().unwrap(), r[1].parse().unwrap(), r[2].parse().unwrap()))
        .collect();
    let mut sorted = keys.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    assert_eq!(keys, sorted);
    assert_eq!(keys.len(), 8);
    assert_eq!(header.len(), 6);
}

#[test]
fn cf_at_zero_frequency_is_one_in_every_column() {
    let out = run(&["cf", "--config", config("heston-heston.toml").to_str().unwrap(), "--which", "all", "--n-u", "21"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let (header, rows) = parse(&stdout(&out));
    assert_eq!(&header[..6], ["t", "u", "re_exact", "im_exact", "re_approx", "im_approx"]);
    assert_eq!(&header[6..], ["re_mc", "im_mc"]);
    let zero: Vec<&Vec<String>> = rows.iter().filter(|r| r[1] == "0").collect();
    assert_eq!(zero.len(), 2);
    for r in zero {
        for j in [2, 4, 6] {
            assert!((r[j].parse::<f64>().unwrap() - 1.0).abs() < 1e-12);
            assert!(r[j + 1].parse::<f64>().unwrap().abs() < 1e-12);
        }
    }
}

#[test]
fn exact_cf_for_state_dependent_jumps_is_a_config_error() {
    let out = run(&["cf", "--config", config("hsdj.toml").to_str().unwrap(), "--which", "exact"]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert_eq!(err.lines().count(), 1);
    assert!(err.starts_with("ERROR config"));
    assert!(stdout(&out).is_empty());
}

#[test]
fn hsdj_cf_all_leaves_exact_cells_empty() {
    let out = run(&["cf", "--config", config("hsdj.toml").to_str().unwrap(), "--maturities", "0.5", "--n-u", "5"]);
    assert!(out.status.success());
    assert!(stderr(&out).contains("WARN no-exact-cf"));
    let (header, rows) = parse(&stdout(&out));
    assert!(col(&header, &rows, "re_exact").iter().all(String::is_empty));
    assert!(col(&header, &rows, "re_mc").iter().all(|s| !s.is_empty()));
}

#[test]
fn missing_config_exits_with_two() {
    let out = run(&["price", "--config", "/definitely/not/here.toml"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).starts_with("ERROR config"));
}

#[test]
fn invalid_parameters_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(config("hsdj.toml")).unwrap().replace("rate = 4.48", "rate = 0.8");
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, text).unwrap();
    let out = run(&["price", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_thread_override_is_a_config_error() {
    let out = Command::new(env!("CARGO_BIN_EXE_affinecf"))
        .args(["price", "--config", config("heston-heston.toml").to_str().unwrap()])
        .env("AFFINECF_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn thread_count_does_not_change_output() {
    let cfg = config("hsdj.toml");
    let args = ["mc", "--config", cfg.to_str().unwrap(), "--strikes", "9,10,11", "--maturities", "0.5"];
    let one = Command::new(env!("CARGO_BIN_EXE_affinecf")).args(args).env("AFFINECF_THREADS", "1").output().unwrap();
    let four = Command::new(env!("CARGO_BIN_EXE_affinecf")).args(args).env("AFFINECF_THREADS", "4").output().unwrap();
    assert!(one.status.success() && four.status.success());
    assert_eq!(one.stdout, four.stdout);
    let (header, _) = parse(&stdout(&one));
    assert_eq!(header, ["K", "price_mc", "stderr", "rel_stderr"]);
}

#[test]
fn iv_reports_inversion_failures_without_aborting() {
    let out = run(&["iv", "--config", config("heston-heston.toml").to_str().unwrap(), "--strikes", "0.5,10", "--maturities", "0.01,1"]);
    assert!(out.status.success());
    assert!(stderr(&out).contains("WARN iv-inversion"));
    let (header, rows) = parse(&stdout(&out));
    assert_eq!(header, ["K", "T", "iv_exact", "iv_approx"]);
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().any(|r| r[2].is_empty()));
    assert!(rows.iter().filter(|r| r[0] == "10.00000000").all(|r| !r[2].is_empty()));
}

#[test]
fn eta_scan_error_shrinks_with_order() {
    let out = run(&["eta-scan", "--config", config("heston-heston.toml").to_str().unwrap(), "--u", "0,4", "--k", "2,4,8"]);
    assert!(out.status.success());
    let (header, rows) = parse(&stdout(&out));
    let err: Vec<f64> = col(&header, &rows, "abs_err").iter().map(|s| s.parse().unwrap()).collect();
    assert!(err[..3].iter().all(|e| *e == 0.0));
    assert!(err[3] > err[4] && err[4] > err[5], "{err:?}");

    let out = run(&["eta-scan", "--config", config("hsdj.toml").to_str().unwrap(), "--u", "3", "--k", "8"]);
    let (header, rows) = parse(&stdout(&out));
    assert!(col(&header, &rows, "cf_exact_re")[0].is_empty());
    assert!(!col(&header, &rows, "eta_heuristic")[0].is_empty());
}

#[test]
fn out_dir_receives_csv_and_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "mc",
        "--config",
        config("hsdj.toml").to_str().unwrap(),
        "--strikes",
        "10",
        "--maturities",
        "1",
        "--trajectory",
        "3",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).is_empty());
    assert!(dir.path().join("mc.csv").exists());
    let traj = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    let (header, rows) = parse(&traj);
    assert_eq!(header, ["t", "s", "vol_total", "v2"]);
    assert_eq!(rows.len(), 501);
    assert_eq!(rows[0][1], "10.00000000");
}
