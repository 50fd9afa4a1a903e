use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn stp(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stp")).current_dir(dir).args(args).output().unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = stp(dir, args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn error_json(out: &Output) -> serde_json::Value {
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(stderr.lines().next().unwrap()).unwrap()
}

fn synth_transient(dir: &Path, k: &str, seed: &str, out: &str) {
    ok(
        dir,
        &["synth", "--kind", "decaying-transient", "--k", k, "--n", "6", "--m", "5", "--p", "16", "--seed", seed, "--out", out],
    );
}

#[test]
fn synth_fit_evaluate_predict() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    synth_transient(dir, "30", "1", "train.stp");
    synth_transient(dir, "4", "2", "test.stp");
    ok(dir, &["fit", "--data", "train.stp", "--rank", "6", "--out", "model.stp"]);
    ok(dir, &["evaluate", "--model", "model.stp", "--data", "test.stp", "--out", "err.csv"]);
    ok(dir, &["predict", "--model", "model.stp", "--data", "test.stp", "--out", "pred.stp", "--coefficients", "a.csv"]);

    let err = fs::read_to_string(dir.join("err.csv")).unwrap();
    let rows: Vec<&str> = err.lines().collect();
    assert_eq!(rows[0], "# forecast_start=6");
    assert_eq!(rows[1], "index,mean,std,episode_0,episode_1,episode_2,episode_3");
    assert_eq!(rows.len(), 2 + 11);

    let pred = stp::io::load_ensemble(&dir.join("pred.stp")).unwrap();
    assert_eq!(pred.k(), 4);
    assert!(!pred.is_centered());
    let coeffs = fs::read_to_string(dir.join("a.csv")).unwrap();
    assert_eq!(coeffs.lines().next().unwrap(), "episode,a_1,a_2,a_3,a_4,a_5,a_6");
    assert_eq!(coeffs.lines().count(), 5);
}

#[test]
fn rank_one_spectrum_saturates_at_first_row() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ok(dir, &["synth", "--kind", "rank-limited", "--rank", "1", "--k", "20", "--n", "3", "--m", "2", "--out", "r1.stp"]);
    // skip centering so the data stays rank 1
    let raw = stp::io::load_ensemble(&dir.join("r1.stp")).unwrap();
    stp::io::save_ensemble(&raw.assume_centered(), &dir.join("c.stp"), None).unwrap();
    ok(dir, &["fit", "--data", "c.stp", "--rank", "1", "--out", "m.stp", "--spectrum", "s.csv"]);
    let spectrum = fs::read_to_string(dir.join("s.csv")).unwrap();
    let first = spectrum.lines().nth(1).unwrap();
    let fraction: f64 = first.rsplit(',').next().unwrap().parse().unwrap();
    assert!((fraction - 1.0).abs() < 1e-12, "{first}");
}

#[test]
fn rank_above_k_names_both_values() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    synth_transient(dir, "3", "1", "train.stp");
    let out = stp(dir, &["fit", "--data", "train.stp", "--rank", "5", "--out", "m.stp"]);
    let json = error_json(&out);
    assert_eq!(json["error"]["kind"], "rank_out_of_range");
    let message = json["error"]["message"].as_str().unwrap();
    assert!(message.contains('5') && message.contains('3'), "{message}");
    assert!(!dir.join("m.stp").exists());
}

#[test]
fn single_test_episode_drops_std() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    synth_transient(dir, "20", "1", "train.stp");
    synth_transient(dir, "1", "2", "one.stp");
    ok(dir, &["fit", "--data", "train.stp", "--rank", "4", "--out", "m.stp"]);
    ok(dir, &["evaluate", "--model", "m.stp", "--data", "one.stp", "--out", "err.csv"]);
    let err = fs::read_to_string(dir.join("err.csv")).unwrap();
    let rows: Vec<&str> = err.lines().collect();
    assert!(rows[1].starts_with("# warning"));
    assert_eq!(rows[2], "index,mean,episode_0");
}

#[test]
fn bad_input_is_a_structured_error() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    fs::write(dir.join("junk.stp"), b"not a data file").unwrap();
    let out = stp(dir, &["fit", "--data", "junk.stp", "--out", "m.stp"]);
    assert_eq!(error_json(&out)["error"]["kind"], "bad_magic");

    let out = stp(dir, &["fit", "--data", "junk.stp", "--out", "m.stp", "--frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_json(&out)["error"]["kind"], "usage");
}

#[test]
fn sweep_accepts_a_single_axis_only() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    synth_transient(dir, "30", "1", "train.stp");
    synth_transient(dir, "5", "2", "test.stp");
    let out = stp(dir, &["sweep", "--data", "train.stp", "--test", "test.stp", "--n-grid", "2,3", "--k-grid", "10", "--out", "s.csv"]);
    assert_eq!(error_json(&out)["error"]["kind"], "usage");

    ok(dir, &["sweep", "--data", "train.stp", "--test", "test.stp", "--n-grid", "2,4,6", "--hold-total", "--n", "6", "--rank", "5", "--out", "s.csv"]);
    let sweep = fs::read_to_string(dir.join("s.csv")).unwrap();
    assert_eq!(sweep.lines().next().unwrap(), "# axis=n");
    assert_eq!(sweep.lines().count(), 2 + 3 * 11);
    let minima = fs::read_to_string(dir.join("s.csv.minima.csv")).unwrap();
    assert_eq!(minima.lines().next().unwrap(), "lead,min_mean,argmin_n");
    assert_eq!(minima.lines().count(), 1 + 9);

    ok(dir, &["sweep", "--data", "train.stp", "--test", "test.stp", "--k-grid", "8,16,30", "--rank", "20", "--n", "6", "--m", "5", "--out", "k.csv"]);
    let ks: Vec<String> = fs::read_to_string(dir.join("k.csv"))
        .unwrap()
        .lines()
        .skip(2)
        .filter(|l| l.split(',').nth(5) == Some("0"))
        .map(|l| l.split(',').take(5).collect::<Vec<_>>().join(","))
        .collect();
    assert_eq!(ks, ["8,6,5,8,7", "16,6,5,16,15", "30,6,5,30,20"]);
}

#[test]
fn config_file_supplies_flags_and_command_line_wins() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    synth_transient(dir, "30", "1", "train.stp");
    fs::write(dir.join("fit.toml"), "data = \"train.stp\"\nrank = 3\nout = \"a.stp\"\n").unwrap();
    let stdout = ok(dir, &["fit", "--config", "fit.toml"]);
    assert!(stdout.starts_with("fitted 3 modes"), "{stdout}");
    let stdout = ok(dir, &["fit", "--config", "fit.toml", "--rank", "7", "--out", "b.stp"]);
    assert!(stdout.starts_with("fitted 7 modes"), "{stdout}");
    assert!(dir.join("b.stp").exists());

    fs::write(dir.join("bad.toml"), "data = \"train.stp\"\nout = \"c.stp\"\nrnak = 3\n").unwrap();
    let out = stp(dir, &["fit", "--config", "bad.toml"]);
    assert_eq!(error_json(&out)["error"]["kind"], "usage");
}

#[test]
fn help_lists_defaults() {
    let out = Command::new(env!("CARGO_BIN_EXE_stp")).args(["sweep", "--help"]).output().unwrap();
    assert!(out.status.success());
    let help = String::from_utf8(out.stdout).unwrap();
    for needle in ["--n <N>", "[default: 15]", "[default: 20]", "[default: 100]", "[default: 10]", "[default: 0.8]", "--hold-total"] {
        assert!(help.contains(needle), "missing {needle}");
    }
}

#[test]
fn series_fit_writes_test_split() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ok(dir, &["synth", "--kind", "traveling-wave", "--p", "8", "--len", "600", "--seed", "3", "--out", "w.stp"]);
    ok(dir, &["fit", "--data", "w.stp", "--rank", "10", "--out", "m.stp", "--test-out", "t.stp"]);
    let test = stp::io::load_ensemble(&dir.join("t.stp")).unwrap();
    assert!(test.is_centered());
    ok(dir, &["evaluate", "--model", "m.stp", "--data", "t.stp", "--out", "e.csv"]);
}
