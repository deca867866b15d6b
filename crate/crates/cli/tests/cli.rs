//! Command-line behaviour: outputs, exit codes and config handling.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use vrirl_core::{init_parameters, Checkpoint, FeatureMatrix, InputNorm, NetworkConfig};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn vrirl(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vrirl"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = vrirl(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn read(dir: &Path, rel: &str) -> String {
    fs::read_to_string(dir.join(rel)).unwrap()
}

fn metric(json: &str, key: &str) -> f64 {
    let v: serde_json::Value = serde_json::from_str(json).unwrap();
    v[key].as_f64().unwrap()
}

/// Small world, oracle and demonstrations in `dir`.
fn setup(dir: &Path) {
    ok(
        dir,
        &[
            "gen-env",
            "--dims",
            "2",
            "--size",
            "5",
            "--objects",
            "2",
            "--seed",
            "4",
            "--out",
            "env",
        ],
    );
    ok(dir, &["oracle", "--mdp", "env/mdp.json", "--out", "oracle"]);
    ok(
        dir,
        &[
            "sample",
            "--spec",
            "env/spec.json",
            "--q",
            "oracle/q.csv",
            "--count",
            "300",
            "--seed",
            "2",
            "--out",
            "demos",
        ],
    );
}

#[test]
fn gen_env_sizes() {
    let tmp = tempfile::tempdir().unwrap();
    let stdout = ok(
        tmp.path(),
        &["gen-env", "--dims", "2", "--size", "8", "--out", "a"],
    );
    assert_eq!(stdout.trim(), "states 64 actions 9");
    let stdout = ok(
        tmp.path(),
        &[
            "gen-env",
            "--dims",
            "4",
            "--size",
            "10",
            "--objects",
            "5",
            "--seed",
            "7",
            "--out",
            "b",
        ],
    );
    assert_eq!(stdout.trim(), "states 10000 actions 81");
    for f in ["spec.json", "mdp.json", "features.csv", "config.json"] {
        assert!(tmp.path().join("b").join(f).is_file());
    }
    assert!(read(tmp.path(), "b/features.csv").starts_with("state,d1,d2,d3,d4,d5\n"));
}

#[test]
fn gen_env_state_cap() {
    let tmp = tempfile::tempdir().unwrap();
    let out = vrirl(
        tmp.path(),
        &[
            "gen-env",
            "--dims",
            "3",
            "--size",
            "10",
            "--state-cap",
            "999",
            "--out",
            "x",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn oracle_matches_golden_files() {
    let tmp = tempfile::tempdir().unwrap();
    let mdp = fixture("grid2d_mdp.json");
    ok(
        tmp.path(),
        &["oracle", "--mdp", mdp.to_str().unwrap(), "--out", "o"],
    );
    assert_eq!(
        read(tmp.path(), "o/q.csv"),
        fs::read_to_string(fixture("grid2d_q_golden.csv")).unwrap()
    );
    assert_eq!(
        read(tmp.path(), "o/v.csv"),
        fs::read_to_string(fixture("grid2d_v_golden.csv")).unwrap()
    );
}

#[test]
fn oracle_self_loop_value() {
    let tmp = tempfile::tempdir().unwrap();
    let mdp = fixture("self_loop_mdp.json");
    ok(
        tmp.path(),
        &["oracle", "--mdp", mdp.to_str().unwrap(), "--out", "o"],
    );
    let v = read(tmp.path(), "o/v.csv");
    let value: f64 = v
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .nth(1)
        .unwrap()
        .parse()
        .unwrap();
    assert!((value - 10.0).abs() < 1e-8);
}

#[test]
fn input_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("bad.json"), "{ not json").unwrap();
    let out = vrirl(tmp.path(), &["oracle", "--mdp", "bad.json", "--out", "o"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
    assert_eq!(
        vrirl(
            tmp.path(),
            &["oracle", "--mdp", "missing.json", "--out", "o"]
        )
        .status
        .code(),
        Some(2)
    );
    assert_eq!(
        vrirl(tmp.path(), &["oracle", "--out", "o"]).status.code(),
        Some(2)
    );
    assert_eq!(
        vrirl(tmp.path(), &["no-such-command"]).status.code(),
        Some(2)
    );
    assert_eq!(
        vrirl(tmp.path(), &["gen-env", "--dims", "two", "--out", "o"])
            .status
            .code(),
        Some(2)
    );
    // rewards are required for the oracle
    let mdp = fixture("self_loop_mdp.json");
    let text = fs::read_to_string(mdp)
        .unwrap()
        .replace(",\n  \"rewards\": [1.0]", "");
    fs::write(tmp.path().join("norewards.json"), text).unwrap();
    assert_eq!(
        vrirl(
            tmp.path(),
            &["oracle", "--mdp", "norewards.json", "--out", "o"]
        )
        .status
        .code(),
        Some(2)
    );
}

#[test]
fn sample_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    setup(tmp.path());
    let csv = read(tmp.path(), "demos/trajectories.csv");
    assert_eq!(csv.lines().count(), 1 + 300 * 10);
    ok(
        tmp.path(),
        &[
            "sample",
            "--spec",
            "env/spec.json",
            "--q",
            "oracle/q.csv",
            "--count",
            "0",
            "--out",
            "empty",
        ],
    );
    assert_eq!(
        read(tmp.path(), "empty/trajectories.csv"),
        "traj,step,state,action\n"
    );
    ok(
        tmp.path(),
        &[
            "sample",
            "--spec",
            "env/spec.json",
            "--q",
            "oracle/q.csv",
            "--count",
            "300",
            "--seed",
            "2",
            "--out",
            "again",
        ],
    );
    assert_eq!(read(tmp.path(), "again/trajectories.csv"), csv);
}

#[test]
fn zero_epochs_checkpoint_is_initialization() {
    let tmp = tempfile::tempdir().unwrap();
    setup(tmp.path());
    ok(
        tmp.path(),
        &[
            "train-irl",
            "--mdp",
            "env/mdp.json",
            "--features",
            "env/features.csv",
            "--trajectories",
            "demos/trajectories.csv",
            "--epochs",
            "0",
            "--net-seed",
            "9",
            "--out",
            "irl",
        ],
    );
    let (ck, _) = Checkpoint::from_json(&read(tmp.path(), "irl/checkpoint.json")).unwrap();
    let feats =
        FeatureMatrix::read_csv(fs::File::open(tmp.path().join("env/features.csv")).unwrap())
            .unwrap();
    let net = NetworkConfig::mlp(2, &[50], 9).with_input_norm(InputNorm::fit(&feats));
    assert_eq!(ck.network_config, net);
    assert_eq!(ck.params, init_parameters(&net).unwrap());
    assert_eq!(read(tmp.path(), "irl/history.csv").lines().count(), 2);
}

#[test]
fn training_improves_eval_metrics() {
    let tmp = tempfile::tempdir().unwrap();
    setup(tmp.path());
    let common = [
        "--mdp",
        "env/mdp.json",
        "--features",
        "env/features.csv",
        "--oracle-q",
        "oracle/q.csv",
        "--learning-rate",
        "3e-3",
    ];
    let mut untrained = vec!["train-rl", "--epochs", "0", "--out", "rl0"];
    untrained.extend(common);
    ok(tmp.path(), &untrained);
    let mut trained = vec!["train-rl", "--epochs", "300", "--out", "rl"];
    trained.extend(common);
    ok(tmp.path(), &trained);
    let eval = |ck: &str, out: &str| {
        ok(
            tmp.path(),
            &[
                "eval",
                "--checkpoint",
                ck,
                "--mdp",
                "env/mdp.json",
                "--features",
                "env/features.csv",
                "--oracle-q",
                "oracle/q.csv",
                "--out",
                out,
            ],
        );
        metric(
            &read(tmp.path(), &format!("{out}/metrics.json")),
            "meanQError",
        )
    };
    let before = eval("rl0/checkpoint.json", "e0");
    let after = eval("rl/checkpoint.json", "e1");
    assert!(after < before, "{after} >= {before}");
    let hist = read(tmp.path(), "rl/history.csv");
    assert!(hist.starts_with("epoch,lse,meanQError\n"));
    assert_eq!(hist.lines().count(), 302);
}

#[test]
fn greedy_demos_of_own_model_have_no_disagreement() {
    let tmp = tempfile::tempdir().unwrap();
    setup(tmp.path());
    ok(
        tmp.path(),
        &[
            "train-irl",
            "--mdp",
            "env/mdp.json",
            "--features",
            "env/features.csv",
            "--trajectories",
            "demos/trajectories.csv",
            "--learning-rate",
            "1e-3",
            "--epochs",
            "3",
            "--out",
            "irl",
        ],
    );
    ok(
        tmp.path(),
        &[
            "sample",
            "--spec",
            "env/spec.json",
            "--q",
            "irl/q.csv",
            "--greedy",
            "--count",
            "50",
            "--out",
            "own",
        ],
    );
    let stdout = ok(
        tmp.path(),
        &[
            "score",
            "--checkpoint",
            "irl/checkpoint.json",
            "--mdp",
            "env/mdp.json",
            "--features",
            "env/features.csv",
            "--trajectories",
            "own/trajectories.csv",
            "--out",
            "s",
        ],
    );
    assert_eq!(
        metric(&read(tmp.path(), "s/metrics.json"), "disagreementRate"),
        0.0
    );
    assert!(stdout.contains("meanQError,rewardCorrelation,meanNll,disagreementRate"));
    let csv = read(tmp.path(), "s/metrics.csv");
    assert!(csv.lines().nth(1).unwrap().starts_with(",,"));
}

#[test]
fn sweep_writes_one_history_per_width() {
    let tmp = tempfile::tempdir().unwrap();
    setup(tmp.path());
    ok(
        tmp.path(),
        &[
            "sweep",
            "--widths",
            "10,20,30",
            "--mdp",
            "env/mdp.json",
            "--features",
            "env/features.csv",
            "--trajectories",
            "demos/trajectories.csv",
            "--learning-rate",
            "1e-3",
            "--epochs",
            "2",
            "--out",
            "sw",
        ],
    );
    for w in [10, 20, 30] {
        let h = read(tmp.path(), &format!("sw/width-{w}/history.csv"));
        assert!(h.starts_with("epoch,logLikelihood,rewardCorrelation\n"));
        let cfg: serde_json::Value =
            serde_json::from_str(&read(tmp.path(), &format!("sw/width-{w}/config.json"))).unwrap();
        assert_eq!(cfg["config"]["hidden"], serde_json::json!([w]));
    }
    let summary = read(tmp.path(), "sw/summary.csv");
    assert_eq!(summary.lines().count(), 4);
    assert!(summary.starts_with("width,epoch,logLikelihood,rewardCorrelation\n10,2,"));
}

#[test]
fn config_file_supplies_defaults_and_flags_override() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(
        tmp.path().join("c.json"),
        r#"{"dims": 3, "size": 3, "seed": 9}"#,
    )
    .unwrap();
    let stdout = ok(
        tmp.path(),
        &["--config", "c.json", "gen-env", "--size", "4", "--out", "e"],
    );
    assert_eq!(stdout.trim(), "states 64 actions 27");
    let side: serde_json::Value = serde_json::from_str(&read(tmp.path(), "e/config.json")).unwrap();
    assert_eq!(side["command"], "gen-env");
    assert_eq!(side["config"]["dims"], 3);
    assert_eq!(side["config"]["size"], 4);
    assert_eq!(side["config"]["seed"], 9);
    fs::write(tmp.path().join("bad.json"), r#"{"dimz": 3}"#).unwrap();
    let out = vrirl(
        tmp.path(),
        &["--config", "bad.json", "gen-env", "--out", "f"],
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn divergence_exits_one_and_keeps_history() {
    let tmp = tempfile::tempdir().unwrap();
    let mdp = fixture("self_loop_mdp.json");
    fs::write(tmp.path().join("f.csv"), "state,d1\n0,1.0\n").unwrap();
    let out = vrirl(
        tmp.path(),
        &[
            "train-rl",
            "--mdp",
            mdp.to_str().unwrap(),
            "--features",
            "f.csv",
            "--hidden",
            "--input-norm",
            "false",
            "--learning-rate",
            "1e6",
            "--batch-size",
            "1",
            "--epochs",
            "1000",
            "--out",
            "rl",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("epoch"));
    let hist = read(tmp.path(), "rl/history.csv");
    assert!(hist.starts_with("epoch,lse,meanQError\n0,"));
    assert!(!tmp.path().join("rl/checkpoint.json").exists());
}

#[test]
fn threads_flag_does_not_change_results() {
    let tmp = tempfile::tempdir().unwrap();
    setup(tmp.path());
    for (t, out) in [("1", "a"), ("3", "b")] {
        ok(
            tmp.path(),
            &[
                "--threads",
                t,
                "train-irl",
                "--mdp",
                "env/mdp.json",
                "--features",
                "env/features.csv",
                "--trajectories",
                "demos/trajectories.csv",
                "--learning-rate",
                "1e-3",
                "--epochs",
                "2",
                "--out",
                out,
            ],
        );
    }
    assert_eq!(
        read(tmp.path(), "a/checkpoint.json"),
        read(tmp.path(), "b/checkpoint.json")
    );
    assert_eq!(
        read(tmp.path(), "a/history.csv"),
        read(tmp.path(), "b/history.csv")
    );
}
