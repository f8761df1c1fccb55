use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn cbfnav(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cbfnav"))
        .args(args)
        .env("CBFNAV_LOG", "off")
        .output()
        .expect("binary runs")
}

fn path(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_string_lossy().into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

#[test]
fn exit_codes_follow_the_outcome() {
    let dir = TempDir::new().unwrap();
    let log = path(&dir, "run.jsonl");
    let arrived = cbfnav(&["simulate", "--scenario", "builtin:free-space", "--policy", "fixed:1,1,1,1", "--out", &log]);
    assert_eq!(code(&arrived), 0, "{}", String::from_utf8_lossy(&arrived.stderr));
    assert!(Path::new(&log).exists());

    let stuck = cbfnav(&["simulate", "--scenario", "builtin:singularity", "--policy", "fixed:1,1,1,1", "--out", &log]);
    assert_eq!(code(&stuck), 2);

    for bad in [
        vec!["simulate", "--scenario", "builtin:nowhere", "--policy", "random", "--out", &log],
        vec!["simulate", "--scenario", "builtin:cross", "--policy", "fixed:1,2", "--out", &log],
        vec!["simulate", "--scenario", "builtin:cross", "--policy", "gnn:/no/such/file", "--out", &log],
        vec!["simulate", "--policy", "random", "--out", &log],
        vec!["eval", "--scenario", "builtin:cross", "--policy", "random", "--episodes", "0", "--out", &log],
    ] {
        let o = cbfnav(&bad);
        assert_eq!(code(&o), 1, "{bad:?}");
        assert!(!o.stderr.is_empty());
    }
    assert_eq!(code(&cbfnav(&["--help"])), 0);
}

#[test]
fn zero_iteration_training_writes_the_initial_checkpoint() {
    let dir = TempDir::new().unwrap();
    let ckpt = path(&dir, "policy.bin");
    let o = cbfnav(&["train", "--scenario-family", "cross", "--iterations", "0", "--out", &ckpt]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let params = cbfnav::policy::checkpoint::load(&ckpt).unwrap();
    assert!(params.theta.iter().all(|x| x.is_finite()));
    let curve = fs::read_to_string(format!("{ckpt}.curve.csv")).unwrap();
    assert_eq!(curve.lines().count(), 1);
    assert!(curve.starts_with("iteration,"));

    // The checkpoint drives a simulation.
    let log = path(&dir, "run.jsonl");
    let policy = format!("gnn:{ckpt}");
    let o = cbfnav(&["simulate", "--scenario", "builtin:free-space", "--policy", &policy, "--out", &log]);
    assert_eq!(code(&o), 0);
    let mean = format!("gnn-mean:{ckpt}");
    let o = cbfnav(&["simulate", "--scenario", "builtin:free-space", "--policy", &mean, "--out", &log]);
    assert_eq!(code(&o), 0);
}

#[test]
fn render_draws_one_polyline_per_agent() {
    let dir = TempDir::new().unwrap();
    let full = path(&dir, "full.jsonl");
    let o = cbfnav(&["simulate", "--scenario", "builtin:cross", "--policy", "random", "--out", &full]);
    assert!(matches!(code(&o), 0 | 2));
    let text = fs::read_to_string(&full).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    let body: Vec<&str> = lines.collect();
    let agents = body.iter().take_while(|l| l.contains("\"t\":0,")).count();
    assert!(agents >= 2);
    // Keep only the first two steps.
    let short = path(&dir, "short.jsonl");
    let mut kept = vec![header];
    kept.extend(&body[..2 * agents]);
    fs::write(&short, kept.join("\n") + "\n").unwrap();

    let svg = path(&dir, "paths.svg");
    let o = cbfnav(&["render", "--log", &short, "--out", &svg]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(String::from_utf8_lossy(&o.stdout).trim(), format!("agents={agents} steps=2"));
    let drawn = fs::read_to_string(&svg).unwrap();
    assert!(drawn.starts_with("<svg"));
    assert_eq!(drawn.matches("<polyline").count(), agents);
}

#[test]
fn single_episode_eval_has_zero_spread() {
    let dir = TempDir::new().unwrap();
    let out = path(&dir, "eval.json");
    let o = cbfnav(&["eval", "--scenario", "builtin:cross", "--policy", "fixed:2,1.5,2,1.5", "--episodes", "1", "--out", &out]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["n_episodes"], 1);
    for key in ["spl", "pct_speed", "success_rate", "infeasible_steps", "total_reward"] {
        assert_eq!(v[key]["std"].as_f64(), Some(0.0), "{key}");
        assert!(v[key]["mean"].as_f64().unwrap().is_finite());
    }
}

#[test]
fn default_grid_has_one_hundred_rows() {
    let dir = TempDir::new().unwrap();
    let out = path(&dir, "grid.csv");
    let o = cbfnav(&["gridsearch", "--scenario", "builtin:free-space", "--out", &out]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(&out).unwrap();
    assert_eq!(csv.lines().count(), 101);
    assert!(csv.starts_with("zeta,eta,"));
}

#[test]
fn shipped_configs_are_the_defaults() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let train = fs::read_to_string(root.join("train.json")).unwrap();
    assert_eq!(
        cbfnav::train::TrainConfig::from_json(&train).unwrap(),
        cbfnav::train::TrainConfig::default()
    );
    let episode = fs::read_to_string(root.join("episode.json")).unwrap();
    let opts: cbfnav::sim::EpisodeOptions = serde_json::from_str(&episode).unwrap();
    assert_eq!(opts, cbfnav::sim::EpisodeOptions::default());
}
