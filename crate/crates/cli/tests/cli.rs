use std::path::Path;
use std::process::{Command, Output};

fn langgame(args: &[&str], cwd: &Path) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_langgame")).args(args).current_dir(cwd).env("RUST_LOG", "warn").output().unwrap();
    assert!(out.status.success(), "langgame {args:?} failed:\n{}", String::from_utf8_lossy(&out.stderr));
    out
}

const TINY: &str =
    "n_envs = 2\nn_steps = 32\nbatch_size = 32\nn_epochs = 1\neval_interval = 64\neval_episodes = 1\nfinal_eval_episodes = 1\n";

#[test]
fn train_analyze_and_talk() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    std::fs::write(root.join("tiny.toml"), TINY).unwrap();
    for (reservoir, seed) in [("mlp", "0"), ("mlp", "1"), ("toggle_switch", "0")] {
        let out = langgame(
            &[
                "train",
                "--reservoir",
                reservoir,
                "--env",
                "CartPole-v1",
                "--seed",
                seed,
                "--steps",
                "128",
                "--out",
                "runs",
                "--config",
                "tiny.toml",
            ],
            root,
        );
        assert!(String::from_utf8_lossy(&out.stdout).contains("final reward"));
        let run = root.join(format!("runs/{reservoir}/CartPole-v1/seed_{seed}"));
        for f in ["checkpoint.json", "checkpoint_0.json", "metrics.csv", "evals.csv"] {
            assert!(run.join(f).is_file(), "{f} missing in {}", run.display());
        }
    }

    langgame(&["analyze", "similarity", "--env", "CartPole-v1", "--runs", "runs", "--out", "analysis"], root);
    let csv = std::fs::read_to_string(root.join("analysis/similarity_CartPole-v1.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(root.join("analysis/similarity_CartPole-v1.png").is_file());

    let out = langgame(&["talk", "--prompt", "Keep the pole balanced", "--runs", "runs", "--log", "turns.jsonl"], root);
    let turn: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(turn["env_name"], "CartPole-v1");
    assert_eq!(std::fs::read_to_string(root.join("turns.jsonl")).unwrap().lines().count(), 1);
}

#[test]
fn priors_from_reward_table() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let mut csv = String::from("reservoir_id,env_name,seed,final_reward\n");
    let grns = ["toggle_switch", "repressilator", "goodwin_circadian", "phospho_cascade"];
    for (e, env) in ["CartPole-v1", "Acrobot-v1", "Pendulum-v1"].iter().enumerate() {
        for (i, g) in grns.iter().enumerate() {
            csv.push_str(&format!("{g},{env},0,{}\n", (i * 10 + e) as f64));
        }
    }
    std::fs::write(root.join("rewards.csv"), csv).unwrap();
    langgame(&["analyze", "priors", "--rewards", "rewards.csv", "--out", "out", "--allow-non-canonical"], root);
    for f in ["sign_test.csv", "fisher_cells.csv", "zscores.csv"] {
        let text = std::fs::read_to_string(root.join("out").join(f)).unwrap();
        assert!(text.lines().count() > 1, "{f} is empty");
    }
}

#[test]
fn listings() {
    let dir = tempfile::tempdir().unwrap();
    let models = String::from_utf8(langgame(&["models"], dir.path()).stdout).unwrap();
    for id in ["identity", "mlp", "lorenz", "toggle_switch"] {
        assert!(models.contains(id), "{id} missing from\n{models}");
    }
    let envs: serde_json::Value = serde_json::from_slice(&langgame(&["envs"], dir.path()).stdout).unwrap();
    assert_eq!(envs.as_array().unwrap().len(), 4);
}
