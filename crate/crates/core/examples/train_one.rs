//! Trains one policy and prints its evaluation history.
//!
//! `cargo run --release --example train_one -- <reservoir> <env> <seed> <steps> [target]`

use langgame_core::reservoir::Registry;
use langgame_core::trainer::{train, PpoConfig, TrainJob};
use langgame_core::Parallelism;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let reservoir = args.get(1).map(String::as_str).unwrap_or("mlp");
    let env = args.get(2).map(String::as_str).unwrap_or("CartPole-v1");
    let seed: u64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(0);
    let steps: u64 = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(100_000);
    let target: Option<f64> = args.get(5).and_then(|s| s.parse().ok());
    let registry = Registry::desk();
    let cfg = PpoConfig { total_steps: steps, target_reward: target, ..PpoConfig::default() };
    let start = std::time::Instant::now();
    let out = train(&TrainJob {
        registry: &registry,
        reservoir_id: reservoir,
        env_name: env,
        seed,
        config: &cfg,
        out: None,
        parallelism: Parallelism::default(),
    })
    .expect("training failed");
    for e in &out.evals {
        println!("step {:>8}  eval {:>9.2} ± {:.2}", e.step, e.mean_reward, e.std_reward);
    }
    println!(
        "{reservoir} {env} seed {seed}: final {:.2} after {} steps in {:.1}s",
        out.final_reward,
        out.steps,
        start.elapsed().as_secs_f64()
    );
}
