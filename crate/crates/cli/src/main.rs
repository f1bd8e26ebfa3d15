use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use langgame_core::analysis::{
    action_matrix, effect_zscores, find_checkpoints, fisher_cells, sign_test, similarity_matrix, RewardTable, Taxonomy,
};
use langgame_core::dialogue::{append_turn, run_round, AgentSet, HttpLlm, LlmClient, MockLlm};
use langgame_core::envs::env_descriptors;
use langgame_core::policy::Checkpoint;
use langgame_core::reservoir::Registry;
use langgame_core::trainer::{calibrate, train, BudgetRule, PpoConfig, Rounding, TrainJob};
use langgame_core::Parallelism;
use langgame_service::ServiceConfig;

#[derive(Parser)]
#[command(name = "langgame", version, about = "Train frozen-reservoir policies and talk to them")]
struct Cli {
    /// Directory of extra reservoir model files (TOML) added to the built-in registry.
    #[arg(long, global = true)]
    models_dir: Option<PathBuf>,
    /// Run every data-parallel loop on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one reservoir policy with PPO.
    Train(TrainArgs),
    /// Train the mlp control, detect convergence and propose a budget.
    Calibrate(CalibrateArgs),
    /// Policy-similarity matrices and reservoir-property statistics.
    #[command(subcommand)]
    Analyze(Analyze),
    /// Run one dialogue round against trained agents.
    Talk(TalkArgs),
    /// Start the HTTP service (settings from LANGGAME_* variables, overridable here).
    Serve(ServeArgs),
    /// List reservoir models in the registry.
    Models,
    /// Print the environment descriptor listing as JSON.
    Envs,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    reservoir: String,
    #[arg(long)]
    env: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Environment-step budget; overrides the config file.
    #[arg(long)]
    steps: Option<u64>,
    #[arg(long, default_value = "runs")]
    out: PathBuf,
    /// PPO config file (TOML, keys as in the PPO config).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Stop once a periodic evaluation reaches this mean reward.
    #[arg(long)]
    target: Option<f64>,
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long)]
    env: String,
    /// Steps given to the calibration run.
    #[arg(long, default_value_t = 800_000)]
    steps: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Round the budget up to the granularity instead of to the nearest multiple.
    #[arg(long)]
    round_up: bool,
}

#[derive(Subcommand)]
enum Analyze {
    /// Pairwise cosine similarity of policies trained on one environment.
    Similarity {
        #[arg(long)]
        env: String,
        #[arg(long, default_value = "runs")]
        runs: PathBuf,
        #[arg(long, default_value = "analysis")]
        out: PathBuf,
        /// First reset seed of the shared probe states.
        #[arg(long, default_value_t = 10_000)]
        probe_seed: u64,
    },
    /// Property tests over a reward table.
    Priors {
        /// CSV with reservoir_id, env_name, seed, final_reward. Built from --runs when omitted.
        #[arg(long)]
        rewards: Option<PathBuf>,
        #[arg(long, default_value = "runs")]
        runs: PathBuf,
        /// Taxonomy TOML; defaults to the tags of the registry's gene-circuit models.
        #[arg(long)]
        taxonomy: Option<PathBuf>,
        #[arg(long, default_value = "analysis")]
        out: PathBuf,
        /// Run the per-cell tests even when the GRN count is not fourteen.
        #[arg(long)]
        allow_non_canonical: bool,
    },
}

#[derive(Args)]
struct TalkArgs {
    #[arg(long)]
    prompt: String,
    #[arg(long, default_value = "runs")]
    runs: PathBuf,
    /// Restrict answering agents to one reservoir.
    #[arg(long)]
    reservoir: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Use the HTTP provider configured by LANGGAME_LLM_* instead of the offline mock.
    #[arg(long)]
    remote: bool,
    /// Append the turn to this JSON-lines log.
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long)]
    port: Option<u16>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    runs: Option<PathBuf>,
}

fn registry(models_dir: Option<&Path>) -> Result<Registry> {
    let mut r = Registry::desk();
    if let Some(dir) = models_dir {
        r.load_dir(dir).with_context(|| format!("loading models from {}", dir.display()))?;
    }
    Ok(r)
}

fn ppo_config(path: Option<&Path>) -> Result<PpoConfig> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Ok(PpoConfig::from_toml(&text)?)
        }
        None => Ok(PpoConfig::default()),
    }
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let par = if cli.sequential { Parallelism::Sequential } else { Parallelism::default() };
    let models_dir = cli.models_dir.as_deref();
    match cli.command {
        Command::Train(a) => {
            let registry = registry(models_dir)?;
            let mut config = ppo_config(a.config.as_deref())?;
            if let Some(s) = a.steps {
                config.total_steps = s;
            }
            if a.target.is_some() {
                config.target_reward = a.target;
            }
            let job = TrainJob {
                registry: &registry,
                reservoir_id: &a.reservoir,
                env_name: &a.env,
                seed: a.seed,
                config: &config,
                out: Some(&a.out),
                parallelism: par,
            };
            let outcome = train(&job)?;
            println!("{} on {} seed {}: {} steps, final reward {:.2}", a.reservoir, a.env, a.seed, outcome.steps, outcome.final_reward);
            if let Some(dir) = &outcome.run_dir {
                println!("run written to {}", dir.display());
            }
        }
        Command::Calibrate(a) => {
            let registry = registry(models_dir)?;
            let config = ppo_config(a.config.as_deref())?;
            let rule = BudgetRule { rounding: if a.round_up { Rounding::Up } else { Rounding::Nearest }, ..BudgetRule::default() };
            let c = calibrate(&registry, &a.env, a.steps, a.seed, &config, &rule, a.out.as_deref(), par)?;
            println!("status: {:?}", c.report.status);
            match c.report.convergence_step {
                Some(step) => println!("convergence step: {step}"),
                None => println!("convergence step: none"),
            }
            println!("final reward: {:.2}", c.training.final_reward);
            println!("proposed budget: {}", c.budget);
        }
        Command::Analyze(Analyze::Similarity { env, runs, out, probe_seed }) => {
            let registry = registry(models_dir)?;
            let mut matrices = Vec::new();
            for path in find_checkpoints(&runs)? {
                let c = Checkpoint::load(&path).with_context(|| path.display().to_string())?;
                if c.env_name != env {
                    continue;
                }
                let label = format!("{}/seed_{}", c.reservoir_id, c.seed);
                let policy = c.into_policy(&registry)?;
                matrices.push(action_matrix(&label, &policy, &env, probe_seed)?);
            }
            if matrices.len() < 2 {
                bail!("need at least two {env} checkpoints under {}, found {}", runs.display(), matrices.len());
            }
            let m = similarity_matrix(&matrices, par)?;
            std::fs::create_dir_all(&out)?;
            let csv = out.join(format!("similarity_{env}.csv"));
            let png = out.join(format!("similarity_{env}.png"));
            m.write_csv(&csv)?;
            m.write_heatmap(&png, 24)?;
            println!("{} policies; wrote {} and {}", m.len(), csv.display(), png.display());
        }
        Command::Analyze(Analyze::Priors { rewards, runs, taxonomy, out, allow_non_canonical }) => {
            let table = match rewards {
                Some(p) => RewardTable::read_csv(&p)?,
                None => RewardTable::from_runs(&runs)?,
            };
            let taxonomy = match taxonomy {
                Some(p) => Taxonomy::from_toml(&std::fs::read_to_string(&p).with_context(|| p.display().to_string())?)?,
                None => Taxonomy::from_registry(&registry(models_dir)?),
            };
            std::fs::create_dir_all(&out)?;
            let signs = sign_test(&table, &taxonomy)?;
            signs.write_csv(&out.join("sign_test.csv"))?;
            for (p, why) in &signs.skipped {
                println!("sign test skipped {}: {why}", p.as_str());
            }
            let fisher = fisher_cells(&table, &taxonomy, allow_non_canonical, par)?;
            fisher.write_csv(&out.join("fisher_cells.csv"))?;
            effect_zscores(&table, &taxonomy)?.write_csv(&out.join("zscores.csv"))?;
            println!(
                "{} sign tests, {} Fisher cells{}; wrote sign_test.csv, fisher_cells.csv, zscores.csv to {}",
                signs.results.len(),
                fisher.cells.len(),
                if fisher.canonical { "" } else { " (non-canonical GRN count)" },
                out.display()
            );
        }
        Command::Talk(a) => {
            let registry = registry(models_dir)?;
            let agents = AgentSet::from_runs(&a.runs, &registry, a.reservoir.as_deref())?;
            if agents.is_empty() {
                bail!("no trained agents under {}; run `langgame train` first", a.runs.display());
            }
            let llm: Box<dyn LlmClient> = if a.remote { Box::new(HttpLlm::from_env()?) } else { Box::new(MockLlm::default()) };
            let turn = run_round(&a.prompt, &agents, llm.as_ref(), a.seed)?;
            if let Some(log) = &a.log {
                append_turn(log, &turn)?;
            }
            println!("{}", serde_json::to_string_pretty(&turn)?);
        }
        Command::Serve(a) => {
            let mut config = ServiceConfig::from_env()?;
            if let Some(p) = a.port {
                config.port = p;
            }
            if let Some(d) = a.data {
                config.data_dir = d;
            }
            if let Some(r) = a.runs {
                config.runs_dir = r;
            }
            if config.models_dir.is_none() {
                config.models_dir = cli.models_dir.clone();
            }
            langgame_service::serve_blocking(config)?;
        }
        Command::Models => {
            for m in registry(models_dir)?.list_models() {
                let tags: Vec<&str> = m.properties.iter().map(|p| p.as_str()).collect();
                println!("{:<20} dim {:<3} {:<20} {}", m.id, m.dim, format!("{:?}", m.category), tags.join(","));
            }
        }
        Command::Envs => println!("{}", serde_json::to_string_pretty(&env_descriptors())?),
    }
    Ok(())
}
