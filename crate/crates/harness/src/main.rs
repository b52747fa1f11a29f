//! Command-line experiment runner.
//!
//! One invocation runs either a single configuration (`--world --model
//! --algo ...`) or the whole grid (`--grid-all`), executes the configured
//! number of seeded runs, and writes results in the selected format.
//! Settings may also come from a key=value file (`--config`); explicit
//! flags win over file entries.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{ArgAction, Parser};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use recurq_core::gridworlds::{GridWorld, GridWorldEnv, StartMode, Variant};
use recurq_core::recnet::{Arch, ValueNetwork};
use recurq_core::valuelearn::{greedy_action, window, Algorithm, Environment};
use recurq_harness::report::{self, ExperimentResult, OutputFormat};
use recurq_harness::{full_grid, run_experiment, welch_t_test, ExperimentConfig};

#[derive(Parser, Debug)]
#[command(
    name = "recurq",
    about = "Batch Q/Advantage iteration with recurrent value networks on gridworlds"
)]
struct Cli {
    /// Key=value settings file mirroring the long flags.
    #[arg(long)]
    config: Option<PathBuf>,

    /// World variant: gw | po | ac.
    #[arg(long)]
    world: Option<String>,
    /// Model architecture: nnet | lstm | gru | mut1.
    #[arg(long)]
    model: Option<String>,
    /// Update rule: q | advantage.
    #[arg(long)]
    algo: Option<String>,
    /// Random initial position each episode (default: fixed start).
    #[arg(long, action = ArgAction::SetTrue)]
    random_start: Option<bool>,
    /// Disable the one-shot (x, y) start hint in random mode.
    #[arg(long, action = ArgAction::SetTrue)]
    no_hint: Option<bool>,
    /// Count the obstacle as a wall in the ac distance channel.
    #[arg(long, action = ArgAction::SetTrue)]
    obstacle_blocks_view: Option<bool>,

    /// Episodes per run.
    #[arg(long)]
    episodes: Option<usize>,
    /// Step cap per episode.
    #[arg(long)]
    max_steps: Option<usize>,
    /// Independent seeded runs per configuration.
    #[arg(long)]
    runs: Option<usize>,
    /// Base seed; run i uses seed + i.
    #[arg(long)]
    seed: Option<u64>,
    /// Hidden size of the tanh and recurrent layers.
    #[arg(long)]
    hidden: Option<usize>,

    /// Softmax temperature.
    #[arg(long)]
    temperature: Option<f64>,
    /// Learning factor alpha.
    #[arg(long)]
    alpha: Option<f64>,
    /// Discount gamma.
    #[arg(long)]
    gamma: Option<f64>,
    /// Advantage gap factor kappa.
    #[arg(long)]
    kappa: Option<f64>,
    /// Train after every N episodes.
    #[arg(long)]
    train_every: Option<usize>,
    /// Observation window length.
    #[arg(long)]
    window: Option<usize>,

    /// RMSprop step size.
    #[arg(long)]
    lr: Option<f64>,
    /// RMSprop accumulator decay.
    #[arg(long)]
    rho: Option<f64>,
    /// RMSprop stabilizer.
    #[arg(long)]
    opt_eps: Option<f64>,

    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format: csv | table | svg.
    #[arg(long)]
    format: Option<String>,
    /// Run the full 48-configuration grid.
    #[arg(long, action = ArgAction::SetTrue)]
    grid_all: Option<bool>,
    /// Exit 0 even if runs diverged.
    #[arg(long, action = ArgAction::SetTrue)]
    allow_divergence: Option<bool>,

    /// Save each run's final network under OUT/nets/.
    #[arg(long, action = ArgAction::SetTrue)]
    save_nets: Option<bool>,
    /// Replay a saved network checkpoint greedily instead of training.
    #[arg(long)]
    replay: Option<PathBuf>,
    /// Episodes to replay.
    #[arg(long)]
    replay_episodes: Option<usize>,
}

/// Settings file: one `key=value` per line, `#` comments, keys matching the
/// long flags (dashes or underscores).
fn load_config_file(path: &Path) -> Result<HashMap<String, String>> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading config file {}", path.display()))?;
    let mut map = HashMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            bail!("{}:{}: expected key=value", path.display(), lineno + 1);
        };
        map.insert(k.trim().replace('-', "_"), v.trim().to_string());
    }
    Ok(map)
}

struct Settings {
    file: HashMap<String, String>,
}

impl Settings {
    fn get<T: std::str::FromStr>(&self, cli: Option<T>, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        if let Some(v) = cli {
            return Ok(v);
        }
        match self.file.get(key) {
            Some(raw) => raw
                .parse()
                .map_err(|e| anyhow!("config key `{key}`: {e}")),
            None => Ok(default),
        }
    }

    fn get_opt(&self, cli: Option<String>, key: &str) -> Option<String> {
        cli.or_else(|| self.file.get(key).cloned())
    }

    fn get_flag(&self, cli: Option<bool>, key: &str) -> Result<bool> {
        if cli == Some(true) {
            return Ok(true);
        }
        match self.file.get(key) {
            Some(raw) => raw
                .parse()
                .map_err(|e| anyhow!("config key `{key}`: {e}")),
            None => Ok(false),
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn run() -> Result<ExitCode> {
    let cli = Cli::parse();
    let file = match &cli.config {
        Some(p) => load_config_file(p)?,
        None => HashMap::new(),
    };
    let s = Settings { file };

    let out_dir = s.get(cli.out.clone(), "out", PathBuf::from("results"))?;
    let format_tag = s
        .get_opt(cli.format.clone(), "format")
        .unwrap_or_else(|| "csv".to_string());
    let format = OutputFormat::from_tag(&format_tag)
        .ok_or_else(|| anyhow!("unknown format `{format_tag}` (csv|table|svg)"))?;

    let random_start = s.get_flag(cli.random_start, "random_start")?;
    let start_mode = if random_start {
        StartMode::Random
    } else {
        StartMode::Fixed
    };
    let grid_all = s.get_flag(cli.grid_all, "grid_all")?;
    let allow_divergence = s.get_flag(cli.allow_divergence, "allow_divergence")?;
    let save_nets = s.get_flag(cli.save_nets, "save_nets")?;

    // Template carrying every knob; --grid-all rewrites the four tags.
    let mut template =
        ExperimentConfig::new(Variant::Gw, Arch::Gru, Algorithm::Q, start_mode);
    template.hidden = s.get(cli.hidden, "hidden", 100)?;
    template.runs = s.get(cli.runs, "runs", 15)?;
    template.base_seed = s.get(cli.seed, "seed", 1)?;
    template.start_hint = !s.get_flag(cli.no_hint, "no_hint")?;
    template.obstacle_blocks_view =
        s.get_flag(cli.obstacle_blocks_view, "obstacle_blocks_view")?;
    template.algo.episodes = s.get(cli.episodes, "episodes", 5000)?;
    template.algo.max_steps = s.get(cli.max_steps, "max_steps", 500)?;
    template.algo.tau = s.get(cli.temperature, "temperature", 0.5)?;
    template.algo.alpha = s.get(cli.alpha, "alpha", 0.2)?;
    template.algo.gamma = s.get(cli.gamma, "gamma", 0.9)?;
    template.algo.kappa = s.get(cli.kappa, "kappa", 0.3)?;
    template.algo.train_every = s.get(cli.train_every, "train_every", 10)?;
    template.algo.window_len = s.get(cli.window, "window", 10)?;
    template.optimizer.learning_rate = s.get(cli.lr, "lr", 1e-3)?;
    template.optimizer.decay = s.get(cli.rho, "rho", 0.9)?;
    template.optimizer.epsilon = s.get(cli.opt_eps, "opt_eps", 1e-8)?;
    template
        .algo
        .validate()
        .map_err(|e| anyhow!("invalid configuration: {e}"))?;
    if template.runs == 0 || template.hidden == 0 || template.algo.episodes == 0 {
        bail!("--runs, --hidden and --episodes must be at least 1");
    }

    if let Some(ckpt) = &cli.replay {
        let episodes = s.get(cli.replay_episodes, "replay_episodes", 10)?;
        let world_tag = s.get_opt(cli.world.clone(), "world");
        if let Some(tag) = world_tag {
            template.world = Variant::from_tag(&tag)
                .ok_or_else(|| anyhow!("unknown world `{tag}` (gw|po|ac)"))?;
        }
        return replay(ckpt, &template, episodes);
    }

    let configs: Vec<ExperimentConfig> = if grid_all {
        full_grid(&template)
    } else {
        let world_tag = s
            .get_opt(cli.world.clone(), "world")
            .ok_or_else(|| anyhow!("--world is required (or use --grid-all)"))?;
        let model_tag = s
            .get_opt(cli.model.clone(), "model")
            .ok_or_else(|| anyhow!("--model is required (or use --grid-all)"))?;
        let algo_tag = s
            .get_opt(cli.algo.clone(), "algo")
            .ok_or_else(|| anyhow!("--algo is required (or use --grid-all)"))?;
        let mut cfg = template.clone();
        cfg.world = Variant::from_tag(&world_tag)
            .ok_or_else(|| anyhow!("unknown world `{world_tag}` (gw|po|ac)"))?;
        cfg.model = Arch::from_tag(&model_tag)
            .map_err(|_| anyhow!("unknown model `{model_tag}` (nnet|lstm|gru|mut1)"))?;
        cfg.algo.algorithm = Algorithm::from_tag(&algo_tag)
            .ok_or_else(|| anyhow!("unknown algo `{algo_tag}` (q|advantage)"))?;
        vec![cfg]
    };

    let mut results = Vec::new();
    let mut any_diverged = false;
    for (i, cfg) in configs.iter().enumerate() {
        eprintln!(
            "[{}/{}] {} (runs={}, episodes={}, hidden={})",
            i + 1,
            configs.len(),
            cfg.label(),
            cfg.runs,
            cfg.algo.episodes,
            cfg.hidden
        );
        let (summary, records, nets) = run_experiment(cfg);
        for r in &records {
            if let Some(msg) = &r.diverged {
                any_diverged = true;
                eprintln!("  run seed {} diverged: {msg}", r.seed);
            }
        }
        eprintln!(
            "  learning time {} (NA {}), learning performance {}, {:.1}s/run",
            fmt_opt_pair(summary.lt_mean, summary.lt_std),
            summary.lt_na_count,
            fmt_opt_pair(summary.lp_mean, summary.lp_std),
            summary.seconds_mean
        );
        if save_nets {
            let dir = out_dir.join("nets");
            fs::create_dir_all(&dir)?;
            for (net, record) in nets.iter().zip(&records) {
                let path = dir.join(format!("{}_seed{}.json", cfg.label(), record.seed));
                let f = fs::File::create(&path)?;
                net.save_checkpoint(f)
                    .map_err(|e| anyhow!("saving {}: {e}", path.display()))?;
            }
        }
        results.push(ExperimentResult {
            label: cfg.label(),
            summary,
            records,
        });
    }

    report::emit_results(&results, format, &out_dir)?;
    eprintln!("results written to {}", out_dir.display());

    if grid_all {
        print_significance(&results);
    }

    if any_diverged && !allow_divergence {
        eprintln!("at least one run diverged (pass --allow-divergence to ignore)");
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}

fn fmt_opt_pair(mean: Option<f64>, std: Option<f64>) -> String {
    match (mean, std) {
        (Some(m), Some(s)) => format!("{m:.1}/{s:.1}"),
        _ => "NA".to_string(),
    }
}

/// Per (world, algo, start-mode): Welch p-value between gru and lstm
/// learning times, on the runs where both models produced one.
fn print_significance(results: &[ExperimentResult]) {
    println!("\ngru vs lstm learning-time significance (Welch two-sided):");
    for mode in ["fixed", "random"] {
        for algo in ["advantage", "q"] {
            for world in ["gw", "po", "ac"] {
                let pick = |model: &str| -> Option<Vec<f64>> {
                    results
                        .iter()
                        .map(|r| &r.summary)
                        .find(|s| {
                            s.world == world
                                && s.model == model
                                && s.algo == algo
                                && s.start_mode == mode
                        })
                        .map(|s| {
                            s.lt_per_run
                                .iter()
                                .flatten()
                                .map(|&e| e as f64)
                                .collect()
                        })
                };
                let (Some(gru), Some(lstm)) = (pick("gru"), pick("lstm")) else {
                    continue;
                };
                match welch_t_test(&gru, &lstm) {
                    Some(p) => println!("  {world:>2} {algo:<10} {mode:<6} p = {p:.4}"),
                    None => println!(
                        "  {world:>2} {algo:<10} {mode:<6} p = n/a (too few learned runs)"
                    ),
                }
            }
        }
    }
}

/// Loads a checkpoint and rolls out the greedy policy (argmax with ties to
/// the lowest action index).
fn replay(ckpt: &Path, template: &ExperimentConfig, episodes: usize) -> Result<ExitCode> {
    let f = fs::File::open(ckpt).with_context(|| format!("opening {}", ckpt.display()))?;
    let net =
        ValueNetwork::load_checkpoint(f).map_err(|e| anyhow!("loading checkpoint: {e}"))?;
    let mut world = GridWorld::new(template.world, template.start_mode);
    world.start_hint = template.start_hint;
    world.obstacle_blocks_view = template.obstacle_blocks_view;
    let mut env = GridWorldEnv::new(world);
    if env.observation_dim() != net.input_dim() {
        bail!(
            "checkpoint expects {} inputs but the world produces {} (set --world/--random-start to match)",
            net.input_dim(),
            env.observation_dim()
        );
    }
    let mut rng = ChaCha8Rng::seed_from_u64(template.base_seed);
    let mut total = 0.0;
    for e in 1..=episodes {
        let first = Environment::reset(&mut env, &mut rng);
        let mut observations = vec![first];
        let mut ret = 0.0;
        for t in 0..template.algo.max_steps {
            let win = window(&observations, t, net.window());
            let values = net.forward(&win).map_err(|e| anyhow!("forward: {e}"))?;
            let action = greedy_action(&values);
            let (r, obs, terminal) = Environment::step(&mut env, action);
            observations.push(obs);
            ret += r;
            if terminal {
                break;
            }
        }
        println!("episode {e}: return {ret}");
        total += ret;
    }
    println!(
        "mean return over {episodes} episodes: {}",
        total / episodes as f64
    );
    Ok(ExitCode::SUCCESS)
}
