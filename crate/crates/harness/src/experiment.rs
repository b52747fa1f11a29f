//! Seeded experiment execution: one configuration, `runs` independent
//! seeded runs, aggregated into a metric summary.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::time::Instant;

use recurq_core::gridworlds::{GridWorld, GridWorldEnv, StartMode, Variant};
use recurq_core::numerics::RmsProp;
use recurq_core::recnet::{init_network_with, Arch, ValueNetwork};
use recurq_core::valuelearn::{fitted_iteration, AlgoConfig, Algorithm, Environment};

use crate::metrics::{
    learning_performance, learning_time, mean_std, DEFAULT_MAX_STD, DEFAULT_THRESHOLD,
    DEFAULT_WINDOW,
};

/// Optimizer hyperparameters (RMSprop).
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub learning_rate: f64,
    pub decay: f64,
    pub epsilon: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            learning_rate: 1e-3,
            decay: 0.9,
            epsilon: 1e-8,
        }
    }
}

/// Everything one experiment needs: the world, the model, the update rule,
/// scale knobs, and seeding.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub world: Variant,
    pub model: Arch,
    pub start_mode: StartMode,
    pub algo: AlgoConfig,
    pub optimizer: OptimizerConfig,
    pub hidden: usize,
    pub runs: usize,
    pub base_seed: u64,
    /// One-shot (x, y) start hint in random mode for po/ac.
    pub start_hint: bool,
    /// Count the obstacle as a wall for the ac distance channel.
    pub obstacle_blocks_view: bool,
}

impl ExperimentConfig {
    pub fn new(world: Variant, model: Arch, algorithm: Algorithm, start_mode: StartMode) -> Self {
        ExperimentConfig {
            world,
            model,
            start_mode,
            algo: AlgoConfig {
                algorithm,
                ..AlgoConfig::default()
            },
            optimizer: OptimizerConfig::default(),
            hidden: 100,
            runs: 15,
            base_seed: 1,
            start_hint: true,
            obstacle_blocks_view: false,
        }
    }

    /// Short tag like `gw-gru-advantage-fixed`, used in file names.
    pub fn label(&self) -> String {
        format!(
            "{}-{}-{}-{}",
            self.world.tag(),
            self.model.tag(),
            self.algo.algorithm.tag(),
            self.start_mode.tag()
        )
    }

    fn grid_world(&self) -> GridWorld {
        let mut w = GridWorld::new(self.world, self.start_mode);
        w.start_hint = self.start_hint;
        w.obstacle_blocks_view = self.obstacle_blocks_view;
        w
    }
}

/// One seeded run's raw results.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub seed: u64,
    pub rewards: Vec<f64>,
    pub seconds: f64,
    pub train_rounds: usize,
    pub diverged: Option<String>,
}

/// Aggregated metrics for one configuration. Learning times are 1-based
/// episode numbers (the first episode is 1); `None` marks runs that never
/// met the criterion, including diverged runs.
#[derive(Debug, Clone)]
pub struct MetricSummary {
    pub world: String,
    pub model: String,
    pub algo: String,
    pub start_mode: String,
    pub runs: usize,
    pub lt_per_run: Vec<Option<usize>>,
    pub lp_per_run: Vec<Option<f64>>,
    pub lt_mean: Option<f64>,
    pub lt_std: Option<f64>,
    pub lt_na_count: usize,
    pub lp_mean: Option<f64>,
    pub lp_std: Option<f64>,
    pub seconds_mean: f64,
}

/// Executes a single seeded run, returning its record and the final
/// network (for checkpointing).
pub fn run_one(cfg: &ExperimentConfig, seed: u64) -> (RunRecord, ValueNetwork) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut env = GridWorldEnv::new(cfg.grid_world());
    let mut net = init_network_with(
        cfg.model,
        env.observation_dim(),
        cfg.hidden,
        env.action_count(),
        cfg.algo.window_len,
        &mut rng,
    )
    .expect("network construction");
    let mut opt = RmsProp::new(
        cfg.optimizer.learning_rate,
        cfg.optimizer.decay,
        cfg.optimizer.epsilon,
    );
    let start = Instant::now();
    let outcome = fitted_iteration(&mut env, &mut net, &cfg.algo, &mut opt, &mut rng);
    let record = RunRecord {
        seed,
        rewards: outcome.episode_rewards,
        seconds: start.elapsed().as_secs_f64(),
        train_rounds: outcome.train_rounds,
        diverged: outcome.diverged,
    };
    (record, net)
}

/// Runs `cfg.runs` independent runs with seeds `base_seed..base_seed+runs`,
/// in parallel. Results are ordered by run index, so parallel and serial
/// execution aggregate identically.
pub fn run_experiment(cfg: &ExperimentConfig) -> (MetricSummary, Vec<RunRecord>, Vec<ValueNetwork>) {
    let results: Vec<(RunRecord, ValueNetwork)> = (0..cfg.runs as u64)
        .into_par_iter()
        .map(|i| run_one(cfg, cfg.base_seed + i))
        .collect();
    let (records, nets): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    (summarize(cfg, &records), records, nets)
}

/// Aggregates run records into the configuration's metric summary.
pub fn summarize(cfg: &ExperimentConfig, records: &[RunRecord]) -> MetricSummary {
    let lt_per_run: Vec<Option<usize>> = records
        .iter()
        .map(|r| {
            if r.diverged.is_some() {
                None
            } else {
                learning_time(&r.rewards, DEFAULT_THRESHOLD, DEFAULT_MAX_STD, DEFAULT_WINDOW)
                    .map(|e| e + 1)
            }
        })
        .collect();
    let lp_per_run: Vec<Option<f64>> = records
        .iter()
        .map(|r| {
            if r.rewards.is_empty() {
                None
            } else {
                Some(learning_performance(&r.rewards, DEFAULT_WINDOW))
            }
        })
        .collect();

    let lt_values: Vec<f64> = lt_per_run.iter().flatten().map(|&e| e as f64).collect();
    let (lt_mean, lt_std) = if lt_values.is_empty() {
        (None, None)
    } else {
        let (m, s) = mean_std(&lt_values);
        (Some(m), Some(s))
    };
    let lp_values: Vec<f64> = lp_per_run.iter().flatten().copied().collect();
    let (lp_mean, lp_std) = if lp_values.is_empty() {
        (None, None)
    } else {
        let (m, s) = mean_std(&lp_values);
        (Some(m), Some(s))
    };
    let seconds_mean = records.iter().map(|r| r.seconds).sum::<f64>() / records.len().max(1) as f64;

    MetricSummary {
        world: cfg.world.tag().to_string(),
        model: cfg.model.tag().to_string(),
        algo: cfg.algo.algorithm.tag().to_string(),
        start_mode: cfg.start_mode.tag().to_string(),
        runs: records.len(),
        lt_na_count: lt_per_run.iter().filter(|v| v.is_none()).count(),
        lt_per_run,
        lp_per_run,
        lt_mean,
        lt_std,
        lp_mean,
        lp_std,
        seconds_mean,
    }
}

/// The full experiment grid: every combination of update rule, model,
/// world, and start mode (2 x 4 x 3 x 2 = 48), in a fixed order.
pub fn full_grid(template: &ExperimentConfig) -> Vec<ExperimentConfig> {
    let mut out = Vec::with_capacity(48);
    for algo in Algorithm::ALL {
        for model in Arch::ALL {
            for world in Variant::ALL {
                for mode in [StartMode::Fixed, StartMode::Random] {
                    let mut cfg = template.clone();
                    cfg.world = world;
                    cfg.model = model;
                    cfg.start_mode = mode;
                    cfg.algo.algorithm = algo;
                    out.push(cfg);
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_cfg() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::new(
            Variant::Gw,
            Arch::Nnet,
            Algorithm::Advantage,
            StartMode::Fixed,
        );
        cfg.hidden = 4;
        cfg.runs = 2;
        cfg.base_seed = 9;
        cfg.algo.episodes = 12;
        cfg.algo.max_steps = 20;
        cfg
    }

    #[test]
    fn repeated_experiments_are_bit_identical() {
        let cfg = tiny_cfg();
        let (_, records_a, _) = run_experiment(&cfg);
        let (_, records_b, _) = run_experiment(&cfg);
        for (a, b) in records_a.iter().zip(&records_b) {
            assert_eq!(a.seed, b.seed);
            assert_eq!(a.rewards.len(), b.rewards.len());
            for (x, y) in a.rewards.iter().zip(&b.rewards) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn parallel_matches_serial_execution() {
        let cfg = tiny_cfg();
        let (summary_par, records_par, _) = run_experiment(&cfg);
        let records_ser: Vec<RunRecord> = (0..cfg.runs as u64)
            .map(|i| run_one(&cfg, cfg.base_seed + i).0)
            .collect();
        let summary_ser = summarize(&cfg, &records_ser);
        assert_eq!(summary_par.lt_per_run, summary_ser.lt_per_run);
        assert_eq!(summary_par.lp_per_run, summary_ser.lp_per_run);
        for (a, b) in records_par.iter().zip(&records_ser) {
            for (x, y) in a.rewards.iter().zip(&b.rewards) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn grid_enumerates_48_distinct_configs() {
        let grid = full_grid(&tiny_cfg());
        assert_eq!(grid.len(), 48);
        let labels: std::collections::HashSet<String> =
            grid.iter().map(|c| c.label()).collect();
        assert_eq!(labels.len(), 48);
    }

    #[test]
    fn divergence_counts_as_na_learning_time() {
        let cfg = tiny_cfg();
        let records = vec![
            RunRecord {
                seed: 1,
                rewards: vec![-1.0; 12],
                seconds: 0.1,
                train_rounds: 1,
                diverged: None,
            },
            RunRecord {
                seed: 2,
                rewards: vec![-1.0; 4],
                seconds: 0.1,
                train_rounds: 0,
                diverged: Some("boom".into()),
            },
        ];
        let s = summarize(&cfg, &records);
        assert_eq!(s.lt_na_count, 1);
        assert_eq!(s.lt_per_run, vec![Some(1), None]);
        assert_eq!(s.lt_mean, Some(1.0));
    }
}
