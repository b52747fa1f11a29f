//! Target computation (Q-learning and Advantage learning), the softmax
//! behavior policy, observation windowing, episode execution, and the
//! outer batch-iteration loop.
//!
//! Episodes are collected with a frozen network: each transition's
//! regression target is computed immediately from the current predictions
//! and stored, and the network trains only after every `train_every`
//! episodes, on exactly those episodes' samples.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::recnet::{RecnetError, TargetSample, ValueNetwork};
use crate::numerics::RmsProp;

#[derive(Debug, Error)]
pub enum ValueLearnError {
    #[error(transparent)]
    Recnet(#[from] RecnetError),
    #[error("invalid configuration: {0}")]
    BadConfig(String),
}

pub type Result<T> = std::result::Result<T, ValueLearnError>;

/// Value-update rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Q,
    Advantage,
}

impl Algorithm {
    pub const ALL: [Algorithm; 2] = [Algorithm::Q, Algorithm::Advantage];

    pub fn tag(self) -> &'static str {
        match self {
            Algorithm::Q => "q",
            Algorithm::Advantage => "advantage",
        }
    }

    pub fn from_tag(s: &str) -> Option<Self> {
        Algorithm::ALL.iter().copied().find(|a| a.tag() == s)
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

/// Learning-loop configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgoConfig {
    pub algorithm: Algorithm,
    /// Learning factor alpha.
    pub alpha: f64,
    /// Discount gamma.
    pub gamma: f64,
    /// Advantage gap factor kappa; kappa = 1 recovers Q-learning.
    pub kappa: f64,
    /// Softmax temperature tau.
    pub tau: f64,
    /// Observation-window length fed to the network.
    pub window_len: usize,
    /// Train after every this many episodes, on exactly their samples.
    pub train_every: usize,
    /// Per-episode step cap; hitting it truncates without termination.
    pub max_steps: usize,
    /// Total episodes per run.
    pub episodes: usize,
    /// Training epochs per round.
    pub epochs: usize,
    /// Minibatch size within a round.
    pub batch_size: usize,
}

impl Default for AlgoConfig {
    fn default() -> Self {
        AlgoConfig {
            algorithm: Algorithm::Q,
            alpha: 0.2,
            gamma: 0.9,
            kappa: 0.3,
            tau: 0.5,
            window_len: 10,
            train_every: 10,
            max_steps: 500,
            episodes: 5000,
            epochs: 2,
            batch_size: 10,
        }
    }
}

impl AlgoConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(ValueLearnError::BadConfig(m.to_string()));
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad("alpha must be in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma must be in [0, 1]");
        }
        if !self.kappa.is_finite() || self.kappa <= 0.0 {
            return bad("kappa must be positive");
        }
        if !self.tau.is_finite() || self.tau <= 0.0 {
            return bad("tau must be positive");
        }
        if self.window_len == 0 || self.train_every == 0 || self.max_steps == 0 {
            return bad("window_len, train_every and max_steps must be positive");
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return bad("epochs and batch_size must be positive");
        }
        Ok(())
    }
}

/// Anything an episode loop can interact with.
pub trait Environment {
    /// Starts a fresh episode, returning the first observation.
    fn reset(&mut self, rng: &mut ChaCha8Rng) -> Vec<f64>;
    /// Applies an action: reward, next observation, terminal flag.
    fn step(&mut self, action: usize) -> (f64, Vec<f64>, bool);
    fn observation_dim(&self) -> usize;
    fn action_count(&self) -> usize;
}

impl Environment for crate::gridworlds::GridWorldEnv {
    fn reset(&mut self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        // Inherent methods win over trait methods in path resolution.
        crate::gridworlds::GridWorldEnv::reset(self, rng)
    }

    fn step(&mut self, action: usize) -> (f64, Vec<f64>, bool) {
        let dir = crate::gridworlds::Direction::from_index(action).expect("action in range");
        let tr = crate::gridworlds::GridWorldEnv::step(self, dir);
        (tr.reward, tr.observation, tr.terminal)
    }

    fn observation_dim(&self) -> usize {
        crate::gridworlds::GridWorldEnv::observation_dim(self)
    }

    fn action_count(&self) -> usize {
        4
    }
}

/// One collected episode: its samples, undiscounted return, length, and
/// whether it ended at the goal (as opposed to the step cap).
#[derive(Debug, Clone)]
pub struct EpisodeRecord {
    pub samples: Vec<TargetSample>,
    pub total_reward: f64,
    pub steps: usize,
    pub reached_goal: bool,
}

/// Per-run outcome: every episode's return, the number of training rounds
/// performed, and a divergence diagnostic if the run aborted.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub episode_rewards: Vec<f64>,
    pub train_rounds: usize,
    pub diverged: Option<String>,
}

/// Q-learning target: `Q(o,a) + alpha (r + B - Q(o,a))` with bootstrap
/// `B = gamma max_a' Q(o', a')`, dropped on termination.
pub fn q_target(
    values_t: &[f64],
    values_next: &[f64],
    action: usize,
    reward: f64,
    terminal: bool,
    cfg: &AlgoConfig,
) -> f64 {
    let bootstrap = if terminal {
        0.0
    } else {
        cfg.gamma * max_value(values_next)
    };
    let q = values_t[action];
    q + cfg.alpha * (reward + bootstrap - q)
}

/// Advantage-learning target: the temporal-difference correction is
/// divided by kappa around the state's best value, widening the gap
/// between the best and the other actions.
pub fn advantage_target(
    values_t: &[f64],
    values_next: &[f64],
    action: usize,
    reward: f64,
    terminal: bool,
    cfg: &AlgoConfig,
) -> f64 {
    let bootstrap = if terminal {
        0.0
    } else {
        cfg.gamma * max_value(values_next)
    };
    let m = max_value(values_t);
    let a = values_t[action];
    let delta = m + (reward + bootstrap - m) / cfg.kappa - a;
    a + cfg.alpha * delta
}

/// Dispatches on the configured update rule.
pub fn compute_target(
    values_t: &[f64],
    values_next: &[f64],
    action: usize,
    reward: f64,
    terminal: bool,
    cfg: &AlgoConfig,
) -> f64 {
    match cfg.algorithm {
        Algorithm::Q => q_target(values_t, values_next, action, reward, terminal, cfg),
        Algorithm::Advantage => {
            advantage_target(values_t, values_next, action, reward, terminal, cfg)
        }
    }
}

/// Maximum as a pure reduction; no index is involved so ties need no rule.
pub fn max_value(values: &[f64]) -> f64 {
    values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Argmax with ties broken toward the lowest action index.
pub fn greedy_action(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Samples an action with probability proportional to `exp(value / tau)`,
/// computed with max subtraction so large values cannot overflow.
pub fn softmax_policy(values: &[f64], tau: f64, rng: &mut ChaCha8Rng) -> usize {
    let probs = softmax_probabilities(values, tau);
    let draw: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if draw < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// The action distribution the softmax policy samples from.
pub fn softmax_probabilities(values: &[f64], tau: f64) -> Vec<f64> {
    assert!(tau > 0.0, "temperature must be positive");
    assert!(!values.is_empty());
    let m = max_value(values);
    let exps: Vec<f64> = values.iter().map(|v| ((v - m) / tau).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.iter().map(|e| e / z).collect()
}

/// The `length` observations ending at index `t` inclusive, left-padded
/// with zero vectors when fewer exist.
pub fn window(observations: &[Vec<f64>], t: usize, length: usize) -> Vec<Vec<f64>> {
    assert!(t < observations.len(), "window index past history");
    let dim = observations[0].len();
    let mut out = Vec::with_capacity(length);
    for k in 0..length {
        // indices t-length+1 ..= t
        let idx = (t + 1 + k) as isize - length as isize;
        if idx < 0 {
            out.push(vec![0.0; dim]);
        } else {
            out.push(observations[idx as usize].clone());
        }
    }
    out
}

/// Runs one episode with the frozen network: selects actions by softmax
/// over the window predictions, computes each transition's regression
/// target immediately (zero bootstrap at the goal; the step cap keeps its
/// bootstrap as plain truncation), and collects the samples. No training
/// happens here.
pub fn run_episode<E: Environment>(
    env: &mut E,
    net: &ValueNetwork,
    cfg: &AlgoConfig,
    rng: &mut ChaCha8Rng,
) -> Result<EpisodeRecord> {
    let first_obs = env.reset(rng);
    let mut observations = vec![first_obs];
    let mut samples = Vec::new();
    let mut total_reward = 0.0;
    let mut reached_goal = false;
    let mut values_t: Option<Vec<f64>> = None;

    for t in 0..cfg.max_steps {
        let win = window(&observations, t, cfg.window_len);
        let values = match values_t.take() {
            Some(v) => v,
            None => net.forward(&win)?,
        };
        let action = softmax_policy(&values, cfg.tau, rng);
        let (reward, next_obs, terminal) = env.step(action);
        observations.push(next_obs);
        total_reward += reward;

        let target = if terminal {
            // Bootstrap is dropped; no evaluation of the next window needed.
            compute_target(&values, &values, action, reward, true, cfg)
        } else {
            let next_win = window(&observations, t + 1, cfg.window_len);
            let values_next = net.forward(&next_win)?;
            let target = compute_target(&values, &values_next, action, reward, false, cfg);
            values_t = Some(values_next);
            target
        };
        if !target.is_finite() {
            return Err(ValueLearnError::BadConfig(format!(
                "non-finite target at step {t}"
            )));
        }
        samples.push(TargetSample {
            window: win,
            action,
            target,
        });
        if terminal {
            reached_goal = true;
            break;
        }
    }

    Ok(EpisodeRecord {
        steps: samples.len(),
        samples,
        total_reward,
        reached_goal,
    })
}

/// The outer loop: `episodes` episodes; after every `train_every` of them,
/// one training call on exactly those episodes' samples (targets as
/// computed at collection time). Any non-finite value aborts the run with
/// a diagnostic in `diverged` instead of propagating.
pub fn fitted_iteration<E: Environment>(
    env: &mut E,
    net: &mut ValueNetwork,
    cfg: &AlgoConfig,
    opt: &mut RmsProp,
    rng: &mut ChaCha8Rng,
) -> RunOutcome {
    debug_assert!(cfg.validate().is_ok());
    let mut rewards = Vec::with_capacity(cfg.episodes);
    let mut buffer: Vec<TargetSample> = Vec::new();
    let mut train_rounds = 0;

    for e in 1..=cfg.episodes {
        match run_episode(env, net, cfg, rng) {
            Ok(record) => {
                rewards.push(record.total_reward);
                buffer.extend(record.samples);
            }
            Err(err) => {
                return RunOutcome {
                    episode_rewards: rewards,
                    train_rounds,
                    diverged: Some(format!("episode {e}: {err}")),
                };
            }
        }
        if e % cfg.train_every == 0 {
            match net.train_batch(&buffer, cfg.epochs, cfg.batch_size, opt, rng) {
                Ok(_) => {
                    train_rounds += 1;
                    buffer.clear();
                }
                Err(err) => {
                    return RunOutcome {
                        episode_rewards: rewards,
                        train_rounds,
                        diverged: Some(format!("training after episode {e}: {err}")),
                    };
                }
            }
        }
    }

    RunOutcome {
        episode_rewards: rewards,
        train_rounds,
        diverged: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::SeedableRng;

    fn cfg(algorithm: Algorithm) -> AlgoConfig {
        AlgoConfig {
            algorithm,
            ..AlgoConfig::default()
        }
    }

    #[test]
    fn q_target_examples() {
        let c = cfg(Algorithm::Q);
        // Zero-initialized values, terminal goal reward.
        let t = q_target(&[0.0; 4], &[0.0; 4], 1, 10.0, true, &c);
        assert_eq!(t, 2.0);
        // values_t[a]=1, max next = 2, r=-1: 1 + 0.2(-1 + 1.8 - 1) = 0.96
        let t = q_target(&[0.0, 1.0, 0.0, 0.0], &[2.0, 0.0, 1.0, -3.0], 1, -1.0, false, &c);
        assert!((t - 0.96).abs() < 1e-15);
        // alpha = 0 returns the current value untouched.
        let mut c0 = c.clone();
        c0.alpha = 0.0;
        let t = q_target(&[0.3, -0.7, 0.0, 0.0], &[5.0; 4], 1, -1.0, false, &c0);
        assert_eq!(t, -0.7);
    }

    #[test]
    fn advantage_target_examples() {
        let c = cfg(Algorithm::Advantage);
        // All-zero values, terminal r=10: 0.2 * 10/0.3 = 6.666...
        let t = advantage_target(&[0.0; 4], &[0.0; 4], 2, 10.0, true, &c);
        assert!((t - 0.2 * (10.0 / 0.3)).abs() < 1e-12);
        assert!((t - 6.666666666666667).abs() < 1e-12);
        // Optimal action with r + B = M keeps its value at M.
        let values_t = [5.0, 0.0, 0.0, 0.0];
        let values_next = [5.0 / 0.9, 0.0, 0.0, 0.0]; // B = gamma*max = 5 = M, r = 0
        let t = advantage_target(&values_t, &values_next, 0, 0.0, false, &c);
        assert!((t - 5.0).abs() < 1e-12, "optimal action keeps its value, got {t}");
    }

    #[test]
    fn advantage_with_unit_kappa_is_q_learning() {
        let mut c = cfg(Algorithm::Advantage);
        c.kappa = 1.0;
        let values_t = [1.5, -2.0, 0.25, 3.0];
        let values_next = [0.0, 4.0, -1.0, 2.0];
        for a in 0..4 {
            for (r, term) in [(-1.0, false), (-5.0, false), (10.0, true)] {
                let adv = advantage_target(&values_t, &values_next, a, r, term, &c);
                let q = q_target(&values_t, &values_next, a, r, term, &c);
                assert!((adv - q).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn softmax_uniform_for_equal_values() {
        let p = softmax_probabilities(&[1.0, 1.0, 1.0, 1.0], 0.5);
        for v in p {
            assert!((v - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_two_action_hand_value() {
        // p(a0) = e^2 / (e^2 + 1)
        let p = softmax_probabilities(&[1.0, 0.0], 0.5);
        let expected = (2.0_f64).exp() / ((2.0_f64).exp() + 1.0);
        assert!((p[0] - expected).abs() < 1e-15);
        assert!((p[0] - 0.8807970779778824).abs() < 1e-12);
        assert!((p[0] + p[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn softmax_handles_huge_values() {
        let p = softmax_probabilities(&[1e6, 0.0, -1e6], 0.5);
        assert!(p[0] > 1.0 - 1e-12);
        assert!(p.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn near_zero_temperature_acts_greedily() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let a = softmax_policy(&[0.1, 0.9, 0.3, 0.5], 1e-6, &mut rng);
            assert_eq!(a, 1);
        }
    }

    #[test]
    fn greedy_ties_break_to_lowest_index() {
        assert_eq!(greedy_action(&[1.0, 1.0, 1.0, 1.0]), 0);
        assert_eq!(greedy_action(&[0.0, 2.0, 2.0, 1.0]), 1);
        assert_eq!(greedy_action(&[-1.0, -3.0, -1.0, -5.0]), 0);
    }

    #[test]
    fn window_pads_left_with_zeros() {
        let obs: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64, 1.0]).collect();
        let w = window(&obs, 0, 10);
        assert_eq!(w.len(), 10);
        for pad in &w[..9] {
            assert_eq!(pad, &vec![0.0, 0.0]);
        }
        assert_eq!(w[9], vec![0.0, 1.0]);

        let w = window(&obs, 9, 10);
        for (k, o) in w.iter().enumerate() {
            assert_eq!(o[0], k as f64);
        }

        let w = window(&obs, 42, 10);
        for (k, o) in w.iter().enumerate() {
            assert_eq!(o[0], (33 + k) as f64);
        }
    }

    #[test]
    fn config_validation_rejects_bad_ranges() {
        let mut c = AlgoConfig::default();
        assert!(c.validate().is_ok());
        c.alpha = 1.5;
        assert!(c.validate().is_err());
        c.alpha = 0.2;
        c.kappa = 0.0;
        assert!(c.validate().is_err());
        c.kappa = 0.3;
        c.tau = -1.0;
        assert!(c.validate().is_err());
    }
}
