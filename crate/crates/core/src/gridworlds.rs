//! The 10x5 gridworld in three observability variants: fully observable
//! (`gw`, one-hot x and y), x-only (`po`, the y channel masked to zero),
//! and agent-centric (`ac`, orientation plus distance to the wall ahead).
//!
//! Rewards: -1 per step, -5 for walking into a wall or the obstacle
//! (position unchanged), +10 on reaching the goal (terminal, replacing the
//! step reward). In random-start mode the initial cell is uniform over all
//! in-bounds cells except the obstacle and the goal, and partially
//! observable variants may append a one-shot (x, y) hint visible only at
//! the first time step.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Movement direction; also the action set and the orientation encoding
/// (up=0, down=1, left=2, right=3). Up decreases y.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Up = 0,
    Down = 1,
    Left = 2,
    Right = 3,
}

impl Direction {
    pub const ALL: [Direction; 4] = [
        Direction::Up,
        Direction::Down,
        Direction::Left,
        Direction::Right,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Direction> {
        Direction::ALL.get(i).copied()
    }
}

/// Observability variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Fully observable: x and y.
    Gw,
    /// Partially observable: x only, y masked to zero.
    Po,
    /// Agent-centric: orientation and distance to the wall ahead.
    Ac,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Gw, Variant::Po, Variant::Ac];

    pub fn tag(self) -> &'static str {
        match self {
            Variant::Gw => "gw",
            Variant::Po => "po",
            Variant::Ac => "ac",
        }
    }

    pub fn from_tag(s: &str) -> Option<Self> {
        Variant::ALL.iter().copied().find(|v| v.tag() == s)
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

/// Initial-position mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StartMode {
    Fixed,
    Random,
}

impl StartMode {
    pub fn tag(self) -> &'static str {
        match self {
            StartMode::Fixed => "fixed",
            StartMode::Random => "random",
        }
    }
}

/// Grid geometry and reward scheme.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub width: usize,
    pub height: usize,
    pub start: (usize, usize),
    pub goal: (usize, usize),
    pub obstacle: (usize, usize),
    pub step_reward: f64,
    pub collision_reward: f64,
    pub goal_reward: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            width: 10,
            height: 5,
            start: (0, 2),
            goal: (9, 2),
            obstacle: (5, 2),
            step_reward: -1.0,
            collision_reward: -5.0,
            goal_reward: 10.0,
        }
    }
}

impl GridSpec {
    pub fn in_bounds(&self, x: isize, y: isize) -> bool {
        x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height
    }

    /// All cells a random start may use: in bounds, not the obstacle (which
    /// is not standable) and not the goal (a zero-length episode).
    pub fn legal_start_cells(&self) -> Vec<(usize, usize)> {
        let mut cells = Vec::with_capacity(self.width * self.height);
        for y in 0..self.height {
            for x in 0..self.width {
                if (x, y) != self.obstacle && (x, y) != self.goal {
                    cells.push((x, y));
                }
            }
        }
        cells
    }
}

/// Position, orientation and time index of one episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvState {
    pub x: usize,
    pub y: usize,
    pub orientation: Direction,
    pub t: usize,
}

/// Environment configuration: geometry plus observation encoding options.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridWorld {
    pub spec: GridSpec,
    pub variant: Variant,
    pub start_mode: StartMode,
    /// Append the one-shot (x, y) start hint in random-start mode for the
    /// partially observable variants.
    pub start_hint: bool,
    /// Count the obstacle as a wall when measuring the distance ahead.
    pub obstacle_blocks_view: bool,
}

impl GridWorld {
    pub fn new(variant: Variant, start_mode: StartMode) -> Self {
        GridWorld {
            spec: GridSpec::default(),
            variant,
            start_mode,
            start_hint: true,
            obstacle_blocks_view: false,
        }
    }

    fn hint_active(&self) -> bool {
        self.start_hint
            && self.start_mode == StartMode::Random
            && matches!(self.variant, Variant::Po | Variant::Ac)
    }

    /// Observation vector length for this configuration; constant across
    /// an episode.
    pub fn observation_dim(&self) -> usize {
        let base = match self.variant {
            Variant::Gw | Variant::Po => self.spec.width + self.spec.height,
            Variant::Ac => 4 + self.spec.width.max(self.spec.height),
        };
        if self.hint_active() {
            base + self.spec.width + self.spec.height
        } else {
            base
        }
    }
}

/// Cells strictly between the agent and the boundary wall it is facing.
/// With `count_obstacle`, the obstacle truncates the view like a wall.
pub fn distance_to_wall(
    spec: &GridSpec,
    x: usize,
    y: usize,
    orientation: Direction,
    count_obstacle: bool,
) -> usize {
    let boundary = match orientation {
        Direction::Up => y,
        Direction::Down => spec.height - 1 - y,
        Direction::Left => x,
        Direction::Right => spec.width - 1 - x,
    };
    if !count_obstacle {
        return boundary;
    }
    let (dx, dy) = delta(orientation);
    let (mut cx, mut cy) = (x as isize, y as isize);
    for d in 0..boundary {
        cx += dx;
        cy += dy;
        if (cx as usize, cy as usize) == spec.obstacle {
            return d;
        }
    }
    boundary
}

fn delta(d: Direction) -> (isize, isize) {
    match d {
        Direction::Up => (0, -1),
        Direction::Down => (0, 1),
        Direction::Left => (-1, 0),
        Direction::Right => (1, 0),
    }
}

fn one_hot(out: &mut Vec<f64>, size: usize, index: usize) {
    let base = out.len();
    out.resize(base + size, 0.0);
    out[base + index] = 1.0;
}

/// One-hot observation for `state` under the world's variant and options.
pub fn encode_observation(world: &GridWorld, state: &EnvState) -> Vec<f64> {
    let spec = &world.spec;
    let mut obs = Vec::with_capacity(world.observation_dim());
    match world.variant {
        Variant::Gw => {
            one_hot(&mut obs, spec.width, state.x);
            one_hot(&mut obs, spec.height, state.y);
        }
        Variant::Po => {
            one_hot(&mut obs, spec.width, state.x);
            // y channel present but masked to zero
            obs.resize(obs.len() + spec.height, 0.0);
        }
        Variant::Ac => {
            one_hot(&mut obs, 4, state.orientation.index());
            let d = distance_to_wall(
                spec,
                state.x,
                state.y,
                state.orientation,
                world.obstacle_blocks_view,
            );
            one_hot(&mut obs, spec.width.max(spec.height), d);
        }
    }
    if world.hint_active() {
        if state.t == 0 {
            one_hot(&mut obs, spec.width, state.x);
            one_hot(&mut obs, spec.height, state.y);
        } else {
            obs.resize(obs.len() + spec.width + spec.height, 0.0);
        }
    }
    obs
}

/// Fresh episode state and its first observation. Fixed mode starts at the
/// spec's start cell; random mode draws uniformly over the legal cells.
/// Orientation starts right, t starts at 0.
pub fn env_reset(world: &GridWorld, rng: &mut ChaCha8Rng) -> (EnvState, Vec<f64>) {
    let (x, y) = match world.start_mode {
        StartMode::Fixed => world.spec.start,
        StartMode::Random => {
            let cells = world.spec.legal_start_cells();
            cells[rng.gen_range(0..cells.len())]
        }
    };
    let state = EnvState {
        x,
        y,
        orientation: Direction::Right,
        t: 0,
    };
    let obs = encode_observation(world, &state);
    (state, obs)
}

/// Outcome of one transition.
#[derive(Debug, Clone)]
pub struct Transition {
    pub state: EnvState,
    pub reward: f64,
    pub observation: Vec<f64>,
    pub terminal: bool,
}

/// Applies `action` to `state`. Moves that would leave the grid or enter
/// the obstacle leave the position unchanged at the collision reward.
/// Orientation follows the attempted direction either way. Reaching the
/// goal yields the goal reward alone and terminates.
pub fn env_step(world: &GridWorld, state: &EnvState, action: Direction) -> Transition {
    let spec = &world.spec;
    let (dx, dy) = delta(action);
    let (tx, ty) = (state.x as isize + dx, state.y as isize + dy);
    let blocked = !spec.in_bounds(tx, ty) || (tx as usize, ty as usize) == spec.obstacle;
    let (nx, ny) = if blocked {
        (state.x, state.y)
    } else {
        (tx as usize, ty as usize)
    };
    let terminal = (nx, ny) == spec.goal;
    let reward = if blocked {
        spec.collision_reward
    } else if terminal {
        spec.goal_reward
    } else {
        spec.step_reward
    };
    let next = EnvState {
        x: nx,
        y: ny,
        orientation: action,
        t: state.t + 1,
    };
    let observation = encode_observation(world, &next);
    Transition {
        state: next,
        reward,
        observation,
        terminal,
    }
}

/// Stateful adapter over the pure transition functions, for episode loops.
#[derive(Debug, Clone)]
pub struct GridWorldEnv {
    world: GridWorld,
    state: Option<EnvState>,
    terminal: bool,
}

impl GridWorldEnv {
    pub fn new(world: GridWorld) -> Self {
        GridWorldEnv {
            world,
            state: None,
            terminal: false,
        }
    }

    pub fn world(&self) -> &GridWorld {
        &self.world
    }

    pub fn state(&self) -> Option<&EnvState> {
        self.state.as_ref()
    }

    pub fn reset(&mut self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let (state, obs) = env_reset(&self.world, rng);
        self.state = Some(state);
        self.terminal = false;
        obs
    }

    pub fn step(&mut self, action: Direction) -> Transition {
        assert!(!self.terminal, "step on a terminal episode");
        let state = self.state.expect("step before reset");
        let tr = env_step(&self.world, &state, action);
        self.state = Some(tr.state);
        self.terminal = tr.terminal;
        tr
    }

    pub fn observation_dim(&self) -> usize {
        self.world.observation_dim()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::SeedableRng;

    fn world(variant: Variant, mode: StartMode) -> GridWorld {
        GridWorld::new(variant, mode)
    }

    #[test]
    fn fixed_reset_starts_at_spec_start() {
        let w = world(Variant::Gw, StartMode::Fixed);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let (s, _) = env_reset(&w, &mut rng);
            assert_eq!((s.x, s.y), (0, 2));
            assert_eq!(s.orientation, Direction::Right);
            assert_eq!(s.t, 0);
        }
    }

    #[test]
    fn random_reset_covers_all_legal_cells_uniformly() {
        let w = world(Variant::Gw, StartMode::Random);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 10_000;
        let mut counts = std::collections::HashMap::new();
        for _ in 0..n {
            let (s, _) = env_reset(&w, &mut rng);
            assert_ne!((s.x, s.y), w.spec.obstacle);
            assert_ne!((s.x, s.y), w.spec.goal);
            *counts.entry((s.x, s.y)).or_insert(0usize) += 1;
        }
        assert_eq!(counts.len(), 48, "all 48 legal cells observed");
        // Multinomial bound: p = 1/48, 3 sigma around n*p.
        let p = 1.0 / 48.0;
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        for (&cell, &c) in &counts {
            let dev = (c as f64 - n as f64 * p).abs();
            assert!(dev < 3.0 * sigma, "cell {cell:?} count {c} deviates");
        }
    }

    #[test]
    fn step_rewards_match_the_reward_scheme() {
        let w = world(Variant::Gw, StartMode::Fixed);
        let s = EnvState {
            x: 0,
            y: 2,
            orientation: Direction::Right,
            t: 0,
        };
        let tr = env_step(&w, &s, Direction::Right);
        assert_eq!((tr.state.x, tr.state.y), (1, 2));
        assert_eq!(tr.reward, -1.0);
        assert!(!tr.terminal);

        let s = EnvState {
            x: 4,
            y: 2,
            orientation: Direction::Right,
            t: 3,
        };
        let tr = env_step(&w, &s, Direction::Right);
        assert_eq!((tr.state.x, tr.state.y), (4, 2), "obstacle blocks");
        assert_eq!(tr.reward, -5.0);
        assert!(!tr.terminal);

        let s = EnvState {
            x: 8,
            y: 2,
            orientation: Direction::Right,
            t: 5,
        };
        let tr = env_step(&w, &s, Direction::Right);
        assert_eq!((tr.state.x, tr.state.y), (9, 2));
        assert_eq!(tr.reward, 10.0);
        assert!(tr.terminal);

        let s = EnvState {
            x: 0,
            y: 0,
            orientation: Direction::Right,
            t: 0,
        };
        let tr = env_step(&w, &s, Direction::Up);
        assert_eq!((tr.state.x, tr.state.y), (0, 0), "boundary blocks");
        assert_eq!(tr.reward, -5.0);
        assert_eq!(tr.state.orientation, Direction::Up, "orientation follows");
    }

    #[test]
    fn gw_encoding_is_15_dims_with_two_ones() {
        let w = world(Variant::Gw, StartMode::Fixed);
        let s = EnvState {
            x: 0,
            y: 2,
            orientation: Direction::Right,
            t: 1,
        };
        let obs = encode_observation(&w, &s);
        assert_eq!(obs.len(), 15);
        assert_eq!(obs[0], 1.0);
        assert_eq!(obs[12], 1.0);
        assert_eq!(obs.iter().sum::<f64>(), 2.0);
    }

    #[test]
    fn po_masks_y_to_zero() {
        let w = world(Variant::Po, StartMode::Fixed);
        let s = EnvState {
            x: 3,
            y: 4,
            orientation: Direction::Up,
            t: 2,
        };
        let obs = encode_observation(&w, &s);
        assert_eq!(obs.len(), 15);
        assert_eq!(obs[3], 1.0);
        assert!(obs[10..15].iter().all(|&v| v == 0.0));
        assert_eq!(obs.iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn po_encoding_constant_in_y() {
        let w = world(Variant::Po, StartMode::Fixed);
        let a = EnvState {
            x: 6,
            y: 0,
            orientation: Direction::Left,
            t: 3,
        };
        let b = EnvState { y: 4, ..a };
        assert_eq!(encode_observation(&w, &a), encode_observation(&w, &b));
    }

    #[test]
    fn ac_encoding_orientation_and_distance() {
        let w = world(Variant::Ac, StartMode::Fixed);
        let s = EnvState {
            x: 0,
            y: 2,
            orientation: Direction::Right,
            t: 1,
        };
        let obs = encode_observation(&w, &s);
        assert_eq!(obs.len(), 14);
        assert_eq!(obs[3], 1.0, "orientation right at index 3");
        assert_eq!(obs[4 + 9], 1.0, "distance 9 ahead");
        assert_eq!(obs.iter().sum::<f64>(), 2.0);
    }

    #[test]
    fn distances_match_hand_counts() {
        let spec = GridSpec::default();
        assert_eq!(distance_to_wall(&spec, 0, 2, Direction::Right, false), 9);
        assert_eq!(distance_to_wall(&spec, 0, 2, Direction::Left, false), 0);
        assert_eq!(distance_to_wall(&spec, 4, 1, Direction::Up, false), 1);
        assert_eq!(distance_to_wall(&spec, 0, 2, Direction::Down, false), 2);
    }

    #[test]
    fn obstacle_aware_distance_truncates() {
        let spec = GridSpec::default();
        // (4,2) facing right: obstacle at (5,2) is adjacent.
        assert_eq!(distance_to_wall(&spec, 4, 2, Direction::Right, true), 0);
        assert_eq!(distance_to_wall(&spec, 4, 2, Direction::Right, false), 5);
        // (0,2) facing right: obstacle 5 cells ahead.
        assert_eq!(distance_to_wall(&spec, 0, 2, Direction::Right, true), 4);
        // Row without obstacle is unaffected.
        assert_eq!(distance_to_wall(&spec, 0, 0, Direction::Right, true), 9);
    }

    #[test]
    fn hint_channels_only_at_t0() {
        let mut w = world(Variant::Ac, StartMode::Random);
        w.start_hint = true;
        assert_eq!(w.observation_dim(), 14 + 15);
        let s0 = EnvState {
            x: 7,
            y: 1,
            orientation: Direction::Right,
            t: 0,
        };
        let obs0 = encode_observation(&w, &s0);
        assert_eq!(obs0.len(), 29);
        assert_eq!(obs0[14 + 7], 1.0, "hint x");
        assert_eq!(obs0[14 + 10 + 1], 1.0, "hint y");
        let s1 = EnvState { t: 1, ..s0 };
        let obs1 = encode_observation(&w, &s1);
        assert!(obs1[14..].iter().all(|&v| v == 0.0), "hint cleared after t=0");

        w.start_hint = false;
        assert_eq!(w.observation_dim(), 14);
        assert_eq!(encode_observation(&w, &s0).len(), 14);
    }

    #[test]
    fn gw_random_mode_has_no_hint_block() {
        let w = world(Variant::Gw, StartMode::Random);
        assert_eq!(w.observation_dim(), 15);
    }

    #[test]
    fn fuzz_positions_stay_legal_and_rewards_in_range() {
        let w = world(Variant::Ac, StartMode::Random);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut env = GridWorldEnv::new(w);
        let mut steps = 0usize;
        let dim = env.observation_dim();
        env.reset(&mut rng);
        while steps < 100_000 {
            let a = Direction::from_index(rng.gen_range(0..4)).unwrap();
            let tr = env.step(a);
            let s = tr.state;
            assert_eq!(tr.observation.len(), dim, "observation dim drifted");
            assert!(s.x < 10 && s.y < 5);
            assert_ne!((s.x, s.y), (5, 2), "never on the obstacle");
            assert!(
                tr.reward == -5.0 || tr.reward == -1.0 || tr.reward == 10.0,
                "reward {} out of range",
                tr.reward
            );
            assert_eq!(tr.reward == 10.0, tr.terminal, "+10 iff terminal");
            if tr.terminal {
                env.reset(&mut rng);
            }
            steps += 1;
        }
    }

    #[test]
    fn gw_encoding_injective_over_positions() {
        let w = world(Variant::Gw, StartMode::Fixed);
        let mut seen = std::collections::HashSet::new();
        for y in 0..5 {
            for x in 0..10 {
                if (x, y) == (5, 2) {
                    continue;
                }
                let s = EnvState {
                    x,
                    y,
                    orientation: Direction::Up,
                    t: 1,
                };
                let obs = encode_observation(&w, &s);
                let key: Vec<u64> = obs.iter().map(|v| v.to_bits()).collect();
                assert!(seen.insert(key), "duplicate encoding at ({x},{y})");
            }
        }
    }
}
