//! Sliding-window metrics over per-episode returns.
//!
//! Both metrics slide a fixed-size window over the reward sequence; windows
//! that would extend past the end shrink to the available suffix, down to a
//! floor of 100 episodes (or the whole sequence when it is shorter than
//! that), so late learning is neither discarded nor judged on single-episode
//! noise.

/// Reward threshold the window mean must exceed.
pub const DEFAULT_THRESHOLD: f64 = -15.0;
/// Ceiling on the window's standard deviation.
pub const DEFAULT_MAX_STD: f64 = 20.0;
/// Window size, in episodes.
pub const DEFAULT_WINDOW: usize = 1000;
/// Minimum suffix length considered at the end of a run.
pub const MIN_SUFFIX: usize = 100;

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

struct WindowScan<'a> {
    rewards: &'a [f64],
    window: usize,
    min_len: usize,
    // prefix sums of x and x^2
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
}

impl<'a> WindowScan<'a> {
    fn new(rewards: &'a [f64], window: usize) -> Self {
        let mut sum = Vec::with_capacity(rewards.len() + 1);
        let mut sum_sq = Vec::with_capacity(rewards.len() + 1);
        sum.push(0.0);
        sum_sq.push(0.0);
        for (i, r) in rewards.iter().enumerate() {
            sum.push(sum[i] + r);
            sum_sq.push(sum_sq[i] + r * r);
        }
        WindowScan {
            rewards,
            window,
            min_len: MIN_SUFFIX.min(rewards.len()),
            sum,
            sum_sq,
        }
    }

    /// Start indices whose (possibly truncated) window is long enough.
    fn starts(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.rewards.len()).take_while(move |e| self.rewards.len() - e >= self.min_len)
    }

    fn mean_std_at(&self, start: usize) -> (f64, f64) {
        let end = (start + self.window).min(self.rewards.len());
        let n = (end - start) as f64;
        let mean = (self.sum[end] - self.sum[start]) / n;
        // E[x^2] - mean^2, clamped against cancellation.
        let var = ((self.sum_sq[end] - self.sum_sq[start]) / n - mean * mean).max(0.0);
        (mean, var.sqrt())
    }
}

/// First episode index (0-based) from which the window of returns has mean
/// above `threshold` and standard deviation below `max_std`; `None` when no
/// window qualifies. Reports and tables convert to 1-based episode numbers.
pub fn learning_time(
    rewards: &[f64],
    threshold: f64,
    max_std: f64,
    window: usize,
) -> Option<usize> {
    if rewards.is_empty() {
        return None;
    }
    let scan = WindowScan::new(rewards, window);
    let found = scan.starts().find(|&e| {
        let (mean, std) = scan.mean_std_at(e);
        mean > threshold && std < max_std
    });
    found
}

/// Best window mean over the run (same window and suffix rule).
pub fn learning_performance(rewards: &[f64], window: usize) -> f64 {
    assert!(!rewards.is_empty(), "learning_performance of an empty run");
    let scan = WindowScan::new(rewards, window);
    let best = scan
        .starts()
        .map(|e| scan.mean_std_at(e).0)
        .fold(f64::NEG_INFINITY, f64::max);
    best
}
