//! Quick manual calibration driver: one seeded run with progress output.
//!
//! cargo run --release -p recurq-core --example calibrate -- gru advantage gw 32 5000 1

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use recurq_core::gridworlds::{GridWorld, GridWorldEnv, StartMode, Variant};
use recurq_core::numerics::RmsProp;
use recurq_core::recnet::{init_network_with, Arch};
use recurq_core::valuelearn::{run_episode, AlgoConfig, Algorithm};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let arch = Arch::from_tag(args.get(1).map(String::as_str).unwrap_or("gru")).unwrap();
    let algo = Algorithm::from_tag(args.get(2).map(String::as_str).unwrap_or("advantage")).unwrap();
    let variant = Variant::from_tag(args.get(3).map(String::as_str).unwrap_or("gw")).unwrap();
    let hidden: usize = args.get(4).map(|s| s.parse().unwrap()).unwrap_or(32);
    let episodes: usize = args.get(5).map(|s| s.parse().unwrap()).unwrap_or(5000);
    let seed: u64 = args.get(6).map(|s| s.parse().unwrap()).unwrap_or(1);

    let world = GridWorld::new(variant, StartMode::Fixed);
    let mut env = GridWorldEnv::new(world);
    let cfg = AlgoConfig {
        algorithm: algo,
        episodes,
        ..AlgoConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = init_network_with(arch, env.observation_dim(), hidden, 4, cfg.window_len, &mut rng)
        .unwrap();
    let mut opt = RmsProp::default_config();

    let start = std::time::Instant::now();
    let mut rewards: Vec<f64> = Vec::new();
    let mut buffer = Vec::new();
    for e in 1..=cfg.episodes {
        let rec = run_episode(&mut env, &net, &cfg, &mut rng).expect("episode");
        rewards.push(rec.total_reward);
        buffer.extend(rec.samples);
        if e % cfg.train_every == 0 {
            let losses = net
                .train_batch(&buffer, cfg.epochs, cfg.batch_size, &mut opt, &mut rng)
                .expect("train");
            buffer.clear();
            if e % 100 == 0 {
                let last100: f64 = rewards[rewards.len() - 100..].iter().sum::<f64>() / 100.0;
                println!(
                    "ep {e:5}  mean100 {last100:8.2}  loss {:9.4}  elapsed {:6.1}s",
                    losses.last().copied().unwrap_or(f64::NAN),
                    start.elapsed().as_secs_f64()
                );
            }
        }
    }
    let n = rewards.len();
    let best_window = (0..n)
        .filter(|e| n - e >= 100)
        .map(|e| {
            let end = (e + 1000).min(n);
            rewards[e..end].iter().sum::<f64>() / (end - e) as f64
        })
        .fold(f64::NEG_INFINITY, f64::max);
    println!("learning performance (best 1000-window mean): {best_window:.2}");
}
