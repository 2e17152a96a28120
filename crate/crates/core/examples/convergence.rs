//! Convergence from arbitrary registers under each scheduler.
//!
//! `cargo run --release -p silentdfs-core --example convergence`

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use silentdfs_core::experiments::fuzz::garbage_configuration;
use silentdfs_core::graph::{generate, GraphKind};
use silentdfs_core::stabilizer::{run, ActivationMode, DaemonSchedule, RunOptions};

fn main() {
    println!(
        "{:<20} {:>6} {:>10} {:>14}",
        "scheduler", "runs", "failures", "max rounds/nB"
    );
    for m in [
        ActivationMode::Synchronous,
        ActivationMode::RandomSubset,
        ActivationMode::AdversarialSingle,
    ] {
        let (mut runs, mut fails, mut worst) = (0, 0, 0.0f64);
        for kind in GraphKind::ALL {
            for n in [2, 5, 9, 16, 24] {
                for seed in 0..20u64 {
                    let g = generate(kind, n, seed).unwrap();
                    let start = garbage_configuration(&g, &mut ChaCha8Rng::seed_from_u64(seed));
                    let s = DaemonSchedule::for_mode(m, n, seed);
                    let r = run(&g, start, &s, &RunOptions::for_graph(&g, &s)).unwrap();
                    runs += 1;
                    if r.converged() {
                        worst = worst.max(
                            r.metrics.rounds_to_silence as f64 / (n * s.fairness_bound) as f64,
                        );
                    } else {
                        fails += 1;
                    }
                }
            }
        }
        println!("{:<20} {runs:>6} {fails:>10} {worst:>14.2}", m.name());
    }
}
