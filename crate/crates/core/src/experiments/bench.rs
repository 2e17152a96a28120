//! Stabilization-time scaling and register-width audit.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::graph::{generate, GraphKind};
use crate::registers::Configuration;
use crate::stabilizer::{
    audit_register_width, legal_configuration, run, ActivationMode, DaemonSchedule, RunOptions,
};

use super::fuzz::{corrupt, garbage_configuration, CorruptionKind};

/// How a benchmark instance starts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitKind {
    /// Every register null.
    Null,
    /// Legal labeling with a few label and pointer faults.
    Corrupted,
    /// Arbitrary values in every register.
    Garbage,
}

impl InitKind {
    pub fn name(self) -> &'static str {
        match self {
            InitKind::Null => "null",
            InitKind::Corrupted => "corrupted",
            InitKind::Garbage => "garbage",
        }
    }
}

impl std::str::FromStr for InitKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "null" => Ok(InitKind::Null),
            "corrupted" => Ok(InitKind::Corrupted),
            "garbage" => Ok(InitKind::Garbage),
            _ => Err(format!("unknown initial configuration `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub sizes: Vec<usize>,
    pub seeds: Vec<u64>,
    pub kind: GraphKind,
    pub mode: ActivationMode,
    pub inits: Vec<InitKind>,
    /// Fairness periods allowed per node before an instance counts as
    /// non-convergent.
    pub limit_per_node: usize,
    /// Stabilization must finish within `time_factor * n` rounds.
    pub time_factor: usize,
    /// Register widths must stay within `width_factor * ceil(log2 n)` bits.
    pub width_factor: u32,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            sizes: vec![16, 32, 64, 128, 256],
            seeds: (1..=5).collect(),
            kind: GraphKind::RandomConnected,
            mode: ActivationMode::Synchronous,
            inits: vec![InitKind::Null, InitKind::Corrupted, InitKind::Garbage],
            limit_per_node: 40,
            time_factor: 10,
            width_factor: 12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchRow {
    pub n: usize,
    pub seed: u64,
    pub init: InitKind,
    pub rounds_to_silence: usize,
    pub resets_triggered: usize,
    pub detection_latency: Option<usize>,
    pub converged: bool,
    pub legal: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: usize,
}

/// Ordinary least squares `y = slope * x + intercept`.
pub fn linear_fit(points: &[(f64, f64)]) -> LinearFit {
    let k = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / k;
    let my = points.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let ss_res: f64 = points
        .iter()
        .map(|p| (p.1 - (slope * p.0 + intercept)).powi(2))
        .sum();
    let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    LinearFit {
        slope,
        intercept,
        r_squared,
        points: points.len(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRow {
    pub n: usize,
    pub max_degree: usize,
    pub label_bits: u32,
    pub bits_per_node: u32,
    pub log2_n: u32,
    pub ratio: f64,
    pub violations: usize,
    pub within_bound: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub config: BenchConfig,
    pub rows: Vec<BenchRow>,
    pub fits: BTreeMap<InitKind, LinearFit>,
    pub audit: Vec<AuditRow>,
    pub all_converged: bool,
    /// Largest `rounds_to_silence / n` observed.
    pub max_rounds_per_node: f64,
    pub within_time_bound: bool,
    pub within_width_bound: bool,
}

fn initial(init: InitKind, graph: &crate::graph::PortGraph, seed: u64) -> Configuration {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match init {
        InitKind::Null => Configuration::null(graph.node_count()),
        InitKind::Corrupted => {
            let legal = legal_configuration(graph);
            let mut c = corrupt(graph, &legal, CorruptionKind::MultiLabel, &mut rng);
            c = corrupt(graph, &c, CorruptionKind::Parent, &mut rng);
            c
        }
        InitKind::Garbage => garbage_configuration(graph, &mut rng),
    }
}

pub fn run_bench(config: &BenchConfig) -> BenchReport {
    let jobs: Vec<(usize, u64, InitKind)> = config
        .sizes
        .iter()
        .flat_map(|&n| {
            config
                .seeds
                .iter()
                .flat_map(move |&s| config.inits.iter().map(move |&i| (n, s, i)))
        })
        .collect();

    let rows: Vec<BenchRow> = jobs
        .par_iter()
        .map(|&(n, seed, init)| {
            let graph = generate(config.kind, n, seed).expect("benchmark sizes are positive");
            let schedule = DaemonSchedule::for_mode(config.mode, n, seed);
            let mut opts = RunOptions::for_graph(&graph, &schedule);
            opts.round_limit = config.limit_per_node * n * schedule.fairness_bound.max(1)
                + 2 * schedule.silence_window()
                + 16;
            let start = initial(init, &graph, seed ^ 0xbe7c);
            let r = run(&graph, start, &schedule, &opts).expect("sizes match");
            BenchRow {
                n,
                seed,
                init,
                rounds_to_silence: r.metrics.rounds_to_silence,
                resets_triggered: r.metrics.resets_triggered,
                detection_latency: r.metrics.detection_latency,
                converged: r.converged(),
                legal: r.final_config == legal_configuration(&graph),
            }
        })
        .collect();

    let mut fits = BTreeMap::new();
    for &init in &config.inits {
        let pts: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| r.init == init)
            .map(|r| (r.n as f64, r.rounds_to_silence as f64))
            .collect();
        if !pts.is_empty() {
            fits.insert(init, linear_fit(&pts));
        }
    }

    let audit: Vec<AuditRow> = config
        .sizes
        .iter()
        .map(|&n| {
            let graph =
                generate(config.kind, n, config.seeds.first().copied().unwrap_or(0)).unwrap();
            let a = audit_register_width(&graph, &legal_configuration(&graph));
            AuditRow {
                n,
                max_degree: a.max_degree,
                label_bits: a.widths.label,
                bits_per_node: a.bits_per_node,
                log2_n: a.log2_n,
                ratio: a.ratio,
                violations: a.violations(),
                within_bound: a.within(config.width_factor) && a.violations() == 0,
            }
        })
        .collect();

    let all_converged = rows.iter().all(|r| r.converged && r.legal);
    let max_rounds_per_node = rows
        .iter()
        .map(|r| r.rounds_to_silence as f64 / r.n as f64)
        .fold(0.0, f64::max);
    let within_time_bound = rows
        .iter()
        .all(|r| r.rounds_to_silence <= config.time_factor * r.n);
    let within_width_bound = audit.iter().all(|a| a.within_bound);
    BenchReport {
        config: config.clone(),
        rows,
        fits,
        audit,
        all_converged,
        max_rounds_per_node,
        within_time_bound,
        within_width_bound,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_recovers_a_line() {
        let f = linear_fit(&[(1.0, 5.0), (2.0, 7.0), (3.0, 9.0)]);
        assert!((f.slope - 2.0).abs() < 1e-12);
        assert!((f.intercept - 3.0).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn small_bench() {
        let cfg = BenchConfig {
            sizes: vec![8, 16, 24],
            seeds: vec![1, 2],
            ..BenchConfig::default()
        };
        let r = run_bench(&cfg);
        assert_eq!(r.rows.len(), 3 * 2 * 3);
        assert!(r.all_converged);
        assert!(r.within_time_bound);
        assert_eq!(r.audit[0].label_bits, 5);
    }
}
