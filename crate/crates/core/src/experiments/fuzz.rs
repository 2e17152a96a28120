//! Soundness fuzzing: corrupt legal labelings and check that some node
//! notices.

use std::collections::BTreeMap;

use rand::seq::{IteratorRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::graph::{generate, GraphKind, NodeId, PortGraph};
use crate::oracle::{random_dfs_mark, shift_equivalent};
use crate::registers::{Configuration, Label, MarkScratch, NodeRegisters, Phase};
use crate::stabilizer::legal_configuration;
use crate::verifier::{verify_all, Predicate, VerifyMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorruptionKind {
    /// One `in` or `out` overwritten.
    Label,
    /// Two to four labels overwritten.
    MultiLabel,
    /// One parent pointer redirected or cleared.
    Parent,
    /// Two nodes exchange intervals.
    SwapIntervals,
    /// Every label translated by the same amount. Always shift-equivalent.
    UniformShift,
    /// One subtree's labels translated.
    SubtreeShift,
    /// A label erased.
    NullLabel,
    /// Labels of a DFS that explores ports in random order.
    OtherDfs,
    /// Two or three of the above.
    Mixed,
}

impl CorruptionKind {
    pub const ALL: [CorruptionKind; 9] = [
        CorruptionKind::Label,
        CorruptionKind::MultiLabel,
        CorruptionKind::Parent,
        CorruptionKind::SwapIntervals,
        CorruptionKind::UniformShift,
        CorruptionKind::SubtreeShift,
        CorruptionKind::NullLabel,
        CorruptionKind::OtherDfs,
        CorruptionKind::Mixed,
    ];

    const SIMPLE: [CorruptionKind; 6] = [
        CorruptionKind::Label,
        CorruptionKind::Parent,
        CorruptionKind::SwapIntervals,
        CorruptionKind::SubtreeShift,
        CorruptionKind::NullLabel,
        CorruptionKind::OtherDfs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CorruptionKind::Label => "label",
            CorruptionKind::MultiLabel => "multi_label",
            CorruptionKind::Parent => "parent",
            CorruptionKind::SwapIntervals => "swap_intervals",
            CorruptionKind::UniformShift => "uniform_shift",
            CorruptionKind::SubtreeShift => "subtree_shift",
            CorruptionKind::NullLabel => "null_label",
            CorruptionKind::OtherDfs => "other_dfs",
            CorruptionKind::Mixed => "mixed",
        }
    }
}

fn other_value<R: Rng>(rng: &mut R, current: Option<Label>, max: Label) -> Label {
    loop {
        let v = rng.gen_range(-2..=max + 3);
        if Some(v) != current {
            return v;
        }
    }
}

fn change_label<R: Rng>(c: &mut Configuration, rng: &mut R) {
    let n = c.len();
    let v = rng.gen_range(0..n);
    let max = 2 * n as Label;
    if rng.gen_bool(0.5) {
        c[v].in_label = Some(other_value(rng, c[v].in_label, max));
    } else {
        c[v].out_label = Some(other_value(rng, c[v].out_label, max));
    }
}

fn subtree(graph: &PortGraph, c: &Configuration, v: NodeId) -> Vec<NodeId> {
    let parents = c.labels().parent_nodes(graph);
    let mut seen = vec![false; graph.node_count()];
    seen[v] = true;
    let mut out = vec![v];
    let mut i = 0;
    while i < out.len() {
        let u = out[i];
        for w in graph.nodes() {
            if parents[w] == Some(u) && !seen[w] {
                seen[w] = true;
                out.push(w);
            }
        }
        i += 1;
    }
    out
}

fn shift_nodes(c: &mut Configuration, nodes: &[NodeId], by: Label) {
    for &v in nodes {
        c[v].in_label = c[v].in_label.map(|l| l + by);
        c[v].out_label = c[v].out_label.map(|l| l + by);
    }
}

fn nonzero_shift<R: Rng>(rng: &mut R) -> Label {
    let k = rng.gen_range(1..=12);
    if rng.gen_bool(0.5) {
        k
    } else {
        -k
    }
}

/// Applies one corruption of the given kind to a labeled configuration.
pub fn corrupt<R: Rng>(
    graph: &PortGraph,
    legal: &Configuration,
    kind: CorruptionKind,
    rng: &mut R,
) -> Configuration {
    let mut c = legal.clone();
    let n = graph.node_count();
    match kind {
        CorruptionKind::Label => change_label(&mut c, rng),
        CorruptionKind::MultiLabel => {
            for _ in 0..rng.gen_range(2..=4) {
                change_label(&mut c, rng);
            }
        }
        CorruptionKind::Parent => {
            let v = rng.gen_range(0..n);
            let deg = graph.degree(v);
            let options: Vec<Option<usize>> = std::iter::once(None)
                .chain((0..deg).map(Some))
                .filter(|&p| p != c[v].parent_port)
                .collect();
            match options.choose(rng) {
                Some(&p) => c[v].parent_port = p,
                None => change_label(&mut c, rng),
            }
        }
        CorruptionKind::SwapIntervals => {
            if n >= 2 {
                let pair: Vec<NodeId> = (0..n).choose_multiple(rng, 2);
                let (a, b) = (pair[0], pair[1]);
                let (ia, ib) = (
                    (c[a].in_label, c[a].out_label),
                    (c[b].in_label, c[b].out_label),
                );
                (c[a].in_label, c[a].out_label) = ib;
                (c[b].in_label, c[b].out_label) = ia;
            } else {
                change_label(&mut c, rng);
            }
        }
        CorruptionKind::UniformShift => {
            let all: Vec<NodeId> = graph.nodes().collect();
            shift_nodes(&mut c, &all, nonzero_shift(rng));
        }
        CorruptionKind::SubtreeShift => {
            let v = rng.gen_range(0..n);
            let nodes = subtree(graph, &c, v);
            shift_nodes(&mut c, &nodes, nonzero_shift(rng));
        }
        CorruptionKind::NullLabel => {
            let v = rng.gen_range(0..n);
            match rng.gen_range(0..3) {
                0 => c[v].in_label = None,
                1 => c[v].out_label = None,
                _ => (c[v].in_label, c[v].out_label) = (None, None),
            }
        }
        CorruptionKind::OtherDfs => c = Configuration::from_labels(&random_dfs_mark(graph, rng)),
        CorruptionKind::Mixed => {
            for _ in 0..rng.gen_range(2..=3) {
                let k = *CorruptionKind::SIMPLE.choose(rng).unwrap();
                c = corrupt(graph, &c, k, rng);
            }
        }
    }
    c
}

/// Arbitrary registers everywhere: random phases, labels, pointers and
/// scratch, including out-of-range values.
pub fn garbage_configuration<R: Rng>(graph: &PortGraph, rng: &mut R) -> Configuration {
    let n = graph.node_count();
    let label = |rng: &mut R| {
        rng.gen_bool(0.8)
            .then(|| rng.gen_range(-2..=2 * n as Label + 3))
    };
    let port = |rng: &mut R, deg: usize| rng.gen_bool(0.7).then(|| rng.gen_range(0..=deg));
    let nodes = graph
        .nodes()
        .map(|v| {
            let deg = graph.degree(v);
            NodeRegisters {
                parent_port: port(rng, deg),
                in_label: label(rng),
                out_label: label(rng),
                phase: *[Phase::Reset, Phase::Mark, Phase::Verify]
                    .choose(rng)
                    .unwrap(),
                scratch: MarkScratch {
                    token: rng.gen_bool(0.3),
                    cursor: port(rng, deg),
                    counter: label(rng),
                    abort: rng.gen_bool(0.3),
                    ready: rng.gen_bool(0.5),
                    dist: rng.gen_bool(0.7).then(|| rng.gen_range(0..=n as u32 + 1)),
                },
            }
        })
        .collect();
    Configuration::new(nodes)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FuzzConfig {
    pub trials: usize,
    pub seed: u64,
    pub n_min: usize,
    pub n_max: usize,
    pub kind: GraphKind,
}

impl Default for FuzzConfig {
    fn default() -> Self {
        Self {
            trials: 10_000,
            seed: 2024,
            n_min: 4,
            n_max: 32,
            kind: GraphKind::RandomConnected,
        }
    }
}

/// One generated trial, before verification.
#[derive(Debug, Clone)]
pub struct FuzzCase {
    pub trial: usize,
    pub graph_seed: u64,
    pub graph: PortGraph,
    pub corruption: CorruptionKind,
    pub config: Configuration,
    pub shift_equivalent: bool,
}

impl FuzzConfig {
    /// Trial `i` depends only on the campaign seed and `i`.
    pub fn case(&self, trial: usize) -> FuzzCase {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(trial as u64);
        let n = rng.gen_range(self.n_min..=self.n_max.max(self.n_min));
        let graph_seed = rng.gen::<u64>();
        let graph = generate(self.kind, n, graph_seed).expect("n >= 1");
        let corruption = *CorruptionKind::ALL.choose(&mut rng).unwrap();
        let legal = legal_configuration(&graph);
        let config = corrupt(&graph, &legal, corruption, &mut rng);
        let shift_equivalent = shift_equivalent(&config.labels(), &legal.labels(), graph.root());
        FuzzCase {
            trial,
            graph_seed,
            graph,
            corruption,
            config,
            shift_equivalent,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FuzzMiss {
    pub trial: usize,
    pub n: usize,
    pub graph_seed: u64,
    pub corruption: CorruptionKind,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KindTally {
    pub evaluated: usize,
    pub detected: usize,
    pub excluded: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzReport {
    pub config: FuzzConfig,
    pub trials: usize,
    pub excluded_shift_equivalent: usize,
    pub evaluated: usize,
    pub detected: usize,
    pub detection_rate: f64,
    /// Trials in which at least one node failed the predicate.
    pub predicate_histogram: BTreeMap<Predicate, usize>,
    pub by_corruption: BTreeMap<CorruptionKind, KindTally>,
    pub misses: Vec<FuzzMiss>,
}

impl FuzzReport {
    pub fn perfect(&self) -> bool {
        self.misses.is_empty() && self.detected == self.evaluated
    }
}

struct TrialOutcome {
    n: usize,
    graph_seed: u64,
    corruption: CorruptionKind,
    excluded: bool,
    detected: bool,
    failed: Vec<Predicate>,
}

pub fn run_fuzz(config: &FuzzConfig) -> FuzzReport {
    let outcomes: Vec<(usize, TrialOutcome)> = (0..config.trials)
        .into_par_iter()
        .map(|t| {
            let case = config.case(t);
            let n = case.graph.node_count();
            let base = TrialOutcome {
                n,
                graph_seed: case.graph_seed,
                corruption: case.corruption,
                excluded: case.shift_equivalent,
                detected: false,
                failed: Vec::new(),
            };
            if case.shift_equivalent {
                return (t, base);
            }
            let vm = verify_all(&case.graph, &case.config, VerifyMode::FirstDfs);
            let mut failed: Vec<Predicate> = vm
                .verdicts
                .iter()
                .flat_map(|v| v.failures.iter().copied())
                .collect();
            failed.sort_unstable();
            failed.dedup();
            (
                t,
                TrialOutcome {
                    detected: !vm.accepted(),
                    failed,
                    ..base
                },
            )
        })
        .collect();

    let mut report = FuzzReport {
        config: config.clone(),
        trials: config.trials,
        excluded_shift_equivalent: 0,
        evaluated: 0,
        detected: 0,
        detection_rate: 0.0,
        predicate_histogram: Predicate::ALL.iter().map(|&p| (p, 0)).collect(),
        by_corruption: BTreeMap::new(),
        misses: Vec::new(),
    };
    for (trial, o) in outcomes {
        let tally = report.by_corruption.entry(o.corruption).or_default();
        if o.excluded {
            report.excluded_shift_equivalent += 1;
            tally.excluded += 1;
            continue;
        }
        report.evaluated += 1;
        tally.evaluated += 1;
        if o.detected {
            report.detected += 1;
            tally.detected += 1;
        } else {
            report.misses.push(FuzzMiss {
                trial,
                n: o.n,
                graph_seed: o.graph_seed,
                corruption: o.corruption,
            });
        }
        for p in o.failed {
            *report.predicate_histogram.entry(p).or_default() += 1;
        }
    }
    report.detection_rate = if report.evaluated == 0 {
        1.0
    } else {
        report.detected as f64 / report.evaluated as f64
    };
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cases_are_reproducible() {
        let cfg = FuzzConfig {
            trials: 10,
            ..FuzzConfig::default()
        };
        for t in 0..10 {
            let (a, b) = (cfg.case(t), cfg.case(t));
            assert_eq!(a.config, b.config);
            assert_eq!(a.graph, b.graph);
        }
    }

    #[test]
    fn uniform_shift_always_excluded() {
        let g = generate(GraphKind::RandomConnected, 15, 9).unwrap();
        let legal = legal_configuration(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let c = corrupt(&g, &legal, CorruptionKind::UniformShift, &mut rng);
            assert_ne!(c, legal);
            assert!(shift_equivalent(&c.labels(), &legal.labels(), g.root()));
            // and the verifier cannot tell
            assert!(verify_all(&g, &c, VerifyMode::FirstDfs).accepted());
        }
    }

    #[test]
    fn parent_only_corruption_detected() {
        let g = generate(GraphKind::RandomConnected, 12, 2).unwrap();
        let legal = legal_configuration(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let c = corrupt(&g, &legal, CorruptionKind::Parent, &mut rng);
            assert_eq!(c.labels().intervals(), legal.labels().intervals());
            let vm = verify_all(&g, &c, VerifyMode::FirstDfs);
            assert!(vm.verdicts.iter().any(|v| {
                v.failed(Predicate::N1)
                    || v.failed(Predicate::N3)
                    || v.failed(Predicate::N4)
                    || v.failed(Predicate::R1)
            }));
        }
    }

    #[test]
    fn small_campaign_detects_everything() {
        let r = run_fuzz(&FuzzConfig {
            trials: 500,
            seed: 11,
            ..FuzzConfig::default()
        });
        assert!(r.perfect(), "{:?}", r.misses);
        assert_eq!(r.evaluated + r.excluded_shift_equivalent, 500);
        assert!(r.excluded_shift_equivalent > 0);
    }
}
