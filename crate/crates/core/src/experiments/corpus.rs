//! Graph corpora used by the test campaigns.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::graph::{all_connected_graphs, generate, GraphKind, PortGraph};

/// Sizes of the seeded random part of the default corpus.
pub const RANDOM_SIZES: [usize; 14] = [7, 8, 9, 10, 12, 16, 24, 32, 48, 64, 96, 128, 192, 256];
pub const RANDOM_SEEDS: [u64; 2] = [1, 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum Origin {
    /// Index into the exhaustive enumeration for `n`.
    Exhaustive {
        index: usize,
    },
    Generated {
        kind: GraphKind,
        seed: u64,
    },
}

#[derive(Debug, Clone)]
pub struct CorpusEntry {
    pub n: usize,
    pub origin: Origin,
    pub graph: PortGraph,
}

impl CorpusEntry {
    pub fn describe(&self) -> String {
        match self.origin {
            Origin::Exhaustive { index } => format!("exhaustive n={} #{index}", self.n),
            Origin::Generated { kind, seed } => format!("{kind} n={} seed={seed}", self.n),
        }
    }
}

/// All connected labeled graphs with `1..=max_n` nodes, ports sorted.
pub fn exhaustive_corpus(max_n: usize) -> Vec<CorpusEntry> {
    (1..=max_n)
        .flat_map(|n| {
            all_connected_graphs(n)
                .into_iter()
                .enumerate()
                .map(move |(index, graph)| CorpusEntry {
                    n,
                    origin: Origin::Exhaustive { index },
                    graph,
                })
        })
        .collect()
}

/// Every kind at every size and seed.
pub fn random_corpus(sizes: &[usize], seeds: &[u64]) -> Vec<CorpusEntry> {
    let mut out = Vec::new();
    for &n in sizes {
        for kind in GraphKind::ALL {
            for &seed in seeds {
                let graph = generate(kind, n, seed).expect("positive size");
                out.push(CorpusEntry {
                    n,
                    origin: Origin::Generated { kind, seed },
                    graph,
                });
            }
        }
    }
    out
}

/// Exhaustive up to 6 nodes plus seeded random graphs from 7 to 256 nodes.
pub fn default_corpus() -> Vec<CorpusEntry> {
    let mut c = exhaustive_corpus(6);
    c.extend(random_corpus(&RANDOM_SIZES, &RANDOM_SEEDS));
    c
}

/// `count` sparse random graphs with 7 to 12 nodes, small enough for the
/// brute-force path oracle.
pub fn oracle_corpus(count: usize, seed: u64) -> Vec<CorpusEntry> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let n = rng.gen_range(7..=12);
            let kind = if i % 2 == 0 {
                GraphKind::RandomConnected
            } else {
                GraphKind::RandomTreePlusChords
            };
            let s = rng.gen::<u64>();
            CorpusEntry {
                n,
                origin: Origin::Generated { kind, seed: s },
                graph: generate(kind, n, s).unwrap(),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exhaustive_counts() {
        let c = exhaustive_corpus(4);
        assert_eq!(c.len(), 1 + 1 + 4 + 38);
    }

    #[test]
    fn oracle_corpus_sizes() {
        let c = oracle_corpus(50, 3);
        assert_eq!(c.len(), 50);
        assert!(c
            .iter()
            .all(|e| (7..=12).contains(&e.n) && e.graph.node_count() == e.n));
    }

    #[test]
    fn random_corpus_is_deterministic() {
        let a = random_corpus(&[9, 20], &[4]);
        let b = random_corpus(&[9, 20], &[4]);
        assert_eq!(a.len(), 10);
        assert!(a.iter().zip(&b).all(|(x, y)| x.graph == y.graph));
    }
}
