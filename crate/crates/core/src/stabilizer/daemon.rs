use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::graph::NodeId;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivationMode {
    /// Every node, every round.
    #[default]
    Synchronous,
    /// Each node independently with probability 1/2, plus any node about to
    /// exceed the fairness bound.
    RandomSubset,
    /// One node per round, following a fixed seeded permutation.
    AdversarialSingle,
}

impl ActivationMode {
    pub fn name(self) -> &'static str {
        match self {
            ActivationMode::Synchronous => "synchronous",
            ActivationMode::RandomSubset => "random_subset",
            ActivationMode::AdversarialSingle => "adversarial_single",
        }
    }
}

impl fmt::Display for ActivationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ActivationMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.replace('-', "_").as_str() {
            "synchronous" | "sync" => Ok(ActivationMode::Synchronous),
            "random_subset" => Ok(ActivationMode::RandomSubset),
            "adversarial_single" => Ok(ActivationMode::AdversarialSingle),
            _ => Err(format!("unknown daemon mode `{s}`")),
        }
    }
}

/// Which nodes step in each round. Every node is activated at least once in
/// any `fairness_bound` consecutive rounds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DaemonSchedule {
    pub seed: u64,
    pub fairness_bound: usize,
    pub mode: ActivationMode,
}

impl DaemonSchedule {
    pub fn synchronous() -> Self {
        Self {
            seed: 0,
            fairness_bound: 1,
            mode: ActivationMode::Synchronous,
        }
    }

    /// Default fairness bound for `n` nodes: 1 for synchronous, `2n` for
    /// random subsets, `n` for single activations.
    pub fn for_mode(mode: ActivationMode, n: usize, seed: u64) -> Self {
        let fairness_bound = match mode {
            ActivationMode::Synchronous => 1,
            ActivationMode::RandomSubset => 2 * n.max(1),
            ActivationMode::AdversarialSingle => n.max(1),
        };
        Self {
            seed,
            fairness_bound,
            mode,
        }
    }

    /// Rounds of zero writes that count as silence.
    pub fn silence_window(&self) -> usize {
        self.fairness_bound.max(1)
    }

    pub fn start(&self, n: usize) -> Daemon {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut order: Vec<NodeId> = (0..n).collect();
        order.shuffle(&mut rng);
        // single activations cannot beat a bound below n
        let bound = match self.mode {
            ActivationMode::AdversarialSingle => self.fairness_bound.max(n),
            _ => self.fairness_bound.max(1),
        };
        Daemon {
            mode: self.mode,
            bound,
            rng,
            order,
            last: vec![0; n],
            round: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Daemon {
    mode: ActivationMode,
    bound: usize,
    rng: ChaCha8Rng,
    order: Vec<NodeId>,
    last: Vec<usize>,
    round: usize,
}

impl Daemon {
    /// Nodes activated in the next round, ascending.
    pub fn next_round(&mut self) -> Vec<NodeId> {
        self.round += 1;
        let n = self.last.len();
        let active: Vec<NodeId> = match self.mode {
            ActivationMode::Synchronous => (0..n).collect(),
            ActivationMode::RandomSubset => (0..n)
                .filter(|&v| {
                    let due = self.round - self.last[v] >= self.bound;
                    // draw unconditionally so the stream doesn't depend on `due`
                    let coin = self.rng.gen_bool(0.5);
                    due || coin
                })
                .collect(),
            ActivationMode::AdversarialSingle => {
                if n == 0 {
                    Vec::new()
                } else {
                    vec![self.order[(self.round - 1) % n]]
                }
            }
        };
        for &v in &active {
            self.last[v] = self.round;
        }
        active
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_fairness(schedule: &DaemonSchedule, n: usize, rounds: usize) {
        let mut d = schedule.start(n);
        let mut last = vec![0usize; n];
        for r in 1..=rounds {
            for v in d.next_round() {
                last[v] = r;
            }
            for (v, &l) in last.iter().enumerate() {
                assert!(
                    r - l <= schedule.fairness_bound,
                    "node {v} starved at round {r}"
                );
            }
        }
    }

    #[test]
    fn fairness_bound_respected() {
        for mode in [
            ActivationMode::Synchronous,
            ActivationMode::RandomSubset,
            ActivationMode::AdversarialSingle,
        ] {
            for n in [1, 2, 7, 20] {
                check_fairness(&DaemonSchedule::for_mode(mode, n, 42), n, 200);
            }
        }
    }

    #[test]
    fn seeded_and_deterministic() {
        let s = DaemonSchedule::for_mode(ActivationMode::RandomSubset, 10, 3);
        let a: Vec<_> = {
            let mut d = s.start(10);
            (0..50).map(|_| d.next_round()).collect()
        };
        let b: Vec<_> = {
            let mut d = s.start(10);
            (0..50).map(|_| d.next_round()).collect()
        };
        assert_eq!(a, b);
    }

    #[test]
    fn parse_modes() {
        assert_eq!(
            "random-subset".parse::<ActivationMode>().unwrap(),
            ActivationMode::RandomSubset
        );
        assert!("chaotic".parse::<ActivationMode>().is_err());
    }
}
