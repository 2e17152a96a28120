//! Round-based execution under a daemon.
//!
//! A round reads one consistent snapshot of every register, lets each
//! activated node compute its next registers from it, and then writes them all
//! (read-all / write-own). A run is silent once `W` consecutive rounds pass
//! without a write while every node is in VERIFY and the verifier accepts
//! everywhere; `W` is the daemon's fairness bound, so every node has been
//! activated at least once inside the window.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{NodeId, PortGraph};
use crate::oracle::first_dfs_mark;
use crate::registers::{Configuration, Phase};
use crate::verifier::{verify_all, NeighborhoodSnapshot, VerifyMode};

use super::daemon::{ActivationMode, Daemon, DaemonSchedule};
use super::inject::{inject, Corruption, Field, FieldValue, InjectError};
use super::step::local_step_traced;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("configuration has {got} nodes, graph has {expected}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("round limit must be positive")]
    ZeroRoundLimit,
    #[error("size bound {bound} is below the node count {n}")]
    SizeBoundTooSmall { bound: usize, n: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunOptions {
    pub round_limit: usize,
    /// Upper bound on the network size known to every node. Defaults to `n`.
    pub size_bound: Option<usize>,
    pub record_trace: bool,
}

impl RunOptions {
    /// Generous default: `20n` fairness periods plus two silence windows.
    /// A fairness period is one round under the synchronous daemon and up to
    /// `B` rounds otherwise.
    pub fn for_graph(graph: &PortGraph, schedule: &DaemonSchedule) -> Self {
        let n = graph.node_count();
        let period = schedule.fairness_bound.max(1);
        Self {
            round_limit: 20 * n * period + 2 * schedule.silence_window() + 16,
            size_bound: None,
            record_trace: false,
        }
    }

    pub fn with_trace(mut self) -> Self {
        self.record_trace = true;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WriteRecord {
    pub id: NodeId,
    pub field: Field,
    pub old: FieldValue,
    pub new: FieldValue,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerdictSummary {
    pub accepted: bool,
    pub detecting_nodes: Vec<NodeId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub activated: Vec<NodeId>,
    pub writes: Vec<WriteRecord>,
    pub verdict_summary: VerdictSummary,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimTrace {
    pub rounds: Vec<RoundRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Metrics {
    /// Last round with a register write; 0 if nothing was ever written.
    pub rounds_to_silence: usize,
    /// First round in which a VERIFY node's own checks failed.
    pub detection_latency: Option<usize>,
    /// Reset waves anchored by the root.
    pub resets_triggered: usize,
    pub n: usize,
    pub seed: u64,
    pub mode: ActivationMode,
    pub converged: bool,
    pub rounds_run: usize,
    /// Nodes that changed their registers, per round.
    pub register_write_counts: Vec<usize>,
}

/// What happened in one round.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundSummary {
    pub round: usize,
    pub activated: Vec<NodeId>,
    pub writers: Vec<NodeId>,
    pub detected: bool,
    pub resets: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimResult {
    pub trace: SimTrace,
    pub metrics: Metrics,
    pub final_config: Configuration,
}

impl SimResult {
    pub fn converged(&self) -> bool {
        self.metrics.converged
    }
}

/// The silent configuration the stabilizer must reach: marker output, every
/// node in VERIFY with clear scratch.
pub fn legal_configuration(graph: &PortGraph) -> Configuration {
    Configuration::from_labels(&first_dfs_mark(graph))
}

pub fn is_legal(graph: &PortGraph, config: &Configuration) -> bool {
    *config == legal_configuration(graph)
}

fn at_rest(graph: &PortGraph, config: &Configuration) -> bool {
    config
        .iter()
        .all(|r| r.phase == Phase::Verify && r.scratch.is_clear())
        && verify_all(graph, config, VerifyMode::FirstDfs).accepted()
}

pub struct Simulator<'g> {
    graph: &'g PortGraph,
    config: Configuration,
    schedule: DaemonSchedule,
    daemon: Daemon,
    bound: usize,
    round: usize,
    quiet: usize,
    /// Outcome of the at-rest check once the quiet streak reaches the window.
    settled: Option<bool>,
    metrics: Metrics,
    trace: Option<SimTrace>,
}

impl<'g> Simulator<'g> {
    pub fn new(
        graph: &'g PortGraph,
        initial: Configuration,
        schedule: DaemonSchedule,
        size_bound: Option<usize>,
    ) -> Result<Self, SimError> {
        let n = graph.node_count();
        if initial.len() != n {
            return Err(SimError::SizeMismatch {
                expected: n,
                got: initial.len(),
            });
        }
        let bound = size_bound.unwrap_or(n);
        if bound < n {
            return Err(SimError::SizeBoundTooSmall { bound, n });
        }
        let metrics = Metrics {
            rounds_to_silence: 0,
            detection_latency: None,
            resets_triggered: 0,
            n,
            seed: schedule.seed,
            mode: schedule.mode,
            converged: false,
            rounds_run: 0,
            register_write_counts: Vec::new(),
        };
        Ok(Self {
            graph,
            config: initial,
            daemon: schedule.start(n),
            schedule,
            bound,
            round: 0,
            quiet: 0,
            settled: None,
            metrics,
            trace: None,
        })
    }

    pub fn record_trace(&mut self) {
        self.trace.get_or_insert_with(SimTrace::default);
    }

    pub fn graph(&self) -> &'g PortGraph {
        self.graph
    }

    pub fn config(&self) -> &Configuration {
        &self.config
    }

    pub fn round(&self) -> usize {
        self.round
    }

    pub fn metrics(&self) -> &Metrics {
        &self.metrics
    }

    pub fn quiet_rounds(&self) -> usize {
        self.quiet
    }

    /// Daemon's choice for the next round. Pair with [`Simulator::apply_round`].
    pub fn next_activation(&mut self) -> Vec<NodeId> {
        self.daemon.next_round()
    }

    pub fn step_round(&mut self) -> RoundSummary {
        let active = self.next_activation();
        self.apply_round(&active)
    }

    /// Runs one round with the given nodes activated.
    pub fn apply_round(&mut self, active: &[NodeId]) -> RoundSummary {
        self.round += 1;
        let graph = self.graph;
        let outcomes: Vec<_> = active
            .iter()
            .map(|&v| {
                (
                    v,
                    local_step_traced(
                        &NeighborhoodSnapshot::capture(graph, &self.config, v),
                        self.bound,
                    ),
                )
            })
            .collect();

        let mut writes = Vec::new();
        let mut writers = Vec::new();
        let mut detected = false;
        let mut resets = 0;
        for (v, out) in outcomes {
            detected |= out.detected;
            resets += usize::from(out.root_reset);
            if out.next != self.config[v] {
                if self.trace.is_some() {
                    for f in Field::ALL {
                        let (old, new) = (f.get(&self.config[v]), f.get(&out.next));
                        if old != new {
                            writes.push(WriteRecord {
                                id: v,
                                field: f,
                                old,
                                new,
                            });
                        }
                    }
                }
                writers.push(v);
                self.config[v] = out.next;
            }
        }

        let m = &mut self.metrics;
        m.rounds_run = self.round;
        m.register_write_counts.push(writers.len());
        m.resets_triggered += resets;
        if detected && m.detection_latency.is_none() {
            m.detection_latency = Some(self.round);
        }
        if writers.is_empty() {
            self.quiet += 1;
        } else {
            m.rounds_to_silence = self.round;
            self.quiet = 0;
            self.settled = None;
        }

        if let Some(trace) = self.trace.as_mut() {
            let vm = verify_all(graph, &self.config, VerifyMode::FirstDfs);
            trace.rounds.push(RoundRecord {
                round: self.round,
                activated: active.to_vec(),
                writes,
                verdict_summary: VerdictSummary {
                    accepted: vm.accepted(),
                    detecting_nodes: vm.detecting_nodes(),
                },
            });
        }
        RoundSummary {
            round: self.round,
            activated: active.to_vec(),
            writers,
            detected,
            resets,
        }
    }

    /// Overwrite registers mid-run.
    pub fn inject(&mut self, corruptions: &[Corruption]) -> Result<(), InjectError> {
        self.config = inject(&self.config, corruptions)?;
        self.quiet = 0;
        self.settled = None;
        Ok(())
    }

    /// A full window without writes has passed. From here on the
    /// configuration is a fixpoint of every activation.
    pub fn is_quiescent(&self) -> bool {
        self.quiet >= self.schedule.silence_window()
    }

    /// Quiescent and at rest: the run is silent.
    pub fn is_silent(&mut self) -> bool {
        if !self.is_quiescent() {
            return false;
        }
        let (graph, config) = (self.graph, &self.config);
        *self.settled.get_or_insert_with(|| at_rest(graph, config))
    }

    /// Steps until silence, a write-free deadlock, or `limit` total rounds.
    pub fn run_until_silent(&mut self, limit: usize) -> bool {
        loop {
            if self.is_quiescent() {
                let silent = self.is_silent();
                self.metrics.converged = silent;
                return silent;
            }
            if self.round >= limit {
                self.metrics.converged = false;
                return false;
            }
            self.step_round();
        }
    }

    pub fn finish(self) -> SimResult {
        SimResult {
            trace: self.trace.unwrap_or_default(),
            metrics: self.metrics,
            final_config: self.config,
        }
    }
}

/// Runs until silence or the round limit. Non-convergence is reported through
/// `metrics.converged`, with the partial trace kept.
pub fn run(
    graph: &PortGraph,
    initial: Configuration,
    schedule: &DaemonSchedule,
    options: &RunOptions,
) -> Result<SimResult, SimError> {
    if options.round_limit == 0 {
        return Err(SimError::ZeroRoundLimit);
    }
    let mut sim = Simulator::new(graph, initial, schedule.clone(), options.size_bound)?;
    if options.record_trace {
        sim.record_trace();
    }
    sim.run_until_silent(options.round_limit);
    Ok(sim.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate, GraphKind};

    fn sync_run(g: &PortGraph, init: Configuration) -> SimResult {
        let s = DaemonSchedule::synchronous();
        run(g, init, &s, &RunOptions::for_graph(g, &s).with_trace()).unwrap()
    }

    #[test]
    fn legal_start_is_silent_immediately() {
        let g = generate(GraphKind::RandomConnected, 12, 5).unwrap();
        let r = sync_run(&g, legal_configuration(&g));
        assert!(r.converged());
        assert_eq!(r.metrics.rounds_to_silence, 0);
        assert_eq!(r.metrics.resets_triggered, 0);
        assert_eq!(r.metrics.detection_latency, None);
        assert!(r.trace.rounds.iter().all(|rr| rr.writes.is_empty()));
    }

    #[test]
    fn null_path_of_five_converges_with_one_reset() {
        let g = generate(GraphKind::Path, 5, 0).unwrap();
        let r = sync_run(&g, Configuration::null(5));
        assert!(r.converged(), "{:?}", r.metrics);
        assert_eq!(r.metrics.resets_triggered, 1);
        assert_eq!(r.metrics.detection_latency, Some(1));
        assert_eq!(r.final_config, legal_configuration(&g));
        // in order along the path
        let ivs: Vec<_> = r
            .final_config
            .iter()
            .map(|x| x.interval().unwrap())
            .collect();
        let root = g.root();
        assert_eq!((ivs[root].enter, ivs[root].exit), (1, 10));
    }

    #[test]
    fn corrupted_out_detected_in_one_round() {
        let g = generate(GraphKind::Path, 5, 0).unwrap();
        let init = inject(
            &legal_configuration(&g),
            &[Corruption::new(2, Field::Out, FieldValue::Int(99))],
        )
        .unwrap();
        let r = sync_run(&g, init);
        assert!(r.converged());
        assert_eq!(r.metrics.detection_latency, Some(1));
        assert!(r.metrics.rounds_to_silence >= 1);
        assert_eq!(r.final_config, legal_configuration(&g));
    }

    #[test]
    fn converges_under_every_daemon() {
        for mode in [
            ActivationMode::Synchronous,
            ActivationMode::RandomSubset,
            ActivationMode::AdversarialSingle,
        ] {
            for seed in 0..4 {
                let g = generate(GraphKind::RandomConnected, 10, seed).unwrap();
                let s = DaemonSchedule::for_mode(mode, 10, seed);
                let mut opts = RunOptions::for_graph(&g, &s);
                opts.round_limit *= 20;
                let r = run(&g, Configuration::null(10), &s, &opts).unwrap();
                assert!(r.converged(), "{mode} seed {seed}: {:?}", r.metrics);
                assert!(is_legal(&g, &r.final_config));
            }
        }
    }

    #[test]
    fn size_mismatch_rejected() {
        let g = generate(GraphKind::Ring, 4, 0).unwrap();
        assert!(matches!(
            Simulator::new(
                &g,
                Configuration::null(3),
                DaemonSchedule::synchronous(),
                None
            ),
            Err(SimError::SizeMismatch { .. })
        ));
    }
}
