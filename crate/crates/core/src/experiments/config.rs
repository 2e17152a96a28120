//! Serializable experiment descriptions. A persisted config reruns to a
//! byte-identical report.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::doc::{DocError, GraphDocument};
use crate::graph::{generate_with, GraphError, GraphKind, PortGraph, PortOrder};
use crate::registers::Configuration;
use crate::stabilizer::{
    inject, is_legal, legal_configuration, run, ActivationMode, Corruption, DaemonSchedule,
    InjectError, Metrics, RunOptions, SimError, SimTrace,
};
use crate::token::{run_circulation, CirculationError, CirculationOptions, CirculationTrace};

use super::bench::{run_bench, BenchConfig, BenchReport};
use super::fuzz::{garbage_configuration, run_fuzz, FuzzConfig, FuzzReport};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Doc(#[from] DocError),
    #[error(transparent)]
    Inject(#[from] InjectError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Circulation(#[from] CirculationError),
    #[error("report has no embedded config: {0}")]
    NoConfig(serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum GraphSource {
    Generated {
        kind: GraphKind,
        n: usize,
        seed: u64,
        #[serde(default)]
        port_order: PortOrder,
    },
    Inline {
        document: GraphDocument,
    },
}

impl GraphSource {
    pub fn build(&self) -> Result<(PortGraph, Option<Configuration>), ExperimentError> {
        match self {
            &GraphSource::Generated {
                kind,
                n,
                seed,
                port_order,
            } => Ok((generate_with(kind, n, seed, port_order)?, None)),
            GraphSource::Inline { document } => Ok((document.graph()?, document.config()?)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitSpec {
    /// Every register null.
    Null,
    /// Marker output.
    Legal,
    /// Registers taken from the inline graph document.
    Document,
    /// Arbitrary register values.
    Garbage { seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimulateConfig {
    pub graph: GraphSource,
    pub init: InitSpec,
    #[serde(default)]
    pub inject: Vec<Corruption>,
    pub mode: ActivationMode,
    pub daemon_seed: u64,
    /// Defaults to the mode's standard bound.
    #[serde(default)]
    pub fairness_bound: Option<usize>,
    #[serde(default)]
    pub round_limit: Option<usize>,
    #[serde(default)]
    pub trace: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateReport {
    pub metrics: Metrics,
    pub legal_at_end: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<SimTrace>,
    pub final_state: GraphDocument,
}

pub fn simulate(config: &SimulateConfig) -> Result<SimulateReport, ExperimentError> {
    let (graph, doc_regs) = config.graph.build()?;
    let n = graph.node_count();
    let start = match config.init {
        InitSpec::Null => Configuration::null(n),
        InitSpec::Legal => legal_configuration(&graph),
        InitSpec::Document => doc_regs.ok_or(DocError::MissingRegisters)?,
        InitSpec::Garbage { seed } => garbage_configuration(
            &graph,
            &mut <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed),
        ),
    };
    let start = inject(&start, &config.inject)?;
    let mut schedule = DaemonSchedule::for_mode(config.mode, n, config.daemon_seed);
    if let Some(b) = config.fairness_bound {
        schedule.fairness_bound = b;
    }
    let mut opts = RunOptions::for_graph(&graph, &schedule);
    if let Some(limit) = config.round_limit {
        opts.round_limit = limit;
    }
    opts.record_trace = config.trace;
    let r = run(&graph, start, &schedule, &opts)?;
    Ok(SimulateReport {
        legal_at_end: is_legal(&graph, &r.final_config),
        final_state: GraphDocument::with_config(&graph, &r.final_config),
        trace: config.trace.then_some(r.trace),
        metrics: r.metrics,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokensConfig {
    pub graph: GraphSource,
    pub options: CirculationOptions,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokensReport {
    /// First round of the legitimate suffix.
    pub legitimate_from: Option<usize>,
    /// Complete cycles in that suffix, all in the expected order.
    pub cycles_checked: usize,
    pub trace: CirculationTrace,
}

pub fn tokens(config: &TokensConfig) -> Result<TokensReport, ExperimentError> {
    let (graph, _) = config.graph.build()?;
    let trace = run_circulation(&graph, &config.options)?;
    let legitimate_from = trace.legitimate_from();
    let cycles_checked = legitimate_from.map_or(0, |r| trace.cycles_after(r - 1).count());
    Ok(TokensReport {
        legitimate_from,
        cycles_checked,
        trace,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum ExperimentConfig {
    Simulate(SimulateConfig),
    Fuzz(FuzzConfig),
    Bench(BenchConfig),
    Tokens(TokensConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ExperimentResult {
    Simulate(SimulateReport),
    Fuzz(FuzzReport),
    Bench(BenchReport),
    Tokens(TokensReport),
}

impl ExperimentResult {
    /// Whether the run met its own success criterion.
    pub fn success(&self) -> bool {
        match self {
            ExperimentResult::Simulate(r) => r.metrics.converged && r.legal_at_end,
            ExperimentResult::Fuzz(r) => r.perfect(),
            ExperimentResult::Bench(r) => {
                r.all_converged && r.within_time_bound && r.within_width_bound
            }
            ExperimentResult::Tokens(r) => r.legitimate_from.is_some(),
        }
    }
}

/// A report together with the config that produced it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Envelope {
    pub config: ExperimentConfig,
    pub report: ExperimentResult,
}

#[derive(Deserialize)]
struct ConfigOnly {
    config: ExperimentConfig,
}

impl Envelope {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize") + "\n"
    }
}

impl ExperimentConfig {
    pub fn execute(&self) -> Result<Envelope, ExperimentError> {
        let report = match self {
            ExperimentConfig::Simulate(c) => ExperimentResult::Simulate(simulate(c)?),
            ExperimentConfig::Fuzz(c) => ExperimentResult::Fuzz(run_fuzz(c)),
            ExperimentConfig::Bench(c) => ExperimentResult::Bench(run_bench(c)),
            ExperimentConfig::Tokens(c) => ExperimentResult::Tokens(tokens(c)?),
        };
        Ok(Envelope {
            config: self.clone(),
            report,
        })
    }

    /// Accepts either a bare config or a full report.
    pub fn from_json(text: &str) -> Result<Self, ExperimentError> {
        match serde_json::from_str::<ExperimentConfig>(text) {
            Ok(c) => Ok(c),
            Err(_) => serde_json::from_str::<ConfigOnly>(text)
                .map(|e| e.config)
                .map_err(ExperimentError::NoConfig),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn replay_is_byte_identical() {
        let configs = vec![
            ExperimentConfig::Simulate(SimulateConfig {
                graph: GraphSource::Generated {
                    kind: GraphKind::Ring,
                    n: 7,
                    seed: 3,
                    port_order: PortOrder::Shuffled,
                },
                init: InitSpec::Garbage { seed: 9 },
                inject: vec![],
                mode: ActivationMode::RandomSubset,
                daemon_seed: 4,
                fairness_bound: None,
                round_limit: None,
                trace: true,
            }),
            ExperimentConfig::Fuzz(FuzzConfig {
                trials: 50,
                ..FuzzConfig::default()
            }),
            ExperimentConfig::Bench(BenchConfig {
                sizes: vec![6, 12],
                seeds: vec![1],
                ..BenchConfig::default()
            }),
            ExperimentConfig::Tokens(TokensConfig {
                graph: GraphSource::Generated {
                    kind: GraphKind::Path,
                    n: 5,
                    seed: 0,
                    port_order: PortOrder::Sorted,
                },
                options: CirculationOptions::new(60),
            }),
        ];
        for c in configs {
            let first = c.execute().unwrap().to_json();
            let parsed = ExperimentConfig::from_json(&first).unwrap();
            assert_eq!(parsed, c);
            assert_eq!(parsed.execute().unwrap().to_json(), first);
        }
    }

    #[test]
    fn inline_document_with_registers() {
        let g = crate::graph::generate(GraphKind::Path, 5, 0).unwrap();
        let c = SimulateConfig {
            graph: GraphSource::Inline {
                document: GraphDocument::with_config(&g, &Configuration::null(5)),
            },
            init: InitSpec::Document,
            inject: vec![],
            mode: ActivationMode::Synchronous,
            daemon_seed: 0,
            fairness_bound: None,
            round_limit: None,
            trace: false,
        };
        let r = simulate(&c).unwrap();
        assert!(r.metrics.converged && r.legal_at_end);
        assert_eq!(r.metrics.resets_triggered, 1);
    }
}
