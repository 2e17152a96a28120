//! Text documents: graphs with optional registers (JSON), verdict reports and
//! DOT export.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{GraphError, NodeId, Port, PortGraph};
use crate::registers::{Configuration, Label, MarkScratch, NodeRegisters, Phase};
use crate::stabilizer::VerdictSummary;
use crate::verifier::{Verdict, VerdictMap};

#[derive(Debug, Error)]
pub enum DocError {
    #[error("malformed document: {0}")]
    Json(#[from] serde_json::Error),
    #[error("document declares n = {declared} but lists ports for {actual} nodes")]
    NodeCount { declared: usize, actual: usize },
    #[error("document has registers for {got} nodes, expected {expected}")]
    RegisterCount { expected: usize, got: usize },
    #[error("document has no registers")]
    MissingRegisters,
    #[error("invalid graph: {0}")]
    Graph(#[from] GraphError),
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegisterDoc {
    pub parent_port: Option<Port>,
    #[serde(rename = "in")]
    pub in_label: Option<Label>,
    #[serde(rename = "out")]
    pub out_label: Option<Label>,
    #[serde(default)]
    pub phase: Phase,
    #[serde(default, skip_serializing_if = "is_false")]
    pub token: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cursor: Option<Port>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counter: Option<Label>,
    #[serde(default, skip_serializing_if = "is_false")]
    pub abort: bool,
    #[serde(default, skip_serializing_if = "is_false")]
    pub ready: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dist: Option<u32>,
}

impl From<&NodeRegisters> for RegisterDoc {
    fn from(r: &NodeRegisters) -> Self {
        let s = &r.scratch;
        Self {
            parent_port: r.parent_port,
            in_label: r.in_label,
            out_label: r.out_label,
            phase: r.phase,
            token: s.token,
            cursor: s.cursor,
            counter: s.counter,
            abort: s.abort,
            ready: s.ready,
            dist: s.dist,
        }
    }
}

impl From<&RegisterDoc> for NodeRegisters {
    fn from(d: &RegisterDoc) -> Self {
        Self {
            parent_port: d.parent_port,
            in_label: d.in_label,
            out_label: d.out_label,
            phase: d.phase,
            scratch: MarkScratch {
                token: d.token,
                cursor: d.cursor,
                counter: d.counter,
                abort: d.abort,
                ready: d.ready,
                dist: d.dist,
            },
        }
    }
}

/// `{"n": .., "root": .., "ports": [[..], ..], "registers": [..]?}`
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphDocument {
    pub n: usize,
    pub root: NodeId,
    pub ports: Vec<Vec<NodeId>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub registers: Option<Vec<RegisterDoc>>,
}

impl GraphDocument {
    pub fn from_graph(graph: &PortGraph) -> Self {
        Self {
            n: graph.node_count(),
            root: graph.root(),
            ports: graph.ports().to_vec(),
            registers: None,
        }
    }

    pub fn with_config(graph: &PortGraph, config: &Configuration) -> Self {
        Self {
            registers: Some(config.iter().map(RegisterDoc::from).collect()),
            ..Self::from_graph(graph)
        }
    }

    pub fn parse(text: &str) -> Result<Self, DocError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("documents always serialize")
    }

    pub fn graph(&self) -> Result<PortGraph, DocError> {
        if self.ports.len() != self.n {
            return Err(DocError::NodeCount {
                declared: self.n,
                actual: self.ports.len(),
            });
        }
        Ok(PortGraph::new(self.root, self.ports.clone())?)
    }

    pub fn config(&self) -> Result<Option<Configuration>, DocError> {
        let Some(regs) = &self.registers else {
            return Ok(None);
        };
        if regs.len() != self.n {
            return Err(DocError::RegisterCount {
                expected: self.n,
                got: regs.len(),
            });
        }
        Ok(Some(Configuration::new(
            regs.iter().map(NodeRegisters::from).collect(),
        )))
    }

    /// Graph plus registers; fails if the registers are absent.
    pub fn labeled(&self) -> Result<(PortGraph, Configuration), DocError> {
        let g = self.graph()?;
        let c = self.config()?.ok_or(DocError::MissingRegisters)?;
        Ok((g, c))
    }
}

/// Per-node verdicts plus a global summary.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerdictReport {
    pub nodes: Vec<Verdict>,
    pub summary: VerdictSummary,
}

impl From<&VerdictMap> for VerdictReport {
    fn from(vm: &VerdictMap) -> Self {
        Self {
            nodes: vm.verdicts.clone(),
            summary: VerdictSummary {
                accepted: vm.accepted(),
                detecting_nodes: vm.detecting_nodes(),
            },
        }
    }
}

fn interval_text(r: &NodeRegisters) -> String {
    let show = |l: Option<Label>| l.map_or_else(|| "-".to_string(), |x| x.to_string());
    format!("[{},{}]", show(r.in_label), show(r.out_label))
}

/// Tree edges (parent pointers) solid, all other edges dashed.
pub fn to_dot(graph: &PortGraph, config: &Configuration) -> String {
    let mut out = String::from("graph dfs {\n");
    for v in graph.nodes() {
        let label = config
            .get(v)
            .map_or_else(|| "[-,-]".to_string(), interval_text);
        let shape = if graph.is_root(v) {
            ", shape=doublecircle"
        } else {
            ""
        };
        let _ = writeln!(out, "  {v} [label=\"{v}\\n{label}\"{shape}];");
    }
    let parent = |v: NodeId| {
        config
            .get(v)
            .and_then(|r| r.parent_port)
            .and_then(|p| graph.neighbor(v, p))
    };
    for (u, v) in graph.edges() {
        let tree = parent(u) == Some(v) || parent(v) == Some(u);
        let style = if tree { "solid" } else { "dashed" };
        let _ = writeln!(out, "  {u} -- {v} [style={style}];");
    }
    out.push_str("}\n");
    out
}
