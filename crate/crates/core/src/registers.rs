//! Per-node shared registers and whole-network configurations.

use std::fmt;
use std::ops::{Index, IndexMut};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::graph::{NodeId, Port};
use crate::oracle::{Interval, LabeledConfiguration, NodeLabel};

/// DFS interval endpoint. Signed so that arbitrary corruption (including
/// shifts below zero) is representable.
pub type Label = i64;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Phase {
    Reset,
    Mark,
    #[default]
    Verify,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Reset => "RESET",
            Phase::Mark => "MARK",
            Phase::Verify => "VERIFY",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Phase {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "RESET" => Ok(Phase::Reset),
            "MARK" => Ok(Phase::Mark),
            "VERIFY" => Ok(Phase::Verify),
            _ => Err(format!("unknown phase `{s}`")),
        }
    }
}

/// Working state of the reset wave and the distributed marker. All fields are
/// cleared in a legal (silent) configuration.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct MarkScratch {
    /// Holds the marker token.
    pub token: bool,
    /// Port the marker token was handed to.
    pub cursor: Option<Port>,
    /// Last label value issued by this node's part of the traversal.
    pub counter: Option<Label>,
    /// Reset requested but not yet attached to the root's wave.
    pub abort: bool,
    /// Subtree of the reset wave has been cleared.
    pub ready: bool,
    /// Hop distance to the root along the reset wave.
    pub dist: Option<u32>,
}

impl MarkScratch {
    pub fn is_clear(&self) -> bool {
        *self == MarkScratch::default()
    }
}

/// Everything a node publishes to its neighbors.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct NodeRegisters {
    pub parent_port: Option<Port>,
    pub in_label: Option<Label>,
    pub out_label: Option<Label>,
    pub phase: Phase,
    pub scratch: MarkScratch,
}

impl NodeRegisters {
    /// Silent registers for a labeled node.
    pub fn labeled(parent_port: Option<Port>, interval: Interval) -> Self {
        Self {
            parent_port,
            in_label: Some(interval.enter),
            out_label: Some(interval.exit),
            phase: Phase::Verify,
            scratch: MarkScratch::default(),
        }
    }

    pub fn interval(&self) -> Option<Interval> {
        Some(Interval::new(self.in_label?, self.out_label?))
    }

    pub fn label(&self) -> NodeLabel {
        NodeLabel {
            parent_port: self.parent_port,
            interval: self.interval(),
        }
    }
}

/// Global node → registers map. Any value is a legal input.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Configuration(Vec<NodeRegisters>);

impl Configuration {
    pub fn new(nodes: Vec<NodeRegisters>) -> Self {
        Self(nodes)
    }

    /// Every register null, phase VERIFY.
    pub fn null(n: usize) -> Self {
        Self(vec![NodeRegisters::default(); n])
    }

    pub fn from_labels(labels: &LabeledConfiguration) -> Self {
        Self(
            labels
                .nodes
                .iter()
                .map(|l| NodeRegisters {
                    parent_port: l.parent_port,
                    in_label: l.interval.map(|i| i.enter),
                    out_label: l.interval.map(|i| i.exit),
                    phase: Phase::Verify,
                    scratch: MarkScratch::default(),
                })
                .collect(),
        )
    }

    /// Projection onto parent pointers and intervals.
    pub fn labels(&self) -> LabeledConfiguration {
        LabeledConfiguration {
            nodes: self.0.iter().map(NodeRegisters::label).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, NodeRegisters> {
        self.0.iter()
    }

    pub fn as_slice(&self) -> &[NodeRegisters] {
        &self.0
    }

    pub fn get(&self, v: NodeId) -> Option<&NodeRegisters> {
        self.0.get(v)
    }

    pub fn into_inner(self) -> Vec<NodeRegisters> {
        self.0
    }
}

impl Index<NodeId> for Configuration {
    type Output = NodeRegisters;

    fn index(&self, v: NodeId) -> &NodeRegisters {
        &self.0[v]
    }
}

impl IndexMut<NodeId> for Configuration {
    fn index_mut(&mut self, v: NodeId) -> &mut NodeRegisters {
        &mut self.0[v]
    }
}

impl<'a> IntoIterator for &'a Configuration {
    type Item = &'a NodeRegisters;
    type IntoIter = std::slice::Iter<'a, NodeRegisters>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}
