//! Register-width accounting.
//!
//! Every field gets a fixed width derived from `n` and the maximum degree,
//! with one spare code for "null" where the field is nullable:
//! labels and counters `ceil(log2(2n+1))`, ports and cursors
//! `ceil(log2(Δ+1))`, wave distance `ceil(log2(n+1))`, the phase 2 bits and
//! each flag 1 bit. Values that do not fit are reported, not clamped.

use serde::{Deserialize, Serialize};

use crate::graph::{NodeId, PortGraph};
use crate::registers::{Configuration, Label};

use super::inject::{Field, FieldValue};

/// Bits needed to distinguish `values` codes.
pub fn bits_for(values: u64) -> u32 {
    if values <= 1 {
        0
    } else {
        64 - (values - 1).leading_zeros()
    }
}

/// `ceil(log2(n))`, at least 1.
pub fn log2_ceil(n: usize) -> u32 {
    bits_for(n as u64).max(1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldWidths {
    pub label: u32,
    pub port: u32,
    pub dist: u32,
    pub phase: u32,
    pub flag: u32,
}

impl FieldWidths {
    pub fn for_network(n: usize, max_degree: usize) -> Self {
        Self {
            label: bits_for(2 * n as u64 + 1),
            port: bits_for(max_degree as u64 + 1),
            dist: bits_for(n as u64 + 1),
            phase: 2,
            flag: 1,
        }
    }

    pub fn width(&self, f: Field) -> u32 {
        match f {
            Field::ParentPort | Field::Cursor => self.port,
            Field::In | Field::Out | Field::Counter => self.label,
            Field::Phase => self.phase,
            Field::Token | Field::Abort | Field::Ready => self.flag,
            Field::Dist => self.dist,
        }
    }

    /// Tree-layer registers of one node.
    pub fn tree_bits(&self) -> u32 {
        Field::ALL.iter().map(|&f| self.width(f)).sum()
    }

    /// Token layer: parity bit plus a child cursor.
    pub fn token_bits(&self) -> u32 {
        self.flag + self.port
    }

    pub fn total_bits(&self) -> u32 {
        self.tree_bits() + self.token_bits()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WidthViolation {
    pub field: Field,
    pub value: FieldValue,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeAudit {
    pub id: NodeId,
    pub bits: u32,
    pub violations: Vec<WidthViolation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WidthAudit {
    pub n: usize,
    pub max_degree: usize,
    pub widths: FieldWidths,
    pub bits_per_node: u32,
    pub log2_n: u32,
    /// `bits_per_node / ceil(log2 n)`.
    pub ratio: f64,
    pub max_label: Option<Label>,
    pub nodes: Vec<NodeAudit>,
}

impl WidthAudit {
    pub fn violations(&self) -> usize {
        self.nodes.iter().map(|a| a.violations.len()).sum()
    }

    pub fn within(&self, c: u32) -> bool {
        self.bits_per_node <= c * self.log2_n
    }
}

fn fits(f: Field, v: FieldValue, n: usize, degree: usize) -> bool {
    let max_label = 2 * n as i64;
    match (f, v) {
        (_, FieldValue::Null) => true,
        (Field::ParentPort | Field::Cursor, FieldValue::Int(p)) => (0..degree as i64).contains(&p),
        (Field::In | Field::Out | Field::Counter, FieldValue::Int(l)) => {
            (1..=max_label).contains(&l)
        }
        (Field::Dist, FieldValue::Int(d)) => (0..n as i64).contains(&d),
        (_, FieldValue::Bool(_) | FieldValue::Phase(_)) => true,
        _ => false,
    }
}

pub fn audit_register_width(graph: &PortGraph, config: &Configuration) -> WidthAudit {
    let n = graph.node_count();
    let widths = FieldWidths::for_network(n, graph.max_degree());
    let bits = widths.total_bits();
    let nodes = config
        .iter()
        .enumerate()
        .map(|(id, r)| {
            let degree = if id < n { graph.degree(id) } else { 0 };
            let violations = Field::ALL
                .iter()
                .map(|&f| (f, f.get(r)))
                .filter(|&(f, v)| !fits(f, v, n, degree))
                .map(|(field, value)| WidthViolation { field, value })
                .collect();
            NodeAudit {
                id,
                bits,
                violations,
            }
        })
        .collect();
    let max_label = config
        .iter()
        .flat_map(|r| [r.in_label, r.out_label])
        .flatten()
        .max();
    let log2_n = log2_ceil(n);
    WidthAudit {
        n,
        max_degree: graph.max_degree(),
        widths,
        bits_per_node: bits,
        log2_n,
        ratio: f64::from(bits) / f64::from(log2_n),
        max_label,
        nodes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate, GraphKind};
    use crate::stabilizer::{inject, legal_configuration, Corruption};

    #[test]
    fn label_widths() {
        assert_eq!(FieldWidths::for_network(8, 2).label, 5);
        assert_eq!(FieldWidths::for_network(1, 0).label, 2);
        assert_eq!(FieldWidths::for_network(256, 3).label, 10);
        assert_eq!(bits_for(1), 0);
        assert_eq!(bits_for(2), 1);
        assert_eq!(bits_for(17), 5);
    }

    #[test]
    fn legal_config_has_no_violations() {
        let g = generate(GraphKind::RandomConnected, 8, 1).unwrap();
        let a = audit_register_width(&g, &legal_configuration(&g));
        assert_eq!(a.violations(), 0);
        assert_eq!(a.max_label, Some(16));
        assert_eq!(a.widths.label, 5);
    }

    #[test]
    fn oversized_label_flagged() {
        let g = generate(GraphKind::RandomConnected, 8, 1).unwrap();
        let bad = inject(
            &legal_configuration(&g),
            &[Corruption::new(
                3,
                Field::Out,
                FieldValue::Int(1_000_000_000),
            )],
        )
        .unwrap();
        let a = audit_register_width(&g, &bad);
        assert_eq!(a.violations(), 1);
        assert_eq!(a.nodes[3].violations[0].field, Field::Out);
    }

    #[test]
    fn single_node() {
        let g = generate(GraphKind::Path, 1, 0).unwrap();
        let a = audit_register_width(&g, &legal_configuration(&g));
        assert_eq!(a.widths.label, 2);
        assert_eq!(a.violations(), 0);
    }
}
