//! Register-level fault injection.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::NodeId;
use crate::registers::{Configuration, NodeRegisters, Phase};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InjectError {
    #[error("unknown node {node} (network has {n} nodes)")]
    UnknownNode { node: NodeId, n: usize },
    #[error("unknown register field `{0}`")]
    UnknownField(String),
    #[error("value `{value}` does not fit field `{field}`")]
    InvalidValue { field: Field, value: String },
    #[error("malformed corruption `{0}`, expected node=<id>,field=<name>,value=<v>")]
    Malformed(String),
}

/// A writable register field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Field {
    ParentPort,
    In,
    Out,
    Phase,
    Token,
    Cursor,
    Counter,
    Abort,
    Ready,
    Dist,
}

impl Field {
    pub const ALL: [Field; 10] = [
        Field::ParentPort,
        Field::In,
        Field::Out,
        Field::Phase,
        Field::Token,
        Field::Cursor,
        Field::Counter,
        Field::Abort,
        Field::Ready,
        Field::Dist,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Field::ParentPort => "parent_port",
            Field::In => "in",
            Field::Out => "out",
            Field::Phase => "phase",
            Field::Token => "token",
            Field::Cursor => "cursor",
            Field::Counter => "counter",
            Field::Abort => "abort",
            Field::Ready => "ready",
            Field::Dist => "dist",
        }
    }

    pub fn get(self, r: &NodeRegisters) -> FieldValue {
        let opt = |v: Option<i64>| v.map_or(FieldValue::Null, FieldValue::Int);
        match self {
            Field::ParentPort => opt(r.parent_port.map(|p| p as i64)),
            Field::In => opt(r.in_label),
            Field::Out => opt(r.out_label),
            Field::Phase => FieldValue::Phase(r.phase),
            Field::Token => FieldValue::Bool(r.scratch.token),
            Field::Cursor => opt(r.scratch.cursor.map(|p| p as i64)),
            Field::Counter => opt(r.scratch.counter),
            Field::Abort => FieldValue::Bool(r.scratch.abort),
            Field::Ready => FieldValue::Bool(r.scratch.ready),
            Field::Dist => opt(r.scratch.dist.map(i64::from)),
        }
    }

    pub fn set(self, r: &mut NodeRegisters, value: FieldValue) -> Result<(), InjectError> {
        let bad = || InjectError::InvalidValue {
            field: self,
            value: value.to_string(),
        };
        let port = |v: FieldValue| match v {
            FieldValue::Null => Ok(None),
            FieldValue::Int(i) => usize::try_from(i).map(Some).map_err(|_| bad()),
            _ => Err(bad()),
        };
        let label = |v: FieldValue| match v {
            FieldValue::Null => Ok(None),
            FieldValue::Int(i) => Ok(Some(i)),
            _ => Err(bad()),
        };
        let flag = |v: FieldValue| match v {
            FieldValue::Bool(b) => Ok(b),
            FieldValue::Int(0) => Ok(false),
            FieldValue::Int(1) => Ok(true),
            _ => Err(bad()),
        };
        match self {
            Field::ParentPort => r.parent_port = port(value)?,
            Field::In => r.in_label = label(value)?,
            Field::Out => r.out_label = label(value)?,
            Field::Phase => match value {
                FieldValue::Phase(p) => r.phase = p,
                _ => return Err(bad()),
            },
            Field::Token => r.scratch.token = flag(value)?,
            Field::Cursor => r.scratch.cursor = port(value)?,
            Field::Counter => r.scratch.counter = label(value)?,
            Field::Abort => r.scratch.abort = flag(value)?,
            Field::Ready => r.scratch.ready = flag(value)?,
            Field::Dist => {
                r.scratch.dist = match value {
                    FieldValue::Null => None,
                    FieldValue::Int(i) => Some(u32::try_from(i).map_err(|_| bad())?),
                    _ => return Err(bad()),
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Field {
    type Err = InjectError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Field::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| InjectError::UnknownField(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FieldValue {
    Null,
    Bool(bool),
    Int(i64),
    Phase(Phase),
}

impl fmt::Display for FieldValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldValue::Null => f.write_str("null"),
            FieldValue::Bool(b) => write!(f, "{b}"),
            FieldValue::Int(i) => write!(f, "{i}"),
            FieldValue::Phase(p) => write!(f, "{p}"),
        }
    }
}

impl FromStr for FieldValue {
    type Err = InjectError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("null") || s.eq_ignore_ascii_case("none") {
            return Ok(FieldValue::Null);
        }
        if let Ok(b) = s.parse::<bool>() {
            return Ok(FieldValue::Bool(b));
        }
        if let Ok(i) = s.parse::<i64>() {
            return Ok(FieldValue::Int(i));
        }
        s.parse::<Phase>()
            .map(FieldValue::Phase)
            .map_err(|_| InjectError::Malformed(s.to_string()))
    }
}

/// Overwrite one register field of one node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corruption {
    pub node: NodeId,
    pub field: Field,
    pub value: FieldValue,
}

impl Corruption {
    pub fn new(node: NodeId, field: Field, value: FieldValue) -> Self {
        Self { node, field, value }
    }

    /// Parses `node=2,field=out,value=99`.
    pub fn parse(s: &str) -> Result<Self, InjectError> {
        let (mut node, mut field, mut value) = (None, None, None);
        for part in s.split(',') {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| InjectError::Malformed(s.to_string()))?;
            match k.trim() {
                "node" => {
                    node = Some(
                        v.trim()
                            .parse::<NodeId>()
                            .map_err(|_| InjectError::Malformed(s.to_string()))?,
                    )
                }
                "field" => field = Some(v.trim().parse::<Field>()?),
                "value" => value = Some(v.parse::<FieldValue>()?),
                _ => return Err(InjectError::Malformed(s.to_string())),
            }
        }
        match (node, field, value) {
            (Some(node), Some(field), Some(value)) => Ok(Self { node, field, value }),
            _ => Err(InjectError::Malformed(s.to_string())),
        }
    }

    /// Parses a `;`-separated list.
    pub fn parse_list(s: &str) -> Result<Vec<Self>, InjectError> {
        s.split(';')
            .filter(|p| !p.trim().is_empty())
            .map(Corruption::parse)
            .collect()
    }
}

impl fmt::Display for Corruption {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "node={},field={},value={}",
            self.node, self.field, self.value
        )
    }
}

/// Applies the corruptions in order. Values are not checked against the
/// graph; only unknown nodes and type mismatches are rejected.
pub fn inject(
    config: &Configuration,
    corruptions: &[Corruption],
) -> Result<Configuration, InjectError> {
    let mut out = config.clone();
    for c in corruptions {
        let n = out.len();
        let regs = out
            .get(c.node)
            .ok_or(InjectError::UnknownNode { node: c.node, n })?;
        let mut regs = regs.clone();
        c.field.set(&mut regs, c.value)?;
        out[c.node] = regs;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate, GraphKind};
    use crate::oracle::first_dfs_mark;
    use crate::verifier::{verify_all, Predicate, VerifyMode};

    #[test]
    fn parse_roundtrip() {
        let c = Corruption::parse("node=2,field=out,value=99").unwrap();
        assert_eq!(c, Corruption::new(2, Field::Out, FieldValue::Int(99)));
        assert_eq!(Corruption::parse(&c.to_string()).unwrap(), c);
        let list =
            Corruption::parse_list("node=0,field=phase,value=reset; node=1,field=in,value=null")
                .unwrap();
        assert_eq!(list[0].value, FieldValue::Phase(Phase::Reset));
        assert_eq!(list[1].value, FieldValue::Null);
    }

    #[test]
    fn errors() {
        let c = Configuration::null(3);
        assert_eq!(
            inject(&c, &[Corruption::new(5, Field::In, FieldValue::Int(1))]),
            Err(InjectError::UnknownNode { node: 5, n: 3 })
        );
        assert!(matches!(
            Corruption::parse("node=1,field=colour,value=1"),
            Err(InjectError::UnknownField(_))
        ));
        assert!(matches!(
            inject(&c, &[Corruption::new(0, Field::Phase, FieldValue::Int(3))]),
            Err(InjectError::InvalidValue { .. })
        ));
        assert!(matches!(
            inject(
                &c,
                &[Corruption::new(0, Field::ParentPort, FieldValue::Int(-1))]
            ),
            Err(InjectError::InvalidValue { .. })
        ));
    }

    #[test]
    fn empty_list_is_identity() {
        let g = generate(GraphKind::RandomConnected, 9, 4).unwrap();
        let c = Configuration::from_labels(&first_dfs_mark(&g));
        assert_eq!(inject(&c, &[]).unwrap(), c);
    }

    #[test]
    fn root_parent_trips_r1() {
        let g = generate(GraphKind::Path, 4, 0).unwrap();
        let c = Configuration::from_labels(&first_dfs_mark(&g));
        let bad = inject(
            &c,
            &[Corruption::new(
                g.root(),
                Field::ParentPort,
                FieldValue::Int(0),
            )],
        )
        .unwrap();
        assert!(verify_all(&g, &bad, VerifyMode::FirstDfs)
            .get(g.root())
            .failed(Predicate::R1));
    }

    #[test]
    fn leaf_out_trips_a3_and_parent_a4() {
        // 0 - 1, and 1 has leaves 2 (3,4) and 3 (5,6)
        let g = crate::graph::PortGraph::new(0, vec![vec![1], vec![0, 2, 3], vec![1], vec![1]])
            .unwrap();
        let c = Configuration::from_labels(&first_dfs_mark(&g));
        assert_eq!(c[3].interval(), Some(crate::oracle::Interval::new(5, 6)));
        let bad = inject(
            &c,
            &[Corruption::new(3, Field::Out, FieldValue::Int(5 + 5))],
        )
        .unwrap();
        let vm = verify_all(&g, &bad, VerifyMode::FirstDfs);
        assert!(vm.get(3).failed(Predicate::A3));
        assert!(vm.get(1).failed(Predicate::A4));
    }

    #[test]
    fn every_field_roundtrips_through_get_set() {
        let mut r = NodeRegisters::default();
        let samples = [
            (Field::ParentPort, FieldValue::Int(3)),
            (Field::In, FieldValue::Int(-4)),
            (Field::Out, FieldValue::Int(1_000_000_000)),
            (Field::Phase, FieldValue::Phase(Phase::Mark)),
            (Field::Token, FieldValue::Bool(true)),
            (Field::Cursor, FieldValue::Int(0)),
            (Field::Counter, FieldValue::Int(7)),
            (Field::Abort, FieldValue::Bool(true)),
            (Field::Ready, FieldValue::Bool(true)),
            (Field::Dist, FieldValue::Int(12)),
        ];
        for (f, v) in samples {
            f.set(&mut r, v).unwrap();
            assert_eq!(f.get(&r), v, "{f}");
        }
    }
}
