//! Local verifier for first-DFS labelings.
//!
//! Every node reads its own registers and the registers of its direct
//! neighbors, derives the label-implied tree structure around it (the
//! "macros") and evaluates the local interval predicates. A configuration is
//! accepted iff every node accepts. Nothing here writes state, and nothing
//! reads beyond one hop.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::graph::{NodeId, Port, PortGraph};
use crate::oracle::Interval;
use crate::registers::{Configuration, NodeRegisters};

/// Identifier of a local predicate. Root predicates `R*`, non-root `N*`,
/// all-node `A*`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Predicate {
    R1,
    R2,
    N1,
    N2,
    N3,
    N4,
    N5,
    A1,
    A2,
    A3,
    A4,
    A5,
    A6,
    A7,
}

impl Predicate {
    pub const ALL: [Predicate; 14] = [
        Predicate::R1,
        Predicate::R2,
        Predicate::N1,
        Predicate::N2,
        Predicate::N3,
        Predicate::N4,
        Predicate::N5,
        Predicate::A1,
        Predicate::A2,
        Predicate::A3,
        Predicate::A4,
        Predicate::A5,
        Predicate::A6,
        Predicate::A7,
    ];

    /// Predicates that pin the exploration order; dropped in `SomeDfs` mode.
    pub fn is_order_predicate(self) -> bool {
        matches!(self, Predicate::A5 | Predicate::A6)
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerifyMode {
    /// The tree must be the first DFS tree.
    #[default]
    FirstDfs,
    /// Any DFS tree is accepted.
    SomeDfs,
}

impl FromStr for VerifyMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.replace('-', "_").as_str() {
            "first_dfs" => Ok(VerifyMode::FirstDfs),
            "some_dfs" => Ok(VerifyMode::SomeDfs),
            _ => Err(format!("unknown verification mode `{s}`")),
        }
    }
}

/// `a ⊂ b`: strict inclusion of the first interval in the second.
pub fn interval_includes(a: Interval, b: Interval) -> bool {
    b.enter < a.enter && a.exit < b.exit
}

fn included(a: Option<Interval>, b: Option<Interval>) -> bool {
    matches!((a, b), (Some(a), Some(b)) if interval_includes(a, b))
}

#[derive(Debug, Clone, Copy)]
pub struct NeighborView<'a> {
    pub port: Port,
    /// Our port number in this neighbor's ordering.
    pub back_port: Port,
    pub regs: &'a NodeRegisters,
}

/// What one node can see in one read: itself plus each neighbor in port order.
#[derive(Debug, Clone)]
pub struct NeighborhoodSnapshot<'a> {
    pub node: NodeId,
    pub is_root: bool,
    pub own: &'a NodeRegisters,
    pub neighbors: Vec<NeighborView<'a>>,
}

impl<'a> NeighborhoodSnapshot<'a> {
    pub fn capture(graph: &PortGraph, config: &'a Configuration, v: NodeId) -> Self {
        Self::capture_slice(graph, config.as_slice(), v)
    }

    pub fn capture_slice(graph: &PortGraph, regs: &'a [NodeRegisters], v: NodeId) -> Self {
        let neighbors = graph
            .neighbors(v)
            .iter()
            .enumerate()
            .map(|(port, &u)| NeighborView {
                port,
                back_port: graph.back_port(v, port),
                regs: &regs[u],
            })
            .collect();
        Self {
            node: v,
            is_root: graph.is_root(v),
            own: &regs[v],
            neighbors,
        }
    }

    pub fn degree(&self) -> usize {
        self.neighbors.len()
    }

    pub fn neighbor(&self, port: Port) -> Option<&NeighborView<'a>> {
        self.neighbors.get(port)
    }

    fn interval_at(&self, port: Port) -> Option<Interval> {
        self.neighbors.get(port).and_then(|n| n.regs.interval())
    }
}

/// Tree structure around one node as implied by labels alone. All sets hold
/// ports, ascending.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MacroView {
    pub anc: Vec<Port>,
    pub parent: Option<Port>,
    pub desc: Vec<Port>,
    pub children: Vec<Port>,
    /// Children ordered by `in` label.
    pub children_by_label: Vec<Port>,
    /// Children ordered by port.
    pub children_by_port: Vec<Port>,
}

pub fn compute_macros(snap: &NeighborhoodSnapshot<'_>) -> MacroView {
    let me = snap.own.interval();
    let ivs: Vec<Option<Interval>> = snap.neighbors.iter().map(|n| n.regs.interval()).collect();

    let anc: Vec<Port> = (0..ivs.len()).filter(|&p| included(me, ivs[p])).collect();
    let desc: Vec<Port> = (0..ivs.len()).filter(|&p| included(ivs[p], me)).collect();

    // the narrowest ancestor, if exactly one is included in all the others
    let narrowest: Vec<Port> = anc
        .iter()
        .copied()
        .filter(|&w| anc.iter().all(|&u| u == w || included(ivs[w], ivs[u])))
        .collect();
    let parent = match narrowest.as_slice() {
        [only] => Some(*only),
        _ => None,
    };

    let children: Vec<Port> = desc
        .iter()
        .copied()
        .filter(|&u| !desc.iter().any(|&w| w != u && included(ivs[u], ivs[w])))
        .collect();

    let mut children_by_label = children.clone();
    children_by_label.sort_by_key(|&p| (ivs[p].map(|i| i.enter), p));
    let children_by_port = children.clone();

    MacroView {
        anc,
        parent,
        desc,
        children,
        children_by_label,
        children_by_port,
    }
}

/// One node's decision.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub id: NodeId,
    pub accepted: bool,
    pub failures: Vec<Predicate>,
}

impl Verdict {
    fn from_failures(id: NodeId, failures: BTreeSet<Predicate>) -> Self {
        Self {
            id,
            accepted: failures.is_empty(),
            failures: failures.into_iter().collect(),
        }
    }

    pub fn failed(&self, p: Predicate) -> bool {
        self.failures.contains(&p)
    }
}

/// Evaluates every applicable predicate at one node. No short-circuiting:
/// the verdict lists each failed predicate.
pub fn verify_node(snap: &NeighborhoodSnapshot<'_>, mode: VerifyMode) -> Verdict {
    let m = compute_macros(snap);
    let own = snap.own;
    let me = own.interval();
    let mut fail = BTreeSet::new();
    let mut check = |ok: bool, p: Predicate| {
        if !ok {
            fail.insert(p);
        }
    };

    if snap.is_root {
        check(own.parent_port.is_none(), Predicate::R1);
        check(m.anc.is_empty(), Predicate::R2);
    } else {
        check(own.parent_port.is_some(), Predicate::N1);
        check(!m.anc.is_empty(), Predicate::N2);
        check(
            m.parent.is_some() && own.parent_port == m.parent,
            Predicate::N3,
        );
        let parent_iv = own.parent_port.and_then(|p| snap.interval_at(p));
        check(included(me, parent_iv), Predicate::N4);
        check(
            m.anc
                .iter()
                .filter(|&&u| Some(u) != own.parent_port)
                .all(|&u| included(parent_iv, snap.interval_at(u))),
            Predicate::N5,
        );
    }

    let in_v = own.in_label;
    let out_v = own.out_label;
    check(
        matches!((in_v, out_v), (Some(i), Some(o)) if o > i),
        Predicate::A1,
    );
    check(
        (0..snap.degree()).all(|p| {
            let iv = snap.interval_at(p);
            included(iv, me) || included(me, iv)
        }),
        Predicate::A2,
    );

    let in_at = |p: Port| snap.interval_at(p).map(|i| i.enter);
    let out_at = |p: Port| snap.interval_at(p).map(|i| i.exit);

    if m.children.is_empty() {
        check(
            matches!((in_v, out_v), (Some(i), Some(o)) if o == i.saturating_add(1)),
            Predicate::A3,
        );
    } else {
        let first = m.children_by_label[0];
        let last = *m.children_by_label.last().expect("nonempty");
        let first_ok =
            matches!((in_at(first), in_v), (Some(c), Some(i)) if c == i.saturating_add(1));
        let last_ok =
            matches!((out_v, out_at(last)), (Some(o), Some(c)) if o == c.saturating_add(1));
        check(first_ok && last_ok, Predicate::A4);
    }

    if mode == VerifyMode::FirstDfs {
        if m.children.len() > 1 {
            check(m.children_by_label == m.children_by_port, Predicate::A5);
        }
        let desc_only: Vec<Port> = m
            .desc
            .iter()
            .copied()
            .filter(|p| !m.children.contains(p))
            .collect();
        let ordered = m.children.iter().all(|&u| {
            desc_only.iter().all(|&w| match (in_at(u), in_at(w)) {
                (Some(iu), Some(iw)) if iu < iw => u < w,
                _ => true,
            })
        });
        check(ordered, Predicate::A6);
    }

    check(
        m.children_by_label
            .windows(2)
            .all(|pair| match (in_at(pair[0]), in_at(pair[1])) {
                (Some(iu), Some(iw)) if iu < iw => {
                    out_at(pair[0]).is_some_and(|o| iw == o.saturating_add(1))
                }
                _ => true,
            }),
        Predicate::A7,
    );

    Verdict::from_failures(snap.node, fail)
}

/// Verdicts for every node, each computed against the same global snapshot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerdictMap {
    pub verdicts: Vec<Verdict>,
}

impl VerdictMap {
    pub fn accepted(&self) -> bool {
        self.verdicts.iter().all(|v| v.accepted)
    }

    pub fn detecting_nodes(&self) -> Vec<NodeId> {
        self.verdicts
            .iter()
            .filter(|v| !v.accepted)
            .map(|v| v.id)
            .collect()
    }

    pub fn get(&self, v: NodeId) -> &Verdict {
        &self.verdicts[v]
    }
}

pub fn verify_all(graph: &PortGraph, config: &Configuration, mode: VerifyMode) -> VerdictMap {
    let verdicts = graph
        .nodes()
        .map(|v| verify_node(&NeighborhoodSnapshot::capture(graph, config, v), mode))
        .collect();
    VerdictMap { verdicts }
}
