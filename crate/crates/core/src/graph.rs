//! Port-ordered undirected graphs with a distinguished root.

use std::cmp::Ordering;
use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type NodeId = usize;
/// Position of an edge in a node's port ordering, 0-indexed.
pub type Port = usize;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("graph must have at least one node")]
    Empty,
    #[error("root {root} out of range for {n} nodes")]
    RootOutOfRange { root: NodeId, n: usize },
    #[error("expected {expected} port lists, found {found}")]
    PortListCount { expected: usize, found: usize },
    #[error("node {node} lists neighbor {neighbor}, which is out of range")]
    NeighborOutOfRange { node: NodeId, neighbor: NodeId },
    #[error("node {node} has a self-loop")]
    SelfLoop { node: NodeId },
    #[error("node {node} lists neighbor {neighbor} more than once")]
    DuplicatePort { node: NodeId, neighbor: NodeId },
    #[error("edge {node} -> {neighbor} has no reverse entry")]
    Asymmetric { node: NodeId, neighbor: NodeId },
    #[error("graph is disconnected: node {unreached} not reachable from root")]
    Disconnected { unreached: NodeId },
    #[error("node count must be positive")]
    ZeroNodes,
}

/// Immutable connected undirected graph. `ports[v][p]` is the neighbor of
/// `v` behind port `p`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PortGraph {
    root: NodeId,
    ports: Vec<Vec<NodeId>>,
    // back[v][p] = port number of v in the port list of ports[v][p]
    back: Vec<Vec<Port>>,
    diameter: usize,
}

impl PortGraph {
    pub fn new(root: NodeId, ports: Vec<Vec<NodeId>>) -> Result<Self, GraphError> {
        let n = ports.len();
        if n == 0 {
            return Err(GraphError::Empty);
        }
        if root >= n {
            return Err(GraphError::RootOutOfRange { root, n });
        }
        for (v, list) in ports.iter().enumerate() {
            let mut seen = BTreeSet::new();
            for &u in list {
                if u >= n {
                    return Err(GraphError::NeighborOutOfRange {
                        node: v,
                        neighbor: u,
                    });
                }
                if u == v {
                    return Err(GraphError::SelfLoop { node: v });
                }
                if !seen.insert(u) {
                    return Err(GraphError::DuplicatePort {
                        node: v,
                        neighbor: u,
                    });
                }
            }
        }
        let mut back = Vec::with_capacity(n);
        for (v, list) in ports.iter().enumerate() {
            let mut row = Vec::with_capacity(list.len());
            for &u in list {
                match ports[u].iter().position(|&w| w == v) {
                    Some(p) => row.push(p),
                    None => {
                        return Err(GraphError::Asymmetric {
                            node: v,
                            neighbor: u,
                        })
                    }
                }
            }
            back.push(row);
        }
        let dist = bfs_distances(&ports, root);
        if let Some(unreached) = dist.iter().position(|d| d.is_none()) {
            return Err(GraphError::Disconnected { unreached });
        }
        let diameter = (0..n)
            .map(|s| {
                bfs_distances(&ports, s)
                    .into_iter()
                    .map(|d| d.unwrap_or(0))
                    .max()
                    .unwrap_or(0)
            })
            .max()
            .unwrap_or(0);
        Ok(Self {
            root,
            ports,
            back,
            diameter,
        })
    }

    /// Builds a graph from an undirected edge list. Each node's ports follow
    /// the order in which its edges appear.
    pub fn from_edges(
        n: usize,
        root: NodeId,
        edges: &[(NodeId, NodeId)],
    ) -> Result<Self, GraphError> {
        let mut ports = vec![Vec::new(); n];
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(GraphError::NeighborOutOfRange {
                    node: u.min(v),
                    neighbor: u.max(v),
                });
            }
            ports[u].push(v);
            ports[v].push(u);
        }
        Self::new(root, ports)
    }

    pub fn node_count(&self) -> usize {
        self.ports.len()
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn is_root(&self, v: NodeId) -> bool {
        v == self.root
    }

    pub fn nodes(&self) -> std::ops::Range<NodeId> {
        0..self.ports.len()
    }

    pub fn ports(&self) -> &[Vec<NodeId>] {
        &self.ports
    }

    /// Neighbors of `v` in port order.
    pub fn neighbors(&self, v: NodeId) -> &[NodeId] {
        &self.ports[v]
    }

    pub fn degree(&self, v: NodeId) -> usize {
        self.ports[v].len()
    }

    pub fn neighbor(&self, v: NodeId, port: Port) -> Option<NodeId> {
        self.ports[v].get(port).copied()
    }

    /// Port number of `v` as seen from the neighbor behind `port`.
    pub fn back_port(&self, v: NodeId, port: Port) -> Port {
        self.back[v][port]
    }

    /// α_v(u): the port of `v` leading to `u`.
    pub fn port_to(&self, v: NodeId, u: NodeId) -> Option<Port> {
        self.ports[v].iter().position(|&w| w == u)
    }

    pub fn max_degree(&self) -> usize {
        self.ports.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn edge_count(&self) -> usize {
        self.ports.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Undirected edges with `u < v`, sorted.
    pub fn edges(&self) -> Vec<(NodeId, NodeId)> {
        let mut out: Vec<_> = self
            .nodes()
            .flat_map(|v| {
                self.ports[v]
                    .iter()
                    .filter(move |&&u| v < u)
                    .map(move |&u| (v, u))
            })
            .collect();
        out.sort_unstable();
        out
    }

    /// Diameter, computed once at construction. Metrics only.
    pub fn diameter(&self) -> usize {
        self.diameter
    }
}

fn bfs_distances(ports: &[Vec<NodeId>], source: NodeId) -> Vec<Option<usize>> {
    let mut dist = vec![None; ports.len()];
    dist[source] = Some(0);
    let mut queue = VecDeque::from([source]);
    while let Some(v) = queue.pop_front() {
        let d = dist[v].unwrap_or(0);
        for &u in &ports[v] {
            if u < ports.len() && dist[u].is_none() {
                dist[u] = Some(d + 1);
                queue.push_back(u);
            }
        }
    }
    dist
}

/// A root path written as ⊥ followed by the outgoing port numbers along the
/// path. Only the ports are stored; ⊥ is implicit at position 0.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct PathString(pub Vec<Port>);

impl PathString {
    pub fn bottom() -> Self {
        Self(Vec::new())
    }

    pub fn extended(&self, port: Port) -> Self {
        let mut ports = self.0.clone();
        ports.push(port);
        Self(ports)
    }

    pub fn ports(&self) -> &[Port] {
        &self.0
    }

    /// Nodes visited when walking this path from `graph`'s root, root first.
    /// `None` if some port is invalid.
    pub fn walk(&self, graph: &PortGraph) -> Option<Vec<NodeId>> {
        let mut at = graph.root();
        let mut nodes = vec![at];
        for &p in &self.0 {
            at = graph.neighbor(at, p)?;
            nodes.push(at);
        }
        Some(nodes)
    }
}

impl fmt::Display for PathString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(⊥")?;
        for p in &self.0 {
            write!(f, ",{p}")?;
        }
        write!(f, ")")
    }
}

/// Lexicographic order on path strings: ⊥ is the minimum symbol, ports
/// compare numerically, and a strict prefix is smaller.
pub fn path_compare(p: &PathString, q: &PathString) -> Ordering {
    for (a, b) in p.0.iter().zip(q.0.iter()) {
        match a.cmp(b) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    p.0.len().cmp(&q.0.len())
}

impl PartialOrd for PathString {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for PathString {
    fn cmp(&self, other: &Self) -> Ordering {
        path_compare(self, other)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphKind {
    Path,
    Ring,
    Complete,
    RandomConnected,
    RandomTreePlusChords,
}

impl GraphKind {
    pub const ALL: [GraphKind; 5] = [
        GraphKind::Path,
        GraphKind::Ring,
        GraphKind::Complete,
        GraphKind::RandomConnected,
        GraphKind::RandomTreePlusChords,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GraphKind::Path => "path",
            GraphKind::Ring => "ring",
            GraphKind::Complete => "complete",
            GraphKind::RandomConnected => "random_connected",
            GraphKind::RandomTreePlusChords => "random_tree_plus_chords",
        }
    }
}

impl fmt::Display for GraphKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GraphKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.replace('-', "_");
        GraphKind::ALL
            .into_iter()
            .find(|k| k.name() == norm)
            .ok_or_else(|| format!("unknown graph kind `{s}`"))
    }
}

/// How generators order each node's ports.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PortOrder {
    /// Seeded random permutation per node.
    #[default]
    Shuffled,
    /// Ascending neighbor id.
    Sorted,
}

/// Deterministic graph generation. Ports are shuffled with the same seed.
pub fn generate(kind: GraphKind, n: usize, seed: u64) -> Result<PortGraph, GraphError> {
    generate_with(kind, n, seed, PortOrder::Shuffled)
}

pub fn generate_with(
    kind: GraphKind,
    n: usize,
    seed: u64,
    order: PortOrder,
) -> Result<PortGraph, GraphError> {
    if n == 0 {
        return Err(GraphError::ZeroNodes);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ u64_mix(kind));
    let edges: Vec<(NodeId, NodeId)> = match kind {
        GraphKind::Path => (1..n).map(|i| (i - 1, i)).collect(),
        GraphKind::Ring => {
            let mut e: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
            if n >= 3 {
                e.push((n - 1, 0));
            }
            e
        }
        GraphKind::Complete => (0..n)
            .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
            .collect(),
        GraphKind::RandomConnected => {
            let mut e = random_tree(n, &mut rng);
            let p = (2.0 / n as f64).min(1.0);
            let tree: BTreeSet<_> = e.iter().map(|&(u, v)| (u.min(v), u.max(v))).collect();
            for u in 0..n {
                for v in u + 1..n {
                    if !tree.contains(&(u, v)) && rng.gen_bool(p) {
                        e.push((u, v));
                    }
                }
            }
            e
        }
        GraphKind::RandomTreePlusChords => {
            let mut e = random_tree(n, &mut rng);
            let mut present: BTreeSet<_> = e.iter().map(|&(u, v)| (u.min(v), u.max(v))).collect();
            let max_edges = n * (n - 1) / 2;
            let target = (present.len() + n / 2).min(max_edges);
            while present.len() < target {
                let u = rng.gen_range(0..n);
                let v = rng.gen_range(0..n);
                if u != v && present.insert((u.min(v), u.max(v))) {
                    e.push((u, v));
                }
            }
            e
        }
    };
    let mut ports = vec![Vec::new(); n];
    for (u, v) in edges {
        ports[u].push(v);
        ports[v].push(u);
    }
    for list in ports.iter_mut() {
        list.sort_unstable();
        if order == PortOrder::Shuffled {
            list.shuffle(&mut rng);
        }
    }
    PortGraph::new(0, ports)
}

// Distinct RNG streams per kind so that e.g. (ring, 8, 1) and (path, 8, 1)
// don't share port shuffles.
const fn u64_mix(kind: GraphKind) -> u64 {
    match kind {
        GraphKind::Path => 0x9e37_79b9_7f4a_7c15,
        GraphKind::Ring => 0xbf58_476d_1ce4_e5b9,
        GraphKind::Complete => 0x94d0_49bb_1331_11eb,
        GraphKind::RandomConnected => 0x2545_f491_4f6c_dd1d,
        GraphKind::RandomTreePlusChords => 0x6a09_e667_f3bc_c909,
    }
}

/// Uniform random attachment tree over a random relabeling of `0..n`.
fn random_tree(n: usize, rng: &mut ChaCha8Rng) -> Vec<(NodeId, NodeId)> {
    let mut order: Vec<NodeId> = (0..n).collect();
    order.shuffle(rng);
    (1..n)
        .map(|i| (order[rng.gen_range(0..i)], order[i]))
        .collect()
}

/// Every connected labeled graph on `n` nodes (root 0, ports sorted by
/// neighbor id). Only sensible for tiny `n`; 6 nodes yields 26 704 graphs.
pub fn all_connected_graphs(n: usize) -> Vec<PortGraph> {
    assert!(
        (1..=7).contains(&n),
        "exhaustive enumeration is limited to n <= 7"
    );
    let pairs: Vec<(NodeId, NodeId)> = (0..n)
        .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
        .collect();
    let mut out = Vec::new();
    for mask in 0u64..(1u64 << pairs.len()) {
        let mut ports = vec![Vec::new(); n];
        for (i, &(u, v)) in pairs.iter().enumerate() {
            if mask >> i & 1 == 1 {
                ports[u].push(v);
                ports[v].push(u);
            }
        }
        if bfs_distances(&ports, 0).iter().all(Option::is_some) {
            for list in ports.iter_mut() {
                list.sort_unstable();
            }
            out.push(PortGraph::new(0, ports).expect("enumerated graph is valid"));
        }
    }
    out
}
