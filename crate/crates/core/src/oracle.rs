//! Sequential ground truth: the reference first-DFS marker and an
//! independent exhaustive lexicographic-path oracle.

use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{NodeId, PathString, Port, PortGraph};
use crate::registers::Label;

/// Default cap on graph size for exhaustive path enumeration.
pub const ENUMERATION_CAP: usize = 12;

/// `(in, out)` DFS interval: discovery and finish times.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Interval {
    pub enter: Label,
    pub exit: Label,
}

impl Interval {
    pub const fn new(enter: Label, exit: Label) -> Self {
        Self { enter, exit }
    }

    pub fn shifted(self, by: Label) -> Self {
        Self::new(self.enter.saturating_add(by), self.exit.saturating_add(by))
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{}]", self.enter, self.exit)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct NodeLabel {
    pub parent_port: Option<Port>,
    pub interval: Option<Interval>,
}

/// Parent pointers plus intervals for every node.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct LabeledConfiguration {
    pub nodes: Vec<NodeLabel>,
}

impl LabeledConfiguration {
    /// Parent node ids, resolved through `graph`'s ports. Dangling ports map
    /// to `None`.
    pub fn parent_nodes(&self, graph: &PortGraph) -> Vec<Option<NodeId>> {
        self.nodes
            .iter()
            .enumerate()
            .map(|(v, l)| l.parent_port.and_then(|p| graph.neighbor(v, p)))
            .collect()
    }

    pub fn intervals(&self) -> Vec<Option<Interval>> {
        self.nodes.iter().map(|l| l.interval).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("exhaustive enumeration capped at {cap} nodes, graph has {n}")]
    CapExceeded { n: usize, cap: usize },
    #[error("path set is inconsistent at node {node}")]
    InconsistentPaths { node: NodeId },
    #[error("node {node} has no interval")]
    MissingLabel { node: NodeId },
}

/// Reference marker: DFS from the root that always explores the unvisited
/// neighbor with the smallest port. One counter, starting at 1, stamps each
/// discovery and each finish.
pub fn first_dfs_mark(graph: &PortGraph) -> LabeledConfiguration {
    dfs_mark_by(graph, |_, ports| ports.to_vec())
}

/// Marker for an arbitrary (not necessarily first) DFS: each node explores
/// its ports in a random order. Used to produce plausible corruptions.
pub fn random_dfs_mark<R: Rng>(graph: &PortGraph, rng: &mut R) -> LabeledConfiguration {
    let orders: Vec<Vec<Port>> = graph
        .nodes()
        .map(|v| {
            let mut p: Vec<Port> = (0..graph.degree(v)).collect();
            p.shuffle(rng);
            p
        })
        .collect();
    dfs_mark_by(graph, |v, _| orders[v].clone())
}

fn dfs_mark_by<F>(graph: &PortGraph, order: F) -> LabeledConfiguration
where
    F: Fn(NodeId, &[Port]) -> Vec<Port>,
{
    let n = graph.node_count();
    let mut nodes = vec![NodeLabel::default(); n];
    let mut enter: Vec<Option<Label>> = vec![None; n];
    let mut clock: Label = 1;
    let natural: Vec<Vec<Port>> = graph
        .nodes()
        .map(|v| (0..graph.degree(v)).collect())
        .collect();

    // (node, exploration order, next index into that order)
    let root = graph.root();
    enter[root] = Some(clock);
    let mut stack = vec![(root, order(root, &natural[root]), 0usize)];
    while let Some((v, ports, next)) = stack.last_mut() {
        let v = *v;
        if let Some(&p) = ports.get(*next) {
            *next += 1;
            let u = graph.neighbors(v)[p];
            if enter[u].is_none() {
                clock += 1;
                enter[u] = Some(clock);
                nodes[u].parent_port = Some(graph.back_port(v, p));
                let o = order(u, &natural[u]);
                stack.push((u, o, 0));
            }
        } else {
            clock += 1;
            let start = enter[v].expect("stacked nodes are discovered");
            nodes[v].interval = Some(Interval::new(start, clock));
            stack.pop();
        }
    }
    LabeledConfiguration { nodes }
}

/// For every node, the ≺-smallest of all simple root paths, found by
/// enumerating every simple path from the root.
pub fn lex_smallest_paths(graph: &PortGraph) -> Result<Vec<PathString>, OracleError> {
    lex_smallest_paths_capped(graph, ENUMERATION_CAP)
}

pub fn lex_smallest_paths_capped(
    graph: &PortGraph,
    cap: usize,
) -> Result<Vec<PathString>, OracleError> {
    let n = graph.node_count();
    if n > cap {
        return Err(OracleError::CapExceeded { n, cap });
    }
    let mut best: Vec<Option<PathString>> = vec![None; n];
    let mut on_path = vec![false; n];
    let mut path = PathString::bottom();
    enumerate(graph, graph.root(), &mut on_path, &mut path, &mut best);
    Ok(best
        .into_iter()
        .map(|p| p.expect("connected graph reaches every node"))
        .collect())
}

fn enumerate(
    graph: &PortGraph,
    at: NodeId,
    on_path: &mut [bool],
    path: &mut PathString,
    best: &mut [Option<PathString>],
) {
    if best[at].as_ref().is_none_or(|b| &*path < b) {
        best[at] = Some(path.clone());
    }
    on_path[at] = true;
    for (p, &u) in graph.neighbors(at).iter().enumerate() {
        if !on_path[u] {
            path.0.push(p);
            enumerate(graph, u, on_path, path, best);
            path.0.pop();
        }
    }
    on_path[at] = false;
}

/// Parent of each node = its predecessor on its path. The root maps to
/// `None`.
pub fn tree_from_paths(
    paths: &[PathString],
    graph: &PortGraph,
) -> Result<Vec<Option<NodeId>>, OracleError> {
    let mut parents = vec![None; graph.node_count()];
    for (v, path) in paths.iter().enumerate() {
        let walk = path
            .walk(graph)
            .ok_or(OracleError::InconsistentPaths { node: v })?;
        if walk.last() != Some(&v) {
            return Err(OracleError::InconsistentPaths { node: v });
        }
        if walk.len() >= 2 {
            let pred = walk[walk.len() - 2];
            // The predecessor's own path must be this one minus the last hop.
            let prefix = &path.ports()[..path.ports().len() - 1];
            if paths.get(pred).map(PathString::ports) != Some(prefix) {
                return Err(OracleError::InconsistentPaths { node: v });
            }
            parents[v] = Some(pred);
        }
    }
    Ok(parents)
}

/// Translates all labels uniformly so the root enters at 1.
pub fn canonical_shift(
    config: &LabeledConfiguration,
    root: NodeId,
) -> Result<LabeledConfiguration, OracleError> {
    let root_in = config
        .nodes
        .get(root)
        .and_then(|l| l.interval)
        .ok_or(OracleError::MissingLabel { node: root })?
        .enter;
    let by = 1i64.saturating_sub(root_in);
    let mut nodes = Vec::with_capacity(config.nodes.len());
    for (v, l) in config.nodes.iter().enumerate() {
        let interval = l.interval.ok_or(OracleError::MissingLabel { node: v })?;
        nodes.push(NodeLabel {
            parent_port: l.parent_port,
            interval: Some(interval.shifted(by)),
        });
    }
    Ok(LabeledConfiguration { nodes })
}

/// Whether two configurations differ only by a uniform translation of every
/// label. Configurations with missing labels are never shift-equivalent.
pub fn shift_equivalent(a: &LabeledConfiguration, b: &LabeledConfiguration, root: NodeId) -> bool {
    match (canonical_shift(a, root), canonical_shift(b, root)) {
        (Ok(x), Ok(y)) => x == y,
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate, GraphKind};

    fn path3() -> PortGraph {
        PortGraph::new(0, vec![vec![1], vec![0, 2], vec![1]]).unwrap()
    }

    fn k3() -> PortGraph {
        PortGraph::new(0, vec![vec![1, 2], vec![0, 2], vec![0, 1]]).unwrap()
    }

    fn intervals(c: &LabeledConfiguration) -> Vec<(Label, Label)> {
        c.nodes
            .iter()
            .map(|l| l.interval.map(|i| (i.enter, i.exit)).unwrap())
            .collect()
    }

    #[test]
    fn marks_three_node_path() {
        let g = path3();
        let m = first_dfs_mark(&g);
        assert_eq!(intervals(&m), vec![(1, 6), (2, 5), (3, 4)]);
        assert_eq!(m.parent_nodes(&g), vec![None, Some(0), Some(1)]);
    }

    #[test]
    fn marks_triangle_through_a() {
        let g = k3();
        let m = first_dfs_mark(&g);
        assert_eq!(intervals(&m), vec![(1, 6), (2, 5), (3, 4)]);
        assert_eq!(m.parent_nodes(&g), vec![None, Some(0), Some(1)]);
        // b's parent port at b points at a (port 1 in α_b = [r, a])
        assert_eq!(m.nodes[2].parent_port, Some(1));
    }

    #[test]
    fn marks_single_node() {
        let g = PortGraph::new(0, vec![vec![]]).unwrap();
        let m = first_dfs_mark(&g);
        assert_eq!(intervals(&m), vec![(1, 2)]);
        assert_eq!(m.nodes[0].parent_port, None);
    }

    #[test]
    fn smallest_paths_triangle() {
        let g = k3();
        let paths = lex_smallest_paths(&g).unwrap();
        assert_eq!(paths[0], PathString::bottom());
        assert_eq!(paths[1], PathString(vec![0]));
        // via a beats the direct edge: (⊥,0,1) ≺ (⊥,1)
        assert_eq!(paths[2], PathString(vec![0, 1]));
        assert_eq!(
            tree_from_paths(&paths, &g).unwrap(),
            vec![None, Some(0), Some(1)]
        );
    }

    #[test]
    fn smallest_paths_path_graph() {
        let g = path3();
        let paths = lex_smallest_paths(&g).unwrap();
        assert_eq!(paths[2], PathString(vec![0, 1]));
        assert_eq!(
            tree_from_paths(&paths, &g).unwrap(),
            vec![None, Some(0), Some(1)]
        );
    }

    #[test]
    fn single_node_paths() {
        let g = PortGraph::new(0, vec![vec![]]).unwrap();
        let paths = lex_smallest_paths(&g).unwrap();
        assert_eq!(paths, vec![PathString::bottom()]);
        assert_eq!(tree_from_paths(&paths, &g).unwrap(), vec![None]);
    }

    #[test]
    fn enumeration_cap_enforced() {
        let g = generate(GraphKind::Path, 13, 0).unwrap();
        assert_eq!(
            lex_smallest_paths(&g).unwrap_err(),
            OracleError::CapExceeded { n: 13, cap: 12 }
        );
    }

    #[test]
    fn inconsistent_paths_rejected() {
        let g = k3();
        // b claims the direct edge, but a's path is not a prefix of it
        let bad = vec![
            PathString::bottom(),
            PathString(vec![0]),
            PathString(vec![0, 0]),
        ];
        assert!(tree_from_paths(&bad, &g).is_err());
    }

    #[test]
    fn shift_normalization() {
        let mk = |v: &[(Label, Label)]| LabeledConfiguration {
            nodes: v
                .iter()
                .map(|&(a, b)| NodeLabel {
                    parent_port: None,
                    interval: Some(Interval::new(a, b)),
                })
                .collect(),
        };
        let shifted = mk(&[(6, 11), (7, 10), (8, 9)]);
        assert_eq!(
            canonical_shift(&shifted, 0).unwrap(),
            mk(&[(1, 6), (2, 5), (3, 4)])
        );
        let canon = mk(&[(1, 6), (2, 5), (3, 4)]);
        assert_eq!(canonical_shift(&canon, 0).unwrap(), canon);
        assert_eq!(canonical_shift(&mk(&[(4, 5)]), 0).unwrap(), mk(&[(1, 2)]));

        let mut missing = canon.clone();
        missing.nodes[1].interval = None;
        assert_eq!(
            canonical_shift(&missing, 0).unwrap_err(),
            OracleError::MissingLabel { node: 1 }
        );
    }
}
