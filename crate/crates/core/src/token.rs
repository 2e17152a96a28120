//! DFS-order token circulation on top of the stabilized tree.
//!
//! Each node keeps a parity bit and a cursor into its children (ordered by
//! `in` label). A node is *served* when its parent's cursor points at it. The
//! token sits wherever a move is enabled:
//!
//! * the root flips its parity and points at its first child once its cursor
//!   is empty or its last child is done;
//! * a served node whose parity differs from its parent's adopts the parent's
//!   parity and points at its own first child (this is the node's first
//!   receipt in the cycle);
//! * a served node whose current child is done (same parity, empty cursor)
//!   advances to the next child, or empties its cursor after the last one,
//!   which hands the token back up.
//!
//! In a legal state exactly one move is enabled. Any other token state still
//! has at least one, and spurious ones die out inside their subtree because
//! an unserved node never advances. The layer only runs where the tree layer
//! is at rest and locally accepted; everywhere else token registers are held
//! empty, so after a tree rebuild the root regenerates a single token.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::graph::{NodeId, Port, PortGraph};
use crate::oracle::first_dfs_mark;
use crate::registers::{Configuration, Phase};
use crate::stabilizer::{
    legal_configuration, Corruption, DaemonSchedule, InjectError, SimError, Simulator,
};
use crate::verifier::{compute_macros, verify_node, NeighborhoodSnapshot, VerifyMode};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TokenRegisters {
    pub cycle_parity: bool,
    /// Port of the child currently being served.
    pub token_cursor: Option<Port>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenAction {
    /// Root starts a new cycle.
    Flip,
    /// First receipt of the token in this cycle.
    Adopt,
    /// Move on to the next child, or give the token back.
    Advance,
    /// Drop a cursor that does not name a child. Not a token move.
    Repair,
    /// Tree layer not at rest here: hold the registers empty.
    Quiesce,
}

impl TokenAction {
    pub fn is_token_move(self) -> bool {
        matches!(
            self,
            TokenAction::Flip | TokenAction::Adopt | TokenAction::Advance
        )
    }
}

impl fmt::Display for TokenAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TokenAction::Flip => "flip",
            TokenAction::Adopt => "adopt",
            TokenAction::Advance => "advance",
            TokenAction::Repair => "repair",
            TokenAction::Quiesce => "quiesce",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenStep {
    pub next: TokenRegisters,
    pub action: Option<TokenAction>,
}

/// Tree-layer snapshot plus the token registers of the node and its
/// neighbors (port order).
#[derive(Debug, Clone)]
pub struct TokenSnapshot<'a> {
    pub tree: NeighborhoodSnapshot<'a>,
    pub own: TokenRegisters,
    pub neighbors: Vec<TokenRegisters>,
}

impl<'a> TokenSnapshot<'a> {
    pub fn capture(
        graph: &PortGraph,
        tree: &'a Configuration,
        tokens: &[TokenRegisters],
        v: NodeId,
    ) -> Self {
        Self {
            tree: NeighborhoodSnapshot::capture(graph, tree, v),
            own: tokens[v],
            neighbors: graph.neighbors(v).iter().map(|&u| tokens[u]).collect(),
        }
    }
}

fn gate_open(tree: &NeighborhoodSnapshot<'_>) -> bool {
    tree.own.phase == Phase::Verify
        && tree.own.scratch.is_clear()
        && verify_node(tree, VerifyMode::FirstDfs).accepted
}

fn step(own: TokenRegisters, action: TokenAction, next: TokenRegisters) -> TokenStep {
    TokenStep {
        next,
        action: (next != own || action.is_token_move()).then_some(action),
    }
}

pub fn token_step(snap: &TokenSnapshot<'_>) -> TokenStep {
    let own = snap.own;
    let idle = TokenStep {
        next: own,
        action: None,
    };
    if !gate_open(&snap.tree) {
        return step(own, TokenAction::Quiesce, TokenRegisters::default());
    }
    let children = compute_macros(&snap.tree).children_by_label;
    let cursor = own.token_cursor.filter(|c| children.contains(c));
    let after = |c: Port| children.iter().skip_while(|&&x| x != c).nth(1).copied();
    let done = |c: Port| {
        let t = snap.neighbors[c];
        t.cycle_parity == own.cycle_parity && t.token_cursor.is_none()
    };
    let flip = TokenRegisters {
        cycle_parity: !own.cycle_parity,
        token_cursor: children.first().copied(),
    };
    let repair = || {
        if cursor != own.token_cursor {
            step(
                own,
                TokenAction::Repair,
                TokenRegisters {
                    token_cursor: cursor,
                    ..own
                },
            )
        } else {
            idle.clone()
        }
    };

    if snap.tree.is_root {
        return match cursor {
            None => step(own, TokenAction::Flip, flip),
            Some(c) if done(c) => match after(c) {
                Some(nx) => step(
                    own,
                    TokenAction::Advance,
                    TokenRegisters {
                        token_cursor: Some(nx),
                        ..own
                    },
                ),
                None => step(own, TokenAction::Flip, flip),
            },
            Some(_) => idle,
        };
    }

    let Some(pp) = snap.tree.own.parent_port else {
        return idle;
    };
    let (Some(parent), Some(view)) = (snap.neighbors.get(pp), snap.tree.neighbor(pp)) else {
        return idle;
    };
    let served = parent.token_cursor == Some(view.back_port);
    if !served {
        return repair();
    }
    if own.cycle_parity != parent.cycle_parity {
        let adopted = TokenRegisters {
            cycle_parity: parent.cycle_parity,
            token_cursor: children.first().copied(),
        };
        return step(own, TokenAction::Adopt, adopted);
    }
    match cursor {
        Some(c) if done(c) => step(
            own,
            TokenAction::Advance,
            TokenRegisters {
                token_cursor: after(c),
                ..own
            },
        ),
        _ => repair(),
    }
}

/// Nodes with an enabled token move.
pub fn token_holders(
    graph: &PortGraph,
    tree: &Configuration,
    tokens: &[TokenRegisters],
) -> Vec<NodeId> {
    graph
        .nodes()
        .filter(|&v| {
            token_step(&TokenSnapshot::capture(graph, tree, tokens, v))
                .action
                .is_some_and(TokenAction::is_token_move)
        })
        .collect()
}

/// Registers of a token sitting at the root about to start a cycle.
pub fn initial_tokens(n: usize) -> Vec<TokenRegisters> {
    vec![TokenRegisters::default(); n]
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Fault {
    /// Overwrite tree-layer registers.
    Tree { corruptions: Vec<Corruption> },
    /// Enable a second token at `node` by pointing its parent at it with the
    /// opposite parity.
    DuplicateToken { node: NodeId },
    /// Clear the token registers of every current holder.
    DeleteToken,
    /// Random parity and cursor at every node.
    TokenGarbage { seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduledFault {
    /// Applied just before this round runs.
    pub round: usize,
    pub fault: Fault,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeStart {
    #[default]
    Legal,
    Null,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CirculationOptions {
    pub rounds: usize,
    pub schedule: DaemonSchedule,
    pub tree_start: TreeStart,
    pub faults: Vec<ScheduledFault>,
}

impl CirculationOptions {
    pub fn new(rounds: usize) -> Self {
        Self {
            rounds,
            schedule: DaemonSchedule::synchronous(),
            tree_start: TreeStart::Legal,
            faults: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CycleRecord {
    pub start_round: usize,
    /// Node ids in order of first receipt, starting with the root.
    pub order: Vec<NodeId>,
    /// Closed by the next root flip.
    pub complete: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CirculationTrace {
    pub n: usize,
    pub cycles: Vec<CycleRecord>,
    /// Token holders after each round.
    pub holder_counts: Vec<usize>,
    /// Tree-layer register writes per round.
    pub tree_writes: Vec<usize>,
    /// Token-layer register writes per round.
    pub token_writes: Vec<usize>,
    /// First-receipt order prescribed by the first-DFS labeling.
    pub expected_order: Vec<NodeId>,
}

impl CirculationTrace {
    /// Rounds (1-based) after which the holder count stays at exactly one.
    pub fn single_token_from(&self) -> Option<usize> {
        let last_bad = self.holder_counts.iter().rposition(|&c| c != 1);
        match last_bad {
            None => Some(0),
            Some(i) if i + 1 < self.holder_counts.len() => Some(i + 1),
            Some(_) => None,
        }
    }

    /// Start round of the earliest cycle from which the run is legitimate:
    /// exactly one holder after every later round, and every later complete
    /// cycle visits nodes in the expected order. `None` if no complete cycle
    /// qualifies.
    pub fn legitimate_from(&self) -> Option<usize> {
        let single = self.single_token_from()?;
        let mut candidate = None;
        for c in self.cycles.iter().rev() {
            if c.complete && c.order != self.expected_order {
                break;
            }
            if c.start_round > single {
                candidate = Some(c);
            }
        }
        candidate.filter(|c| c.complete).map(|c| c.start_round)
    }

    /// Complete cycles that started after `round`.
    pub fn cycles_after(&self, round: usize) -> impl Iterator<Item = &CycleRecord> {
        self.cycles
            .iter()
            .filter(move |c| c.complete && c.start_round > round)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CirculationError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Inject(#[from] InjectError),
    #[error("fault names node {node}, network has {n} nodes")]
    UnknownNode { node: NodeId, n: usize },
    #[error("rounds must be positive")]
    ZeroRounds,
}

/// Ascending-`in` order of the first-DFS labeling.
pub fn dfs_discovery_order(graph: &PortGraph) -> Vec<NodeId> {
    let labels = first_dfs_mark(graph);
    let mut order: Vec<NodeId> = graph.nodes().collect();
    order.sort_by_key(|&v| labels.nodes[v].interval.map(|i| i.enter));
    order
}

fn apply_token_fault(
    graph: &PortGraph,
    tree: &Configuration,
    tokens: &mut [TokenRegisters],
    fault: &Fault,
) -> Result<(), CirculationError> {
    let n = graph.node_count();
    match fault {
        Fault::Tree { .. } => {}
        &Fault::DuplicateToken { node } => {
            if node >= n {
                return Err(CirculationError::UnknownNode { node, n });
            }
            match tree[node]
                .parent_port
                .and_then(|p| graph.neighbor(node, p).map(|u| (p, u)))
            {
                Some((p, parent)) if !graph.is_root(node) => {
                    tokens[parent].token_cursor = Some(graph.back_port(node, p));
                    tokens[node].cycle_parity = !tokens[parent].cycle_parity;
                }
                _ => tokens[node].token_cursor = None,
            }
        }
        Fault::DeleteToken => {
            for v in token_holders(graph, tree, tokens) {
                tokens[v] = TokenRegisters::default();
            }
        }
        &Fault::TokenGarbage { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for v in graph.nodes() {
                let deg = graph.degree(v);
                tokens[v] = TokenRegisters {
                    cycle_parity: rng.gen(),
                    token_cursor: (deg > 0 && rng.gen_bool(0.6)).then(|| rng.gen_range(0..deg)),
                };
            }
        }
    }
    Ok(())
}

/// Runs the tree layer and the token layer together; every activated node
/// steps both layers against the same pre-round snapshot.
pub fn run_circulation(
    graph: &PortGraph,
    opts: &CirculationOptions,
) -> Result<CirculationTrace, CirculationError> {
    if opts.rounds == 0 {
        return Err(CirculationError::ZeroRounds);
    }
    let n = graph.node_count();
    let tree = match opts.tree_start {
        TreeStart::Legal => legal_configuration(graph),
        TreeStart::Null => Configuration::null(n),
    };
    let mut sim = Simulator::new(graph, tree, opts.schedule.clone(), None)?;
    let mut tokens = initial_tokens(n);
    let mut trace = CirculationTrace {
        n,
        cycles: Vec::new(),
        holder_counts: Vec::with_capacity(opts.rounds),
        tree_writes: Vec::with_capacity(opts.rounds),
        token_writes: Vec::with_capacity(opts.rounds),
        expected_order: dfs_discovery_order(graph),
    };

    for round in 1..=opts.rounds {
        for f in opts.faults.iter().filter(|f| f.round == round) {
            match &f.fault {
                Fault::Tree { corruptions } => sim.inject(corruptions)?,
                other => apply_token_fault(graph, sim.config(), &mut tokens, other)?,
            }
        }

        let active = sim.next_activation();
        let steps: Vec<(NodeId, TokenStep)> = active
            .iter()
            .map(|&v| {
                (
                    v,
                    token_step(&TokenSnapshot::capture(graph, sim.config(), &tokens, v)),
                )
            })
            .collect();
        let summary = sim.apply_round(&active);

        let mut writes = 0;
        for (v, s) in steps {
            match s.action {
                Some(TokenAction::Flip) if graph.is_root(v) => {
                    if let Some(last) = trace.cycles.last_mut() {
                        last.complete = true;
                    }
                    trace.cycles.push(CycleRecord {
                        start_round: round,
                        order: vec![v],
                        complete: false,
                    });
                }
                Some(TokenAction::Adopt) => {
                    if let Some(last) = trace.cycles.last_mut() {
                        last.order.push(v);
                    }
                }
                _ => {}
            }
            if s.next != tokens[v] {
                writes += 1;
                tokens[v] = s.next;
            }
        }
        trace.tree_writes.push(summary.writers.len());
        trace.token_writes.push(writes);
        trace
            .holder_counts
            .push(token_holders(graph, sim.config(), &tokens).len());
    }
    Ok(trace)
}
