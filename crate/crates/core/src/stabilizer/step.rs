//! One activation of one node.
//!
//! Phases cycle VERIFY → RESET → MARK → VERIFY:
//!
//! * VERIFY: run the local verifier. Accepting writes nothing; rejecting
//!   raises `abort` and clears the labels.
//! * RESET: `abort` floods outwards. The root answers by anchoring a wave
//!   (`dist = 0`) that every aborted or stale node joins at `dist + 1`,
//!   recording the neighbor it joined through. A node turns `ready` once all
//!   its neighbors are in the wave and all wave children are ready; a ready
//!   root starts the marker.
//! * MARK: a single token performs the first DFS, handing itself to the
//!   smallest-port neighbor still in RESET and stamping `in`/`out` from a
//!   counter it carries. Once the root finishes, VERIFY spreads down the tree.
//!
//! Every node also checks that its neighborhood is consistent with that
//! schedule; anything else is treated as a fault and re-raises `abort`. This
//! is what makes arbitrary starting configurations converge.
//!
//! Nodes are assumed to know an upper bound on the network size; it bounds
//! wave distances and labels so stale waves cannot count upwards forever.

use crate::graph::Port;
use crate::registers::{Label, MarkScratch, NodeRegisters, Phase};
use crate::verifier::{verify_node, NeighborView, NeighborhoodSnapshot, VerifyMode};

/// Result of one activation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepOutcome {
    pub next: NodeRegisters,
    /// The node's own checks failed while it was in VERIFY.
    pub detected: bool,
    /// The root anchored a new reset wave.
    pub root_reset: bool,
}

impl StepOutcome {
    fn keep(own: &NodeRegisters) -> Self {
        Self {
            next: own.clone(),
            detected: false,
            root_reset: false,
        }
    }

    fn write(next: NodeRegisters) -> Self {
        Self {
            next,
            detected: false,
            root_reset: false,
        }
    }

    fn detected(mut self) -> Self {
        self.detected = true;
        self
    }
}

/// Next registers for the activated node. Pure function of the snapshot.
pub fn local_step(snap: &NeighborhoodSnapshot<'_>, size_bound: usize) -> NodeRegisters {
    local_step_traced(snap, size_bound).next
}

pub fn local_step_traced(snap: &NeighborhoodSnapshot<'_>, size_bound: usize) -> StepOutcome {
    let ctx = Ctx {
        snap,
        bound: size_bound.max(1),
    };
    match snap.own.phase {
        Phase::Verify => ctx.verify_phase(),
        Phase::Reset => ctx.reset_phase(),
        Phase::Mark => ctx.mark_phase(),
    }
}

fn is_orphan(r: &NodeRegisters) -> bool {
    r.phase == Phase::Reset && (r.scratch.abort || r.scratch.dist.is_none())
}

fn anchored(r: &NodeRegisters) -> Option<(u32, bool)> {
    match (r.phase, r.scratch.abort, r.scratch.dist) {
        (Phase::Reset, false, Some(d)) => Some((d, r.scratch.ready)),
        _ => None,
    }
}

fn orphan_registers() -> NodeRegisters {
    NodeRegisters {
        phase: Phase::Reset,
        scratch: MarkScratch {
            abort: true,
            ..MarkScratch::default()
        },
        ..NodeRegisters::default()
    }
}

fn anchored_registers(parent_port: Option<Port>, dist: u32, ready: bool) -> NodeRegisters {
    NodeRegisters {
        parent_port,
        phase: Phase::Reset,
        scratch: MarkScratch {
            dist: Some(dist),
            ready,
            ..MarkScratch::default()
        },
        ..NodeRegisters::default()
    }
}

fn clean_verify(own: &NodeRegisters) -> NodeRegisters {
    NodeRegisters {
        phase: Phase::Verify,
        scratch: MarkScratch::default(),
        ..own.clone()
    }
}

struct Ctx<'s, 'a> {
    snap: &'s NeighborhoodSnapshot<'a>,
    bound: usize,
}

impl<'s, 'a> Ctx<'s, 'a> {
    fn own(&self) -> &'a NodeRegisters {
        self.snap.own
    }

    fn neighbors(&self) -> &'s [NeighborView<'a>] {
        &self.snap.neighbors
    }

    fn max_label(&self) -> Label {
        2 * self.bound as Label
    }

    fn label_in_range(&self, l: Label) -> bool {
        (1..=self.max_label()).contains(&l)
    }

    /// Raise `abort`; the root instead anchors a fresh wave.
    fn abort(&self) -> StepOutcome {
        if self.snap.is_root {
            StepOutcome {
                next: anchored_registers(None, 0, false),
                detected: false,
                root_reset: true,
            }
        } else {
            StepOutcome::write(orphan_registers())
        }
    }

    fn any_orphan_neighbor(&self) -> bool {
        self.neighbors().iter().any(|n| is_orphan(n.regs))
    }

    /// Closest non-ready wave member, by (dist, port).
    fn joinable(&self) -> Option<(Port, u32)> {
        self.neighbors()
            .iter()
            .filter_map(|n| match anchored(n.regs) {
                Some((d, false)) => Some((d, n.port)),
                _ => None,
            })
            .min()
            .map(|(d, p)| (p, d))
    }

    /// Join the wave through `port`, or abort if that would exceed the
    /// distance bound. The root never joins; it anchors.
    fn join(&self, port: Port, dist: u32) -> StepOutcome {
        let d = dist.saturating_add(1);
        if self.snap.is_root || d as usize >= self.bound {
            self.abort()
        } else {
            StepOutcome::write(anchored_registers(Some(port), d, false))
        }
    }

    fn is_wave_child(&self, n: &NeighborView<'_>, my_dist: u32) -> bool {
        anchored(n.regs).is_some_and(|(d, _)| d == my_dist.saturating_add(1))
            && n.regs.parent_port == Some(n.back_port)
    }

    fn verify_phase(&self) -> StepOutcome {
        let own = self.own();
        if self.any_orphan_neighbor() {
            return self.abort();
        }
        if let Some((port, dist)) = self.joinable() {
            return self.join(port, dist);
        }
        let stale = self.neighbors().iter().any(|n| {
            anchored(n.regs).is_some()
                || (n.regs.phase == Phase::Mark && n.regs.out_label.is_none())
        });
        let verdict = verify_node(self.snap, VerifyMode::FirstDfs);
        let unanchored_root = self.snap.is_root && own.in_label != Some(1);
        if !verdict.accepted || unanchored_root {
            return self.abort().detected();
        }
        if stale {
            return self.abort();
        }
        if !own.scratch.is_clear() {
            return StepOutcome::write(clean_verify(own));
        }
        StepOutcome::keep(own)
    }

    fn reset_phase(&self) -> StepOutcome {
        let own = self.own();
        let Some((dist, ready)) = anchored(own) else {
            // aborted, waiting to be picked up by the root's wave
            if self.snap.is_root {
                return self.abort();
            }
            if let Some((port, d)) = self.joinable() {
                return self.join(port, d);
            }
            let normal = orphan_registers();
            return if *own == normal {
                StepOutcome::keep(own)
            } else {
                StepOutcome::write(normal)
            };
        };

        if self.snap.is_root {
            if *own != anchored_registers(None, 0, false) {
                return self.abort();
            }
            if self.wave_settled(dist) {
                return self.start_marker();
            }
            return StepOutcome::keep(own);
        }

        if dist == 0
            || dist as usize >= self.bound
            || *own != anchored_registers(own.parent_port, dist, ready)
        {
            return self.abort();
        }
        let parent = own.parent_port.and_then(|p| self.snap.neighbor(p));
        let parent_ok = parent.is_some_and(|p| match anchored(p.regs) {
            Some((d, _)) => d == dist - 1,
            None => ready && p.regs.phase == Phase::Mark,
        });
        if !parent_ok {
            return self.abort();
        }

        if !ready {
            if self.wave_settled(dist) {
                return StepOutcome::write(anchored_registers(own.parent_port, dist, true));
            }
            return StepOutcome::keep(own);
        }

        // ready, but something around us regressed: withdraw readiness rather
        // than abort, so the wave itself never shrinks
        let regressed = self.neighbors().iter().any(|n| {
            is_orphan(n.regs)
                || n.regs.phase == Phase::Verify
                || (self.is_wave_child(n, dist) && !n.regs.scratch.ready)
        });
        if regressed {
            return StepOutcome::write(anchored_registers(own.parent_port, dist, false));
        }
        if let Some(from) = self.delegating_to_me() {
            return self.adopt(from);
        }
        StepOutcome::keep(own)
    }

    /// Every neighbor is in the wave and every wave child is ready.
    fn wave_settled(&self, dist: u32) -> bool {
        self.neighbors().iter().all(|n| {
            anchored(n.regs).is_some() && (!self.is_wave_child(n, dist) || n.regs.scratch.ready)
        })
    }

    /// Smallest port of a MARK neighbor that is handing us the token.
    fn delegating_to_me(&self) -> Option<&'s NeighborView<'a>> {
        self.neighbors().iter().find(|n| {
            let r = n.regs;
            r.phase == Phase::Mark
                && !r.scratch.token
                && r.scratch.cursor == Some(n.back_port)
                && r.in_label.is_some()
                && r.out_label.is_none()
                && r.scratch.counter.is_some()
        })
    }

    fn start_marker(&self) -> StepOutcome {
        let regs = NodeRegisters {
            parent_port: None,
            in_label: Some(1),
            out_label: None,
            phase: Phase::Mark,
            scratch: MarkScratch {
                token: true,
                counter: Some(1),
                ..MarkScratch::default()
            },
        };
        self.hold_token(regs)
    }

    fn adopt(&self, from: &NeighborView<'_>) -> StepOutcome {
        let label = from.regs.scratch.counter.unwrap_or(0).saturating_add(1);
        if !self.label_in_range(label) {
            return self.abort();
        }
        let regs = NodeRegisters {
            parent_port: Some(from.port),
            in_label: Some(label),
            out_label: None,
            phase: Phase::Mark,
            scratch: MarkScratch {
                token: true,
                counter: Some(label),
                ..MarkScratch::default()
            },
        };
        self.hold_token(regs)
    }

    /// Token holder: hand the token to the smallest-port unvisited neighbor,
    /// or finish.
    fn hold_token(&self, mut regs: NodeRegisters) -> StepOutcome {
        let counter = regs.scratch.counter.unwrap_or(0);
        // unvisited neighbors must be ready members of the wave
        let unready = |n: &&NeighborView<'_>| {
            n.regs.phase == Phase::Reset && !anchored(n.regs).is_some_and(|(_, ready)| ready)
        };
        if self.neighbors().iter().any(|n| unready(&n)) {
            return self.abort();
        }
        if let Some(next) = self
            .neighbors()
            .iter()
            .find(|n| n.regs.phase == Phase::Reset)
        {
            regs.scratch.token = false;
            regs.scratch.cursor = Some(next.port);
            return self.emit(regs);
        }
        let out = counter.saturating_add(1);
        if !self.label_in_range(out) {
            return self.abort();
        }
        regs.out_label = Some(out);
        regs.scratch.token = false;
        regs.scratch.cursor = None;
        if self.snap.is_root {
            regs = clean_verify(&regs);
        }
        self.emit(regs)
    }

    fn emit(&self, regs: NodeRegisters) -> StepOutcome {
        if regs == *self.own() {
            StepOutcome::keep(self.own())
        } else {
            StepOutcome::write(regs)
        }
    }

    fn mark_phase(&self) -> StepOutcome {
        let own = self.own();
        if self.any_orphan_neighbor() {
            return self.abort();
        }
        if let Some((port, dist)) = self.joinable() {
            return self.join(port, dist);
        }
        let Some(in_v) = own.in_label.filter(|&l| self.label_in_range(l)) else {
            return self.abort();
        };

        if let Some(out_v) = own.out_label {
            return self.finished_mark(in_v, out_v);
        }

        // unfinished: on the active path of the traversal
        if self
            .neighbors()
            .iter()
            .any(|n| n.regs.phase == Phase::Verify)
        {
            return self.abort();
        }
        if self.snap.is_root {
            if own.parent_port.is_some() || in_v != 1 {
                return self.abort();
            }
        } else {
            let Some(parent) = own.parent_port.and_then(|p| self.snap.neighbor(p)) else {
                return self.abort();
            };
            let r = parent.regs;
            let delegating = r.phase == Phase::Mark
                && r.out_label.is_none()
                && !r.scratch.token
                && r.scratch.cursor == Some(parent.back_port)
                && r.scratch.counter.map(|c| c.saturating_add(1)) == Some(in_v);
            if !delegating {
                return self.abort();
            }
        }

        let Some(counter) = own
            .scratch
            .counter
            .filter(|&c| c >= in_v && self.label_in_range(c))
        else {
            return self.abort();
        };
        if own.scratch.token {
            if own.scratch.cursor.is_some() {
                return self.abort();
            }
            return self.hold_token(own.clone());
        }
        let Some(child) = own.scratch.cursor.and_then(|p| self.snap.neighbor(p)) else {
            return self.abort();
        };
        let c = child.regs;
        match c.phase {
            Phase::Reset if anchored(c).is_some_and(|(_, ready)| ready) => StepOutcome::keep(own),
            Phase::Mark
                if c.parent_port == Some(child.back_port)
                    && c.in_label == Some(counter.saturating_add(1)) =>
            {
                match c.out_label {
                    Some(child_out)
                        if child_out > counter.saturating_add(1)
                            && self.label_in_range(child_out) =>
                    {
                        let mut regs = own.clone();
                        regs.scratch.token = true;
                        regs.scratch.cursor = None;
                        regs.scratch.counter = Some(child_out);
                        self.hold_token(regs)
                    }
                    Some(_) => self.abort(),
                    None => StepOutcome::keep(own),
                }
            }
            _ => self.abort(),
        }
    }

    fn finished_mark(&self, in_v: Label, out_v: Label) -> StepOutcome {
        let own = self.own();
        if out_v <= in_v
            || !self.label_in_range(out_v)
            || own.scratch.token
            || own.scratch.cursor.is_some()
        {
            return self.abort();
        }
        if self.snap.is_root {
            // the root leaves MARK the moment it finishes
            return StepOutcome::write(clean_verify(own));
        }
        let Some(parent) = own.parent_port.and_then(|p| self.snap.neighbor(p)) else {
            return self.abort();
        };
        let r = parent.regs;
        match r.phase {
            Phase::Verify => StepOutcome::write(clean_verify(own)),
            Phase::Mark if r.in_label.is_some_and(|p| p < in_v) => StepOutcome::keep(own),
            _ => self.abort(),
        }
    }
}
