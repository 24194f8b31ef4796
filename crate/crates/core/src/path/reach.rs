//! Exhaustive joint-state reachability for small instances.
//!
//! Conflict-based search cannot prove that no collision-free realization
//! exists. When the joint state space is small enough this module decides
//! that question exactly, ignoring deadlines, so an unreachable answer is
//! always sound.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashSet};

use crate::clock::Deadline;
use crate::error::PlanError;
use crate::workspace::Cell;

use super::mla::DistanceFields;
use super::{GoalSequence, PrecedenceEdge, PRECEDENCE_GAP};

/// Upper bound on the estimated joint state count for which the search runs.
pub const JOINT_STATE_LIMIT: u64 = 400_000;

const TIMEOUT_POLL: usize = 1 << 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reachability {
    Reachable,
    Unreachable,
    /// The state space is too large to enumerate.
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct State {
    cells: Vec<Cell>,
    labels: Vec<usize>,
    /// Per edge: 0 before the first checkpoint completes, then ticks since
    /// plus one, saturated.
    since: Vec<u32>,
}

struct Search<'a> {
    seqs: &'a [GoalSequence],
    edges: &'a [PrecedenceEdge],
    fields: &'a DistanceFields<'a>,
}

impl Search<'_> {
    fn close(&self, r: usize, c: Cell, mut l: usize) -> usize {
        let cps = &self.seqs[r].checkpoints;
        while l < cps.len() && cps[l].dwell == 0 && cps[l].cell == c {
            l += 1;
        }
        l
    }

    /// Sum over robots of remaining travel; only used to order the search.
    fn h(&self, s: &State) -> u64 {
        let mut total = 0u64;
        for (r, seq) in self.seqs.iter().enumerate() {
            let mut at = s.cells[r];
            for cp in &seq.checkpoints[s.labels[r]..] {
                total += u64::from(self.fields.dist(cp.cell, at).unwrap_or(0));
                at = cp.cell;
            }
            total += u64::from(self.fields.dist(seq.base, at).unwrap_or(0));
        }
        total
    }

    /// (cell, label, completed checkpoint) options for robot `r`.
    fn options(&self, r: usize, c: Cell, l: usize) -> Vec<(Cell, usize, Option<usize>)> {
        let ws = self.fields.workspace();
        let mut out = Vec::with_capacity(6);
        if let Some(cp) = self.seqs[r].checkpoints.get(l) {
            if cp.dwell > 0 && cp.cell == c {
                out.push((c, self.close(r, c, l + 1), Some(l)));
            }
        }
        out.push((c, l, None));
        for n in ws.neighbors(c) {
            out.push((n, self.close(r, n, l), None));
        }
        out
    }

    fn combine(&self, s: &State, chosen: &[(Cell, usize, Option<usize>)]) -> Option<State> {
        for a in 0..chosen.len() {
            for b in a + 1..chosen.len() {
                if chosen[a].0 == chosen[b].0 || (chosen[a].0 == s.cells[b] && chosen[b].0 == s.cells[a]) {
                    return None;
                }
            }
        }
        let cap = PRECEDENCE_GAP + 1;
        let mut since: Vec<u32> = s
            .since
            .iter()
            .map(|&v| if v == 0 { 0 } else { (v + 1).min(cap) })
            .collect();
        for (e, edge) in self.edges.iter().enumerate() {
            let (ra, ka) = edge.after;
            if chosen[ra].2 == Some(ka) && since[e] < cap {
                return None;
            }
            let (rb, kb) = edge.before;
            if chosen[rb].2 == Some(kb) {
                since[e] = 1;
            }
        }
        Some(State {
            cells: chosen.iter().map(|c| c.0).collect(),
            labels: chosen.iter().map(|c| c.1).collect(),
            since,
        })
    }

    fn is_goal(&self, s: &State) -> bool {
        self.seqs
            .iter()
            .enumerate()
            .all(|(r, seq)| s.labels[r] == seq.checkpoints.len() && s.cells[r] == seq.base)
    }
}

fn estimate(seqs: &[GoalSequence], edges: &[PrecedenceEdge], free: u64) -> u64 {
    let mut n: u64 = 1;
    for s in seqs {
        n = n.saturating_mul(free).saturating_mul(s.checkpoints.len() as u64 + 1);
    }
    for _ in edges {
        n = n.saturating_mul(u64::from(PRECEDENCE_GAP) + 2);
    }
    n
}

/// Whether every robot can finish its checkpoints and be home at the same
/// moment, with no vertex or swap collision on the way. `fields` must hold
/// every base and checkpoint cell.
pub fn joint_reachability(
    seqs: &[GoalSequence],
    edges: &[PrecedenceEdge],
    fields: &DistanceFields,
    deadline: &Deadline,
) -> Result<Reachability, PlanError> {
    let free = fields.workspace().free_cells().count() as u64;
    if seqs.len() < 2 || estimate(seqs, edges, free) > JOINT_STATE_LIMIT {
        return Ok(Reachability::Unknown);
    }
    let search = Search { seqs, edges, fields };
    let start = State {
        cells: seqs.iter().map(|s| s.base).collect(),
        labels: seqs
            .iter()
            .enumerate()
            .map(|(r, s)| search.close(r, s.base, 0))
            .collect(),
        since: vec![0; edges.len()],
    };
    let mut states = vec![start.clone()];
    let mut seen = HashSet::from([start.clone()]);
    let mut open = BinaryHeap::from([Reverse((search.h(&start), 0usize))]);
    let mut polls = 0;
    while let Some(Reverse((_, id))) = open.pop() {
        polls += 1;
        if polls % TIMEOUT_POLL == 0 && deadline.expired() {
            return Err(PlanError::Timeout);
        }
        let s = states[id].clone();
        if search.is_goal(&s) {
            return Ok(Reachability::Reachable);
        }
        let options: Vec<_> = (0..seqs.len())
            .map(|r| search.options(r, s.cells[r], s.labels[r]))
            .collect();
        let mut pick = vec![0usize; seqs.len()];
        'product: loop {
            let chosen: Vec<_> = pick.iter().enumerate().map(|(r, &k)| options[r][k]).collect();
            if let Some(next) = search.combine(&s, &chosen) {
                if seen.insert(next.clone()) {
                    open.push(Reverse((search.h(&next), states.len())));
                    states.push(next);
                }
            }
            for r in 0..seqs.len() {
                pick[r] += 1;
                if pick[r] < options[r].len() {
                    continue 'product;
                }
                pick[r] = 0;
            }
            break;
        }
    }
    Ok(Reachability::Unreachable)
}
