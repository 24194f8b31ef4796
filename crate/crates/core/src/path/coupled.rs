//! Optimal coupled search over the joint state of all robots.
//!
//! Used as the merged low level when conflict-based search keeps hitting the
//! same pair of robots on a small map. A robot that is home with every
//! checkpoint done may commit to staying there; its cost is the commit time.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use crate::clock::Deadline;
use crate::error::PlanError;
use crate::model::{Objective, Time};
use crate::workspace::Cell;

use super::mla::{DistanceFields, TimedPath};
use super::{GoalSequence, PrecedenceEdge, PRECEDENCE_GAP};

const TIMEOUT_POLL: usize = 1 << 12;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct State {
    cells: Vec<Cell>,
    labels: Vec<usize>,
    done: Vec<bool>,
    since: Vec<u32>,
    /// Elapsed time clamped past the last deadline; zero without deadlines.
    clock: Time,
}

struct Entry {
    state: State,
    t: Time,
    parent: usize,
}

struct Coupled<'a> {
    seqs: &'a [GoalSequence],
    edges: &'a [PrecedenceEdge],
    fields: &'a DistanceFields<'a>,
    objective: Objective,
    clock_cap: Option<Time>,
}

impl Coupled<'_> {
    fn close(&self, r: usize, c: Cell, mut l: usize, t: Time) -> Option<usize> {
        let cps = &self.seqs[r].checkpoints;
        while l < cps.len() && cps[l].dwell == 0 && cps[l].cell == c {
            if cps[l].deadline.is_some_and(|d| t > d) {
                return None;
            }
            l += 1;
        }
        Some(l)
    }

    fn robot_h(&self, s: &State, r: usize) -> Time {
        if s.done[r] {
            return 0;
        }
        let seq = &self.seqs[r];
        let mut at = s.cells[r];
        let mut total = 0;
        for cp in &seq.checkpoints[s.labels[r]..] {
            total += self.fields.dist(cp.cell, at).unwrap_or(0) + cp.dwell;
            at = cp.cell;
        }
        total + self.fields.dist(seq.base, at).unwrap_or(0)
    }

    fn h(&self, s: &State) -> Time {
        let hs = (0..self.seqs.len()).map(|r| self.robot_h(s, r));
        match self.objective {
            Objective::Makespan => hs.max().unwrap_or(0),
            Objective::TotalCost => hs.sum(),
        }
    }

    fn can_commit(&self, s: &State, r: usize) -> bool {
        !s.done[r] && s.labels[r] == self.seqs[r].checkpoints.len() && s.cells[r] == self.seqs[r].base
    }

    /// (cell, label) options for robot `r` moving from `t` to `t + 1`.
    fn options(&self, s: &State, r: usize, t: Time) -> Vec<(Cell, usize)> {
        let (c, l) = (s.cells[r], s.labels[r]);
        if s.done[r] {
            return vec![(c, l)];
        }
        let ws = self.fields.workspace();
        let mut out = Vec::with_capacity(6);
        if let Some(cp) = self.seqs[r].checkpoints.get(l) {
            if cp.dwell > 0 && cp.cell == c && cp.deadline.is_none_or(|d| t < d) {
                if let Some(next) = self.close(r, c, l + 1, t + 1) {
                    out.push((c, next));
                }
            }
        }
        out.push((c, l));
        for n in ws.neighbors(c) {
            if let Some(next) = self.close(r, n, l, t + 1) {
                out.push((n, next));
            }
        }
        out
    }

    fn combine(&self, s: &State, chosen: &[(Cell, usize)]) -> Option<State> {
        for a in 0..chosen.len() {
            for b in a + 1..chosen.len() {
                if chosen[a].0 == chosen[b].0 || (chosen[a].0 == s.cells[b] && chosen[b].0 == s.cells[a]) {
                    return None;
                }
            }
        }
        let completes = |r: usize, k: usize| s.labels[r] <= k && k < chosen[r].1;
        let cap = PRECEDENCE_GAP + 1;
        let mut since: Vec<u32> = s
            .since
            .iter()
            .map(|&v| if v == 0 { 0 } else { (v + 1).min(cap) })
            .collect();
        for (e, edge) in self.edges.iter().enumerate() {
            if completes(edge.after.0, edge.after.1) && since[e] < cap {
                return None;
            }
            if completes(edge.before.0, edge.before.1) {
                since[e] = 1;
            }
        }
        Some(State {
            cells: chosen.iter().map(|c| c.0).collect(),
            labels: chosen.iter().map(|c| c.1).collect(),
            done: s.done.clone(),
            since,
            clock: self.clock_cap.map_or(0, |cap| (s.clock + 1).min(cap)),
        })
    }

    fn step_cost(&self, s: &State) -> Time {
        match self.objective {
            Objective::Makespan => 1,
            Objective::TotalCost => s.done.iter().filter(|d| !**d).count() as Time,
        }
    }
}

/// Result of a coupled search with a state budget.
#[derive(Debug)]
pub(crate) enum Joint {
    Solved(Vec<TimedPath>),
    Unsolvable,
    /// More than the budgeted number of states were generated.
    OverBudget,
}

/// Optimal timed paths for all robots at once, or `None` if no realization
/// exists. `fields` must hold every base and checkpoint cell.
pub fn coupled_search(
    seqs: &[GoalSequence],
    edges: &[PrecedenceEdge],
    fields: &DistanceFields,
    objective: Objective,
    deadline: &Deadline,
) -> Result<Option<Vec<TimedPath>>, PlanError> {
    match coupled_bounded(seqs, edges, fields, objective, usize::MAX, deadline)? {
        Joint::Solved(paths) => Ok(Some(paths)),
        _ => Ok(None),
    }
}

/// Like [`coupled_search`], but gives up once `budget` states exist.
pub(crate) fn coupled_bounded(
    seqs: &[GoalSequence],
    edges: &[PrecedenceEdge],
    fields: &DistanceFields,
    objective: Objective,
    budget: usize,
    deadline: &Deadline,
) -> Result<Joint, PlanError> {
    let clock_cap = seqs
        .iter()
        .flat_map(|s| s.checkpoints.iter().filter_map(|c| c.deadline))
        .max()
        .map(|d| d + 1);
    let search = Coupled {
        seqs,
        edges,
        fields,
        objective,
        clock_cap,
    };
    let mut labels = Vec::with_capacity(seqs.len());
    for (r, s) in seqs.iter().enumerate() {
        match search.close(r, s.base, 0, 0) {
            Some(l) => labels.push(l),
            None => return Ok(Joint::Unsolvable),
        }
    }
    let mut since = vec![0; edges.len()];
    for (e, edge) in edges.iter().enumerate() {
        if edge.after.1 < labels[edge.after.0] {
            return Ok(Joint::Unsolvable);
        }
        if edge.before.1 < labels[edge.before.0] {
            since[e] = 1;
        }
    }
    let start = State {
        cells: seqs.iter().map(|s| s.base).collect(),
        labels,
        done: vec![false; seqs.len()],
        since,
        clock: 0,
    };
    let mut arena = vec![Entry {
        state: start.clone(),
        t: 0,
        parent: usize::MAX,
    }];
    let mut best: HashMap<State, Time> = HashMap::from([(start.clone(), 0)]);
    let mut open = BinaryHeap::from([Reverse((search.h(&start), 0 as Time, 0usize))]);
    let mut polls = 0;
    while let Some(Reverse((_, g, id))) = open.pop() {
        polls += 1;
        if polls % TIMEOUT_POLL == 0 && deadline.expired() {
            return Err(PlanError::Timeout);
        }
        if arena.len() > budget {
            return Ok(Joint::OverBudget);
        }
        let s = arena[id].state.clone();
        let t = arena[id].t;
        if best.get(&s).is_some_and(|&b| b < g) {
            continue;
        }
        if s.done.iter().all(|&d| d) {
            return Ok(Joint::Solved(reconstruct(seqs, &arena, id)));
        }
        let mut push = |next: State, g2: Time, t2: Time, arena: &mut Vec<Entry>| {
            if best.get(&next).is_some_and(|&b| b <= g2) {
                return;
            }
            best.insert(next.clone(), g2);
            open.push(Reverse((g2 + search.h(&next), g2, arena.len())));
            arena.push(Entry {
                state: next,
                t: t2,
                parent: id,
            });
        };
        for r in 0..seqs.len() {
            if search.can_commit(&s, r) {
                let mut next = s.clone();
                next.done[r] = true;
                push(next, g, t, &mut arena);
            }
        }
        let options: Vec<_> = (0..seqs.len()).map(|r| search.options(&s, r, t)).collect();
        let g2 = g + search.step_cost(&s);
        let mut pick = vec![0usize; seqs.len()];
        'product: loop {
            let chosen: Vec<_> = pick.iter().enumerate().map(|(r, &k)| options[r][k]).collect();
            if let Some(next) = search.combine(&s, &chosen) {
                push(next, g2, t + 1, &mut arena);
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
    Ok(Joint::Unsolvable)
}

fn reconstruct(seqs: &[GoalSequence], arena: &[Entry], goal: usize) -> Vec<TimedPath> {
    let mut chain = Vec::new();
    let mut id = goal;
    while id != usize::MAX {
        chain.push(id);
        id = arena[id].parent;
    }
    chain.reverse();
    let mut paths: Vec<TimedPath> = seqs
        .iter()
        .map(|s| TimedPath {
            cells: Vec::new(),
            completions: vec![0; s.checkpoints.len()],
            cost: 0,
        })
        .collect();
    let mut prev: Option<&Entry> = None;
    for &id in &chain {
        let e = &arena[id];
        for (r, p) in paths.iter_mut().enumerate() {
            let was_done = prev.is_some_and(|q| q.state.done[r]);
            if was_done {
                continue;
            }
            let from = prev.map_or(0, |q| q.state.labels[r]);
            for k in from..e.state.labels[r] {
                p.completions[k] = e.t;
            }
            if p.cells.len() as Time == e.t {
                p.cells.push(e.state.cells[r]);
            }
            if e.state.done[r] {
                p.cost = e.t;
            }
        }
        prev = Some(e);
    }
    paths
}
