//! Multi-Label A*: single-robot search over (cell, next checkpoint, time).

use std::cmp::Reverse;
use std::collections::hash_map::Entry;
use std::collections::{BinaryHeap, HashMap, HashSet};

use crate::clock::Deadline;
use crate::error::PlanError;
use crate::model::Time;
use crate::workspace::{Cell, Workspace};

use super::GoalSequence;

const TIMEOUT_POLL: u64 = 1 << 10;

/// Lazily built BFS distance fields keyed by source cell.
#[derive(Debug, Clone)]
pub struct DistanceFields<'w> {
    ws: &'w Workspace,
    fields: HashMap<Cell, Vec<Option<u32>>>,
}

impl<'w> DistanceFields<'w> {
    pub fn new(ws: &'w Workspace) -> Self {
        DistanceFields {
            ws,
            fields: HashMap::new(),
        }
    }

    pub fn prepare(&mut self, source: Cell) {
        if let Entry::Vacant(e) = self.fields.entry(source) {
            e.insert(self.ws.distance_field(source));
        }
    }

    pub fn prepare_sequence(&mut self, seq: &GoalSequence) {
        self.prepare(seq.base);
        for cp in &seq.checkpoints {
            self.prepare(cp.cell);
        }
    }

    /// Distance between `source` and `c`. `source` must have been prepared.
    pub fn dist(&self, source: Cell, c: Cell) -> Option<u32> {
        self.fields[&source][self.ws.index(c)]
    }

    pub fn workspace(&self) -> &'w Workspace {
        self.ws
    }
}

/// Constraints imposed on one robot by the high-level search.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RobotConstraints {
    /// The robot may not be at `cell` at `t`.
    pub vertex: HashSet<(Cell, Time)>,
    /// The robot may not move `from -> to` between `t` and `t + 1`.
    pub edge: HashSet<(Cell, Cell, Time)>,
    /// Checkpoint index to earliest allowed completion.
    pub earliest: HashMap<usize, Time>,
    /// Checkpoint index to latest allowed completion.
    pub latest: HashMap<usize, Time>,
}

impl RobotConstraints {
    pub fn is_empty(&self) -> bool {
        self.vertex.is_empty() && self.edge.is_empty() && self.earliest.is_empty() && self.latest.is_empty()
    }

    /// First time from which no constraint can distinguish two instants.
    fn settle_time(&self, seq: &GoalSequence) -> Time {
        let v = self.vertex.iter().map(|&(_, t)| t);
        let e = self.edge.iter().map(|&(_, _, t)| t + 1);
        let bounds = self.earliest.values().chain(self.latest.values()).copied();
        let deadlines = seq.checkpoints.iter().filter_map(|c| c.deadline);
        v.chain(e).chain(bounds).chain(deadlines).max().map_or(0, |t| t + 1)
    }
}

/// A single robot's timed path. `cells[t]` is its cell at `t`; the path
/// ends when the robot is home for good, so `cost = cells.len() - 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimedPath {
    pub cells: Vec<Cell>,
    /// Completion time of each checkpoint.
    pub completions: Vec<Time>,
    pub cost: Time,
}

#[derive(Debug, Clone, Copy)]
struct Node {
    cell: Cell,
    label: usize,
    t: Time,
    parent: usize,
}

struct Bounds<'s> {
    seq: &'s GoalSequence,
    cons: &'s RobotConstraints,
}

impl Bounds<'_> {
    fn allows(&self, l: usize, t: Time) -> bool {
        let cp = &self.seq.checkpoints[l];
        self.cons.earliest.get(&l).is_none_or(|&e| t >= e)
            && self.cons.latest.get(&l).is_none_or(|&e| t <= e)
            && cp.deadline.is_none_or(|d| t <= d)
    }

    /// Completes zero-dwell checkpoints at `c` reached at `t`.
    fn close(&self, c: Cell, mut l: usize, t: Time) -> usize {
        let cps = &self.seq.checkpoints;
        while l < cps.len() && cps[l].dwell == 0 && cps[l].cell == c && self.allows(l, t) {
            l += 1;
        }
        l
    }
}

/// Cheapest timed path for `seq` under `cons`, or `None` when none exists
/// (or none within `max_cost`). Cost is the time the robot comes to rest at
/// its base with every checkpoint done.
pub fn mla_star(
    seq: &GoalSequence,
    cons: &RobotConstraints,
    fields: &DistanceFields,
    max_cost: Option<Time>,
    deadline: &Deadline,
) -> Result<Option<TimedPath>, PlanError> {
    let ws = fields.workspace();
    let cps = &seq.checkpoints;
    let k = cps.len();
    let d = |a: Cell, b: Cell| fields.dist(a, b);

    // tail[l]: cost after completing checkpoint l until home.
    let mut tail = vec![0; k];
    for l in (0..k).rev() {
        let next = if l + 1 < k {
            d(cps[l].cell, cps[l + 1].cell).map(|x| x + cps[l + 1].dwell + tail[l + 1])
        } else {
            d(cps[l].cell, seq.base)
        };
        match next {
            Some(v) => tail[l] = v,
            None => return Ok(None),
        }
    }
    let h = |c: Cell, l: usize| -> Option<Time> {
        if l == k {
            d(seq.base, c)
        } else {
            d(cps[l].cell, c).map(|x| x + cps[l].dwell + tail[l])
        }
    };

    let bounds = Bounds { seq, cons };
    let settle = cons.settle_time(seq);
    let base_block = cons
        .vertex
        .iter()
        .filter(|&&(c, _)| c == seq.base)
        .map(|&(_, t)| t)
        .max();
    let within = |f: Time| max_cost.is_none_or(|m| f <= m);

    let mut nodes = Vec::new();
    let mut open = BinaryHeap::new();
    let mut closed: HashSet<(usize, usize, Time)> = HashSet::new();
    let mut seqno: u64 = 0;
    let mut push = |nodes: &mut Vec<Node>, open: &mut BinaryHeap<_>, node: Node| {
        if let Some(hv) = h(node.cell, node.label) {
            let f = node.t + hv;
            if within(f) {
                nodes.push(node);
                seqno += 1;
                open.push(Reverse((f, Time::MAX - node.t, seqno, nodes.len() - 1)));
            }
        }
    };

    if cons.vertex.contains(&(seq.base, 0)) {
        return Ok(None);
    }
    let start = Node {
        cell: seq.base,
        label: bounds.close(seq.base, 0, 0),
        t: 0,
        parent: usize::MAX,
    };
    push(&mut nodes, &mut open, start);

    let mut pops: u64 = 0;
    while let Some(Reverse((_, _, _, idx))) = open.pop() {
        pops += 1;
        if pops.is_multiple_of(TIMEOUT_POLL) && deadline.expired() {
            return Err(PlanError::Timeout);
        }
        let node = nodes[idx];
        if !closed.insert((ws.index(node.cell), node.label, node.t.min(settle))) {
            continue;
        }
        if node.label == k && node.cell == seq.base && base_block.is_none_or(|b| node.t > b) {
            return Ok(Some(reconstruct(&nodes, idx, k)));
        }
        let nt = node.t + 1;
        let moves = std::iter::once(node.cell).chain(ws.neighbors(node.cell));
        for next in moves {
            if cons.vertex.contains(&(next, nt)) {
                continue;
            }
            if next != node.cell && cons.edge.contains(&(node.cell, next, node.t)) {
                continue;
            }
            let stay_label = bounds.close(next, node.label, nt);
            push(
                &mut nodes,
                &mut open,
                Node {
                    cell: next,
                    label: stay_label,
                    t: nt,
                    parent: idx,
                },
            );
            let l = node.label;
            if next == node.cell && l < k && cps[l].dwell > 0 && cps[l].cell == next && bounds.allows(l, nt) {
                push(
                    &mut nodes,
                    &mut open,
                    Node {
                        cell: next,
                        label: bounds.close(next, l + 1, nt),
                        t: nt,
                        parent: idx,
                    },
                );
            }
        }
    }
    Ok(None)
}

fn reconstruct(nodes: &[Node], goal: usize, k: usize) -> TimedPath {
    let mut chain = Vec::new();
    let mut i = goal;
    while i != usize::MAX {
        chain.push(nodes[i]);
        i = nodes[i].parent;
    }
    chain.reverse();
    let mut completions = vec![0; k];
    let mut done = 0;
    for n in &chain {
        while done < n.label {
            completions[done] = n.t;
            done += 1;
        }
    }
    let cost = chain.last().map_or(0, |n| n.t);
    TimedPath {
        cells: chain.iter().map(|n| n.cell).collect(),
        completions,
        cost,
    }
}
