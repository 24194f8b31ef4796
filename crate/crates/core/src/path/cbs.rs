//! Conflict-Based Search with precedence constraints.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::clock::Deadline;
use crate::error::PlanError;
use crate::model::{Objective, Time};
use crate::workspace::{Cell, Workspace};

use super::coupled::{coupled_bounded, Joint};
use super::mla::{mla_star, DistanceFields, RobotConstraints, TimedPath};
use super::reach::{joint_reachability, Reachability};
use super::{
    detect_conflict, CheckpointKind, Conflict, GoalSequence, Label, Plan, PlanStep, PrecedenceEdge, PRECEDENCE_GAP,
};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CbsStats {
    pub expanded: u64,
    pub generated: u64,
    pub low_level_calls: u64,
    /// Searches handed over to the coupled planner.
    pub merges: u64,
}

impl CbsStats {
    pub fn accumulate(&mut self, other: &CbsStats) {
        self.expanded += other.expanded;
        self.generated += other.generated;
        self.low_level_calls += other.low_level_calls;
        self.merges += other.merges;
    }
}

/// Conflicts between one pair of robots after which the search tries to
/// merge all robots into a single coupled search.
pub const MERGE_THRESHOLD: u64 = 64;

/// Joint states the merged search may generate before CBS resumes branching.
pub const MERGE_STATE_BUDGET: usize = 1_000_000;

struct CtNode {
    cons: Vec<RobotConstraints>,
    paths: Vec<TimedPath>,
}

fn node_key(paths: &[TimedPath], objective: Objective) -> (Time, Time) {
    let sum = paths.iter().map(|p| p.cost).sum();
    match objective {
        Objective::Makespan => (paths.iter().map(|p| p.cost).max().unwrap_or(0), sum),
        Objective::TotalCost => (sum, 0),
    }
}

/// First precedence edge whose successor completes too early, ordered by
/// the successor's completion time.
fn precedence_violation(paths: &[TimedPath], edges: &[PrecedenceEdge]) -> Option<(PrecedenceEdge, Time)> {
    edges
        .iter()
        .filter_map(|e| {
            let tp = paths[e.before.0].completions[e.before.1];
            let tq = paths[e.after.0].completions[e.after.1];
            (tq < tp + PRECEDENCE_GAP).then_some((tq, *e, tp))
        })
        .min_by_key(|&(tq, e, _)| (tq, e.after, e.before))
        .map(|(_, e, tp)| (e, tp))
}

/// Optimal collision-free plan realizing `seqs` under `edges`, or `None` if
/// the search space is exhausted. Ties between equally good constraint-tree
/// nodes go to the older node.
pub fn cbs_pc(
    ws: &Workspace,
    seqs: &[GoalSequence],
    edges: &[PrecedenceEdge],
    objective: Objective,
    num_tasks: usize,
    deadline: &Deadline,
) -> Result<(Option<Plan>, CbsStats), PlanError> {
    let mut stats = CbsStats::default();
    let mut fields = DistanceFields::new(ws);
    for s in seqs {
        fields.prepare_sequence(s);
    }
    let mut root_paths = Vec::with_capacity(seqs.len());
    let root_cons = vec![RobotConstraints::default(); seqs.len()];
    for s in seqs {
        stats.low_level_calls += 1;
        match mla_star(s, &root_cons[s.robot], &fields, None, deadline)? {
            Some(p) => root_paths.push(p),
            None => return Ok((None, stats)),
        }
    }
    let mut nodes = vec![CtNode {
        cons: root_cons,
        paths: root_paths,
    }];
    let mut open = BinaryHeap::new();
    let (k0, k1) = node_key(&nodes[0].paths, objective);
    open.push(Reverse((k0, k1, 0usize)));
    stats.generated = 1;
    let mut reach_checked = false;
    let mut mergeable = seqs.len() >= 2;
    let mut pair_conflicts = vec![vec![0u64; seqs.len()]; seqs.len()];

    while let Some(Reverse((_, _, id))) = open.pop() {
        if deadline.expired() {
            return Err(PlanError::Timeout);
        }
        stats.expanded += 1;
        let cells: Vec<Vec<Cell>> = nodes[id].paths.iter().map(|p| p.cells.clone()).collect();
        // Each child is (robot, constraint update).
        let mut children: Vec<(usize, RobotConstraints)> = Vec::with_capacity(2);
        let parent = &nodes[id];
        let conflict = detect_conflict(&cells);
        let violation = if conflict.is_none() {
            precedence_violation(&parent.paths, edges)
        } else {
            None
        };
        if !reach_checked && (conflict.is_some() || violation.is_some()) {
            // The tree may never run dry on an unrealizable input, so settle
            // that question exactly when the joint space is small.
            reach_checked = true;
            if joint_reachability(seqs, edges, &fields, deadline)? == Reachability::Unreachable {
                return Ok((None, stats));
            }
        }
        let pair = match (conflict, violation) {
            (Some(Conflict::Vertex { a, b, .. } | Conflict::Edge { a, b, .. }), _) => Some((a, b)),
            (None, Some((e, _))) => Some((e.before.0, e.after.0)),
            _ => None,
        };
        if let Some((a, b)) = pair.filter(|(a, b)| a != b) {
            let n = &mut pair_conflicts[a.min(b)][a.max(b)];
            *n += 1;
            if mergeable && *n > MERGE_THRESHOLD {
                mergeable = false;
                match coupled_bounded(seqs, edges, &fields, objective, MERGE_STATE_BUDGET, deadline)? {
                    Joint::Solved(paths) => {
                        stats.merges += 1;
                        return Ok((Some(build_plan(seqs, &paths, num_tasks)), stats));
                    }
                    Joint::Unsolvable => {
                        stats.merges += 1;
                        return Ok((None, stats));
                    }
                    Joint::OverBudget => {}
                }
            }
        }
        if let Some(conflict) = conflict {
            match conflict {
                Conflict::Vertex { a, b, cell, t } => {
                    for r in [a, b] {
                        let mut c = parent.cons[r].clone();
                        c.vertex.insert((cell, t));
                        children.push((r, c));
                    }
                }
                Conflict::Edge { a, b, from, to, t } => {
                    let mut ca = parent.cons[a].clone();
                    ca.edge.insert((from, to, t));
                    children.push((a, ca));
                    let mut cb = parent.cons[b].clone();
                    cb.edge.insert((to, from, t));
                    children.push((b, cb));
                }
            }
        } else if let Some((edge, tp)) = violation {
            let (rb, q) = edge.after;
            let mut later = parent.cons[rb].clone();
            let e = later.earliest.entry(q).or_insert(0);
            *e = (*e).max(tp + PRECEDENCE_GAP);
            children.push((rb, later));
            if tp > 0 {
                let (ra, p) = edge.before;
                let mut sooner = parent.cons[ra].clone();
                let l = sooner.latest.entry(p).or_insert(tp - 1);
                *l = (*l).min(tp - 1);
                children.push((ra, sooner));
            }
        } else {
            let node = nodes.swap_remove(id);
            return Ok((Some(build_plan(seqs, &node.paths, num_tasks)), stats));
        }

        for (r, cons) in children {
            stats.low_level_calls += 1;
            let Some(path) = mla_star(&seqs[r], &cons, &fields, None, deadline)? else {
                continue;
            };
            let parent = &nodes[id];
            let mut all_cons = parent.cons.clone();
            all_cons[r] = cons;
            let mut paths = parent.paths.clone();
            paths[r] = path;
            let (k0, k1) = node_key(&paths, objective);
            nodes.push(CtNode { cons: all_cons, paths });
            stats.generated += 1;
            open.push(Reverse((k0, k1, nodes.len() - 1)));
        }
        // Expanded nodes are never revisited; release their storage.
        nodes[id].paths = Vec::new();
        nodes[id].cons = Vec::new();
    }
    Ok((None, stats))
}

fn label_for(seq: &GoalSequence, path: &TimedPath, t: Time) -> Label {
    if t == 0 {
        return Label::Start;
    }
    let mut returned = false;
    for (cp, &done) in seq.checkpoints.iter().zip(&path.completions) {
        if done != t {
            continue;
        }
        let m = cp.task.unwrap_or(0);
        match cp.kind {
            CheckpointKind::Pick => return Label::Pick(m),
            CheckpointKind::Drop => return Label::Drop(m),
            CheckpointKind::DropIntermediate => return Label::InterDrop(m),
            CheckpointKind::PickIntermediate => return Label::InterPick(m),
            CheckpointKind::ReturnHome => returned = true,
        }
    }
    if returned {
        Label::Return
    } else {
        Label::Move
    }
}

fn build_plan(seqs: &[GoalSequence], paths: &[TimedPath], num_tasks: usize) -> Plan {
    let trajectories = seqs
        .iter()
        .zip(paths)
        .map(|(seq, path)| {
            path.cells
                .iter()
                .enumerate()
                .map(|(t, &cell)| PlanStep {
                    cell,
                    label: label_for(seq, path, t as Time),
                })
                .collect()
        })
        .collect();
    Plan::from_trajectories(trajectories, num_tasks)
}
