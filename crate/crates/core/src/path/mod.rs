//! Collision-free realization of task assignments.
//!
//! Every robot gets an ordered list of checkpoints compiled from its task
//! actions. A Multi-Label A* low level plans single robots through their
//! checkpoints under constraints; Conflict-Based Search with precedence
//! constraints resolves collisions and cross-robot transfer ordering.

mod cbs;
mod coupled;
mod mla;
mod reach;
mod validate;

use std::fmt;

use thiserror::Error;

use crate::clock::Deadline;
use crate::error::PlanError;
use crate::model::{Instance, Objective, Time};
use crate::task::{Action, TaskAssignment};
use crate::workspace::Cell;

pub use cbs::{cbs_pc, CbsStats, MERGE_STATE_BUDGET, MERGE_THRESHOLD};
pub use coupled::coupled_search;
pub use mla::{mla_star, DistanceFields, RobotConstraints, TimedPath};
pub use reach::{joint_reachability, Reachability, JOINT_STATE_LIMIT};
pub use validate::{validate_plan, PlanViolation};

/// Minimum gap between an intermediate drop completing and the matching
/// intermediate pick completing. The object is placed at the end of the
/// drop tick and the picker needs a full tick on the cell afterwards.
pub const PRECEDENCE_GAP: Time = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CheckpointKind {
    Pick,
    Drop,
    DropIntermediate,
    PickIntermediate,
    ReturnHome,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Checkpoint {
    pub cell: Cell,
    pub kind: CheckpointKind,
    pub task: Option<usize>,
    /// Ticks the robot must spend on the cell to complete the checkpoint.
    pub dwell: Time,
    pub deadline: Option<Time>,
}

impl Checkpoint {
    fn new(kind: CheckpointKind, cell: Cell, task: Option<usize>) -> Self {
        Checkpoint {
            cell,
            kind,
            task,
            dwell: if kind == CheckpointKind::ReturnHome { 0 } else { 1 },
            deadline: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GoalSequence {
    pub robot: usize,
    pub base: Cell,
    pub checkpoints: Vec<Checkpoint>,
}

/// Checkpoint `before` (robot, index) must complete at least
/// [`PRECEDENCE_GAP`] ticks before checkpoint `after`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PrecedenceEdge {
    pub before: (usize, usize),
    pub after: (usize, usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CompileError {
    #[error("task {task}: intermediate drop at step {step} has no matching pick")]
    UnmatchedTransfer { task: usize, step: usize },
    #[error("assignment has {found} robots, instance has {expected}")]
    RobotCount { expected: usize, found: usize },
}

/// Per-robot checkpoint lists and transfer precedences for an assignment.
/// Stays are dropped, every non-empty list ends with a return home, and task
/// deadlines land on the final drop.
pub fn compile_goal_sequences(
    assignment: &TaskAssignment,
    inst: &Instance,
) -> Result<(Vec<GoalSequence>, Vec<PrecedenceEdge>), CompileError> {
    if assignment.steps.len() != inst.robots.len() {
        return Err(CompileError::RobotCount {
            expected: inst.robots.len(),
            found: assignment.steps.len(),
        });
    }
    // (step, robot, checkpoint index, kind, cell) per task, in step order.
    type Event = (usize, usize, usize, CheckpointKind, Cell);
    let mut events: Vec<Vec<Event>> = vec![Vec::new(); inst.tasks.len()];
    let mut seqs = Vec::with_capacity(inst.robots.len());
    for (i, steps) in assignment.steps.iter().enumerate() {
        let base = inst.robots[i].start;
        let mut cps: Vec<Checkpoint> = Vec::new();
        for (j, s) in steps.iter().enumerate() {
            let cp = match s.action {
                Action::Stay => continue,
                Action::Return => Checkpoint::new(CheckpointKind::ReturnHome, base, None),
                Action::Pick(m) => Checkpoint::new(CheckpointKind::Pick, inst.tasks[m].pickup, Some(m)),
                Action::Drop(m) => Checkpoint {
                    deadline: inst.tasks[m].deadline,
                    ..Checkpoint::new(CheckpointKind::Drop, inst.tasks[m].drop, Some(m))
                },
                Action::DropIntermediate(m, n) => Checkpoint::new(CheckpointKind::DropIntermediate, n, Some(m)),
                Action::PickIntermediate(m, n) => Checkpoint::new(CheckpointKind::PickIntermediate, n, Some(m)),
            };
            if let Some(m) = cp.task {
                events[m].push((j, i, cps.len(), cp.kind, cp.cell));
            }
            cps.push(cp);
        }
        if cps.last().is_some_and(|c| c.kind != CheckpointKind::ReturnHome) {
            cps.push(Checkpoint::new(CheckpointKind::ReturnHome, base, None));
        }
        seqs.push(GoalSequence {
            robot: i,
            base,
            checkpoints: cps,
        });
    }
    let mut edges = Vec::new();
    for (m, evs) in events.iter_mut().enumerate() {
        evs.sort_by_key(|e| e.0);
        for (k, &(step, robot, idx, kind, cell)) in evs.iter().enumerate() {
            if kind != CheckpointKind::DropIntermediate {
                continue;
            }
            match evs.get(k + 1) {
                Some(&(_, r2, idx2, CheckpointKind::PickIntermediate, c2)) if c2 == cell => {
                    edges.push(PrecedenceEdge {
                        before: (robot, idx),
                        after: (r2, idx2),
                    })
                }
                _ => return Err(CompileError::UnmatchedTransfer { task: m, step }),
            }
        }
    }
    // One object per transfer cell: a drop onto an occupied cell waits for
    // the pickup that clears it. With one robot the checkpoint order already
    // does; across robots, collision avoidance makes the usual gap exact.
    let mut visits: Vec<(Cell, usize, bool, usize, usize)> = Vec::new();
    for evs in &events {
        for &(step, robot, idx, kind, cell) in evs {
            match kind {
                CheckpointKind::PickIntermediate => visits.push((cell, step, false, robot, idx)),
                CheckpointKind::DropIntermediate => visits.push((cell, step, true, robot, idx)),
                _ => {}
            }
        }
    }
    visits.sort_by_key(|v| (v.0, v.1, v.2));
    for w in visits.windows(2) {
        let (cell, _, dropped, robot, idx) = w[0];
        let (next_cell, _, next_dropped, next_robot, next_idx) = w[1];
        if cell == next_cell && !dropped && next_dropped && robot != next_robot {
            edges.push(PrecedenceEdge {
                before: (robot, idx),
                after: (next_robot, next_idx),
            });
        }
    }
    Ok((seqs, edges))
}

/// What a robot did during the tick ending at a trajectory entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Start,
    Move,
    Pick(usize),
    Drop(usize),
    InterDrop(usize),
    InterPick(usize),
    Return,
}

impl Label {
    pub fn task(self) -> Option<usize> {
        match self {
            Label::Pick(m) | Label::Drop(m) | Label::InterDrop(m) | Label::InterPick(m) => Some(m),
            _ => None,
        }
    }
}

/// Table spelling, with 1-based task numbers.
impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Start => f.write_str("Start"),
            Label::Move => f.write_str("Move"),
            Label::Pick(m) => write!(f, "Pick_{}", m + 1),
            Label::Drop(m) => write!(f, "Drop_{}", m + 1),
            Label::InterDrop(m) => write!(f, "InterDrop_{}", m + 1),
            Label::InterPick(m) => write!(f, "InterPick_{}", m + 1),
            Label::Return => f.write_str("Return"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlanStep {
    pub cell: Cell,
    pub label: Label,
}

/// Per-robot trajectories indexed by time. Trajectory `i` has `T_i + 1`
/// entries; afterwards the robot rests at its base.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Plan {
    pub trajectories: Vec<Vec<PlanStep>>,
    pub makespan: Time,
    pub total_cost: Time,
    /// Delivery time per task, `None` if the plan never delivers it.
    pub completions: Vec<Option<Time>>,
}

impl Plan {
    pub fn from_trajectories(trajectories: Vec<Vec<PlanStep>>, num_tasks: usize) -> Self {
        let lens: Vec<Time> = trajectories.iter().map(|t| t.len().saturating_sub(1) as Time).collect();
        let mut completions = vec![None; num_tasks];
        for traj in &trajectories {
            for (t, s) in traj.iter().enumerate() {
                if let Label::Drop(m) = s.label {
                    if let Some(c) = completions.get_mut(m) {
                        *c = Some(t as Time);
                    }
                }
            }
        }
        Plan {
            makespan: lens.iter().copied().max().unwrap_or(0),
            total_cost: lens.iter().sum(),
            trajectories,
            completions,
        }
    }

    pub fn cost(&self, objective: Objective) -> Time {
        match objective {
            Objective::Makespan => self.makespan,
            Objective::TotalCost => self.total_cost,
        }
    }

    pub fn robot_cost(&self, i: usize) -> Time {
        self.trajectories[i].len().saturating_sub(1) as Time
    }

    /// Cell of robot `i` at time `t`, resting at the last cell afterwards.
    pub fn cell_at(&self, i: usize, t: Time) -> Cell {
        let traj = &self.trajectories[i];
        traj[(t as usize).min(traj.len() - 1)].cell
    }

    pub fn cells(&self) -> Vec<Vec<Cell>> {
        self.trajectories
            .iter()
            .map(|t| t.iter().map(|s| s.cell).collect())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Conflict {
    /// Robots `a < b` both occupy `cell` at `t`.
    Vertex { a: usize, b: usize, cell: Cell, t: Time },
    /// Robot `a` moves `from -> to` and `b` moves `to -> from` between
    /// `t` and `t + 1`.
    Edge {
        a: usize,
        b: usize,
        from: Cell,
        to: Cell,
        t: Time,
    },
}

fn at(path: &[Cell], t: usize) -> Cell {
    path[t.min(path.len() - 1)]
}

/// Earliest collision between paths padded with waits at their last cell,
/// checking vertex conflicts at `t` before swaps arriving at `t`, and lower
/// robot ids first.
pub fn detect_conflict(paths: &[Vec<Cell>]) -> Option<Conflict> {
    let horizon = paths.iter().map(Vec::len).max().unwrap_or(0);
    for t in 0..horizon {
        for a in 0..paths.len() {
            for b in a + 1..paths.len() {
                let cell = at(&paths[a], t);
                if cell == at(&paths[b], t) {
                    return Some(Conflict::Vertex {
                        a,
                        b,
                        cell,
                        t: t as Time,
                    });
                }
            }
        }
        if t == 0 {
            continue;
        }
        for a in 0..paths.len() {
            for b in a + 1..paths.len() {
                let (from, to) = (at(&paths[a], t - 1), at(&paths[a], t));
                if from != to && at(&paths[b], t - 1) == to && at(&paths[b], t) == from {
                    return Some(Conflict::Edge {
                        a,
                        b,
                        from,
                        to,
                        t: t as Time - 1,
                    });
                }
            }
        }
    }
    None
}

/// Plans collision-free paths for a task assignment.
pub trait PathPlanner {
    /// `Ok(None)` when the assignment cannot be realized.
    fn plan(
        &mut self,
        inst: &Instance,
        assignment: &TaskAssignment,
        deadline: &Deadline,
    ) -> Result<Option<Plan>, PlanError>;
}

/// Conflict-Based Search with precedence constraints.
#[derive(Debug, Clone, Default)]
pub struct CbsPlanner {
    pub stats: CbsStats,
}

impl PathPlanner for CbsPlanner {
    fn plan(
        &mut self,
        inst: &Instance,
        assignment: &TaskAssignment,
        deadline: &Deadline,
    ) -> Result<Option<Plan>, PlanError> {
        let (seqs, edges) =
            compile_goal_sequences(assignment, inst).map_err(|e| PlanError::Assignment(e.to_string()))?;
        let (plan, stats) = cbs_pc(
            &inst.workspace,
            &seqs,
            &edges,
            inst.objective,
            inst.tasks.len(),
            deadline,
        )?;
        self.stats.accumulate(&stats);
        Ok(plan)
    }
}
