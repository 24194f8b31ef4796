//! Task planning over action steps.
//!
//! Each robot performs exactly `z` actions. An action moves the robot to a
//! point of interest and possibly picks or drops an object there; its
//! duration is the shortest grid distance plus one tick for the pick or
//! drop. The transition functions here are shared by the native
//! branch-and-bound engine, the SMT-LIB2 emitter's model decoder and the
//! brute-force enumerators in the test suites.

mod planner;
mod search;
pub mod smtlib;

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::{Instance, Objective, Time};
use crate::workspace::{Cell, DistanceOracle, WorkspaceError};

pub use planner::{cost_ceiling, task_planner, Decision, DecisionBackend, NativeBackend, SearchBounds};
pub use search::solve_decision;

/// Instance plus the distance table over its points of interest.
#[derive(Debug, Clone)]
pub struct TaskContext<'a> {
    pub inst: &'a Instance,
    pub oracle: DistanceOracle,
}

impl<'a> TaskContext<'a> {
    pub fn new(inst: &'a Instance) -> Result<Self, WorkspaceError> {
        Ok(TaskContext {
            inst,
            oracle: inst.distance_oracle()?,
        })
    }

    pub fn dist(&self, a: Cell, b: Cell) -> Option<Time> {
        self.oracle.dist(a, b)
    }
}

/// One robot action. Variant order is the canonical tie-breaking order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    Pick(usize),
    Drop(usize),
    DropIntermediate(usize, Cell),
    PickIntermediate(usize, Cell),
    Return,
    Stay,
}

impl Action {
    pub fn task(self) -> Option<usize> {
        match self {
            Action::Pick(m) | Action::Drop(m) | Action::DropIntermediate(m, _) | Action::PickIntermediate(m, _) => {
                Some(m)
            }
            Action::Return | Action::Stay => None,
        }
    }

    pub fn is_pick(self) -> bool {
        matches!(self, Action::Pick(_) | Action::PickIntermediate(..))
    }

    pub fn is_drop(self) -> bool {
        matches!(self, Action::Drop(_) | Action::DropIntermediate(..))
    }

    fn keyword(self) -> &'static str {
        match self {
            Action::Pick(_) => "PICK",
            Action::Drop(_) => "DROP",
            Action::DropIntermediate(..) => "IDROP",
            Action::PickIntermediate(..) => "IPICK",
            Action::Return => "RETURN",
            Action::Stay => "STAY",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RobotState {
    pub pos: Cell,
    pub time: Time,
    /// Task acted upon in the latest step.
    pub action: Option<usize>,
    /// Remaining weight capacity.
    pub capacity: u32,
}

/// Where a task's object is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TaskLoc {
    /// Untouched at its pickup cell.
    AtPickup,
    Carried(usize),
    /// Resting at a drop or intermediate cell, available from `since`.
    Placed {
        cell: Cell,
        since: Time,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StepState {
    pub step: usize,
    pub robots: Vec<RobotState>,
    pub tasks: Vec<TaskLoc>,
}

/// The action is not applicable in the given state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Inapplicable;

impl StepState {
    pub fn loc(&self, ctx: &TaskContext, m: usize) -> Option<Cell> {
        match self.tasks[m] {
            TaskLoc::AtPickup => Some(ctx.inst.tasks[m].pickup),
            TaskLoc::Carried(_) => None,
            TaskLoc::Placed { cell, .. } => Some(cell),
        }
    }

    pub fn loc_time(&self, m: usize) -> Option<Time> {
        match self.tasks[m] {
            TaskLoc::AtPickup => Some(0),
            TaskLoc::Carried(_) => None,
            TaskLoc::Placed { since, .. } => Some(since),
        }
    }

    pub fn carrier(&self, m: usize) -> Option<usize> {
        match self.tasks[m] {
            TaskLoc::Carried(i) => Some(i),
            _ => None,
        }
    }

    pub fn is_loaded(&self, i: usize) -> bool {
        self.tasks.contains(&TaskLoc::Carried(i))
    }

    /// Task parked at intermediate cell `n`, if any.
    pub fn parked_at(&self, n: Cell, ctx: &TaskContext) -> Option<usize> {
        self.tasks.iter().enumerate().find_map(|(m, t)| match *t {
            TaskLoc::Placed { cell, .. } if cell == n && cell != ctx.inst.tasks[m].drop => Some(m),
            _ => None,
        })
    }

    /// No intermediate cell holds more than one object.
    pub fn intermediates_exclusive(&self, ctx: &TaskContext) -> bool {
        let mut seen = HashSet::new();
        self.tasks.iter().all(|t| match *t {
            TaskLoc::Placed { cell, .. } if ctx.inst.workspace.is_intermediate(cell) => seen.insert(cell),
            _ => true,
        })
    }

    /// Applies one robot's action in place, without advancing the step
    /// counter and without the end-of-step intermediate exclusivity check.
    pub fn apply_action(&mut self, ctx: &TaskContext, i: usize, action: Action) -> Result<(), Inapplicable> {
        let inst = ctx.inst;
        let r = self.robots[i];
        let travel = |to: Cell| ctx.dist(r.pos, to).ok_or(Inapplicable);
        match action {
            Action::Stay => {
                self.robots[i].action = None;
            }
            Action::Return => {
                if self.is_loaded(i) {
                    return Err(Inapplicable);
                }
                let base = inst.robots[i].start;
                let d = travel(base)?;
                self.robots[i] = RobotState {
                    pos: base,
                    time: r.time + d,
                    action: None,
                    ..r
                };
            }
            Action::Pick(m) => {
                let task = &inst.tasks[m];
                if self.tasks[m] != TaskLoc::AtPickup || r.capacity < task.weight {
                    return Err(Inapplicable);
                }
                let d = travel(task.pickup)?;
                self.robots[i] = RobotState {
                    pos: task.pickup,
                    time: r.time + d + 1,
                    action: Some(m),
                    capacity: r.capacity - task.weight,
                };
                self.tasks[m] = TaskLoc::Carried(i);
            }
            Action::Drop(m) | Action::DropIntermediate(m, _) => {
                let task = &inst.tasks[m];
                if self.tasks[m] != TaskLoc::Carried(i) {
                    return Err(Inapplicable);
                }
                let target = match action {
                    Action::DropIntermediate(_, n) => {
                        if !inst.workspace.is_intermediate(n) {
                            return Err(Inapplicable);
                        }
                        n
                    }
                    _ => task.drop,
                };
                let d = travel(target)?;
                let time = r.time + d + 1;
                self.robots[i] = RobotState {
                    pos: target,
                    time,
                    action: Some(m),
                    capacity: r.capacity + task.weight,
                };
                self.tasks[m] = TaskLoc::Placed {
                    cell: target,
                    since: time,
                };
            }
            Action::PickIntermediate(m, n) => {
                let task = &inst.tasks[m];
                let since = match self.tasks[m] {
                    TaskLoc::Placed { cell, since } if cell == n && inst.workspace.is_intermediate(n) => since,
                    _ => return Err(Inapplicable),
                };
                if r.capacity < task.weight {
                    return Err(Inapplicable);
                }
                let d = travel(n)?;
                // Arrive-and-pick, or wait for the object: the dropping robot
                // needs a tick to clear the cell and the pick takes another.
                let time = (r.time + d + 1).max(since + 2);
                self.robots[i] = RobotState {
                    pos: n,
                    time,
                    action: Some(m),
                    capacity: r.capacity - task.weight,
                };
                self.tasks[m] = TaskLoc::Carried(i);
            }
        }
        Ok(())
    }
}

/// Start-of-plan state: every robot at its base at time zero, every object
/// at its pickup cell.
pub fn initial_state(inst: &Instance) -> StepState {
    StepState {
        step: 0,
        robots: inst
            .robots
            .iter()
            .map(|r| RobotState {
                pos: r.start,
                time: 0,
                action: None,
                capacity: r.capacity,
            })
            .collect(),
        tasks: vec![TaskLoc::AtPickup; inst.tasks.len()],
    }
}

fn single(ctx: &TaskContext, st: &StepState, i: usize, action: Action) -> Option<StepState> {
    let mut next = st.clone();
    next.apply_action(ctx, i, action).ok()?;
    if !next.intermediates_exclusive(ctx) {
        return None;
    }
    next.step += 1;
    Some(next)
}

/// Robot `i` moves to task `m`'s pickup cell and picks the object; every
/// other robot stays. `None` when inapplicable.
pub fn apply_pick(ctx: &TaskContext, st: &StepState, i: usize, m: usize) -> Option<StepState> {
    single(ctx, st, i, Action::Pick(m))
}

pub fn apply_drop(ctx: &TaskContext, st: &StepState, i: usize, m: usize) -> Option<StepState> {
    single(ctx, st, i, Action::Drop(m))
}

pub fn apply_stay(ctx: &TaskContext, st: &StepState, i: usize) -> StepState {
    single(ctx, st, i, Action::Stay).expect("stay is always applicable")
}

pub fn apply_return(ctx: &TaskContext, st: &StepState, i: usize) -> Option<StepState> {
    single(ctx, st, i, Action::Return)
}

pub fn apply_drop_intermediate(ctx: &TaskContext, st: &StepState, i: usize, m: usize, n: Cell) -> Option<StepState> {
    single(ctx, st, i, Action::DropIntermediate(m, n))
}

pub fn apply_pick_intermediate(ctx: &TaskContext, st: &StepState, i: usize, m: usize, n: Cell) -> Option<StepState> {
    single(ctx, st, i, Action::PickIntermediate(m, n))
}

/// One synchronous action step: `actions[i]` is robot `i`'s action. All
/// preconditions refer to the state before the step, so each object can be
/// touched by at most one robot.
pub fn apply_joint(ctx: &TaskContext, st: &StepState, actions: &[Action]) -> Option<StepState> {
    debug_assert_eq!(actions.len(), st.robots.len());
    let mut next = st.clone();
    let mut touched = HashSet::new();
    for (i, &a) in actions.iter().enumerate() {
        if let Some(m) = a.task() {
            if !touched.insert(m) {
                return None;
            }
        }
        next.apply_action(ctx, i, a).ok()?;
    }
    if !next.intermediates_exclusive(ctx) {
        return None;
    }
    next.step += 1;
    Some(next)
}

/// Every single-robot action applicable in `st`, grouped by robot and in
/// canonical order. A `Return` from the base is listed; it leaves the state
/// unchanged exactly like `Stay`.
pub fn enumerate_actions(ctx: &TaskContext, st: &StepState) -> Vec<(usize, Action)> {
    let inst = ctx.inst;
    let mut out = Vec::new();
    for i in 0..st.robots.len() {
        let mut candidates = Vec::new();
        for m in 0..inst.tasks.len() {
            candidates.push(Action::Pick(m));
            candidates.push(Action::Drop(m));
        }
        for m in 0..inst.tasks.len() {
            for &n in inst.workspace.intermediates() {
                candidates.push(Action::DropIntermediate(m, n));
                candidates.push(Action::PickIntermediate(m, n));
            }
        }
        candidates.push(Action::Return);
        candidates.push(Action::Stay);
        candidates.sort();
        for a in candidates {
            if single(ctx, st, i, a).is_some() {
                out.push((i, a));
            }
        }
    }
    out
}

/// All objects delivered, all robots home, all deadlines met.
pub fn is_goal(ctx: &TaskContext, st: &StepState) -> bool {
    let inst = ctx.inst;
    inst.tasks.iter().zip(&st.tasks).all(|(task, loc)| match *loc {
        TaskLoc::Placed { cell, since } => cell == task.drop && task.deadline.is_none_or(|d| since <= d),
        _ => false,
    }) && inst.robots.iter().zip(&st.robots).all(|(r, s)| s.pos == r.start)
}

/// Objective value of a final state: max or sum of completion times.
pub fn assignment_cost(st: &StepState, objective: Objective) -> Time {
    objective.combine(st.robots.iter().map(|r| r.time))
}

/// Positions and acted-upon tasks for every robot and action step `1..=z`.
/// Two assignments with equal fingerprints have identical variable values.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Fingerprint {
    pub pos: Vec<Vec<Cell>>,
    pub act: Vec<Vec<Option<usize>>>,
}

/// Assignments excluded from subsequent task-planner calls.
pub type ExclusionSet = HashSet<Fingerprint>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AssignmentStep {
    pub action: Action,
    /// Robot cell after the action.
    pub cell: Cell,
    /// Heuristic completion time of the action.
    pub time: Time,
}

/// A full task assignment: `z` actions per robot, with heuristic timestamps
/// computed from shortest distances that ignore robot-robot interaction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskAssignment {
    pub steps: Vec<Vec<AssignmentStep>>,
    pub robot_times: Vec<Time>,
    pub cost: Time,
}

impl TaskAssignment {
    /// Replays per-step joint actions from the initial state. Fails if any
    /// step is inapplicable or the final state is not a goal.
    pub fn replay(ctx: &TaskContext, joint: &[Vec<Action>]) -> Result<(Self, StepState), String> {
        let inst = ctx.inst;
        let mut st = initial_state(inst);
        let mut steps = vec![Vec::with_capacity(joint.len()); inst.robots.len()];
        for (j, actions) in joint.iter().enumerate() {
            st = apply_joint(ctx, &st, actions)
                .ok_or_else(|| format!("joint action at step {} is inapplicable", j + 1))?;
            for (i, &action) in actions.iter().enumerate() {
                steps[i].push(AssignmentStep {
                    action,
                    cell: st.robots[i].pos,
                    time: st.robots[i].time,
                });
            }
        }
        if !is_goal(ctx, &st) {
            return Err("final state is not a goal state".into());
        }
        let robot_times = st.robots.iter().map(|r| r.time).collect();
        let cost = assignment_cost(&st, inst.objective);
        Ok((
            TaskAssignment {
                steps,
                robot_times,
                cost,
            },
            st,
        ))
    }

    pub fn z(&self) -> usize {
        self.steps.first().map_or(0, Vec::len)
    }

    /// Joint actions per step, the inverse of [`TaskAssignment::replay`].
    pub fn joint_actions(&self) -> Vec<Vec<Action>> {
        (0..self.z())
            .map(|j| self.steps.iter().map(|s| s[j].action).collect())
            .collect()
    }

    pub fn fingerprint(&self) -> Fingerprint {
        Fingerprint {
            pos: self.steps.iter().map(|s| s.iter().map(|a| a.cell).collect()).collect(),
            act: self
                .steps
                .iter()
                .map(|s| s.iter().map(|a| a.action.task()).collect())
                .collect(),
        }
    }
}

/// One line per robot: `R<i>: PICK t<m>@(x,y)#<time> ...`.
impl fmt::Display for TaskAssignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, steps) in self.steps.iter().enumerate() {
            write!(f, "R{i}:")?;
            for s in steps {
                write!(f, " {}", s.action.keyword())?;
                if let Some(m) = s.action.task() {
                    write!(f, " t{m}")?;
                }
                write!(f, "@({},{})#{}", s.cell.x, s.cell.y, s.time)?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}
