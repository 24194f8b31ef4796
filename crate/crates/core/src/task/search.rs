//! Native decision procedure: depth-first branch and bound over joint action
//! steps.

use crate::clock::Deadline;
use crate::error::PlanError;
use crate::model::{Objective, Time};
use crate::workspace::Cell;

use super::{
    assignment_cost, initial_state, is_goal, Action, AssignmentStep, ExclusionSet, StepState, TaskAssignment,
    TaskContext, TaskLoc,
};

const TIMEOUT_POLL: u64 = 1 << 12;

/// Finds an assignment with cost in `[lo, hi]` (`hi = None` is unbounded)
/// whose fingerprint is not excluded. Candidates are explored in canonical
/// action order, so the result is deterministic.
pub fn solve_decision(
    ctx: &TaskContext,
    excl: &ExclusionSet,
    lo: Time,
    hi: Option<Time>,
    deadline: &Deadline,
) -> Result<Option<TaskAssignment>, PlanError> {
    if hi.is_some_and(|h| h < lo) {
        return Ok(None);
    }
    let inst = ctx.inst;
    let mut search = Search {
        ctx,
        excl,
        lo,
        hi: hi.unwrap_or(Time::MAX),
        deadline,
        nodes: 0,
        state: initial_state(inst),
        touched: vec![false; inst.tasks.len()],
        history: vec![Vec::with_capacity(inst.z); inst.robots.len()],
        candidates: (0..inst.robots.len()).map(|_| Vec::new()).collect(),
        min_return: inst
            .tasks
            .iter()
            .map(|t| inst.robots.iter().filter_map(|r| ctx.dist(t.drop, r.start)).min())
            .collect(),
        found: None,
    };
    if inst.z == 0 {
        return Ok(search.leaf_ok().then(|| search.build()));
    }
    if search.prune() {
        return Ok(None);
    }
    search.dfs(0)?;
    Ok(search.found)
}

struct Search<'a, 'b> {
    ctx: &'b TaskContext<'a>,
    excl: &'b ExclusionSet,
    lo: Time,
    hi: Time,
    deadline: &'b Deadline,
    nodes: u64,
    state: StepState,
    touched: Vec<bool>,
    history: Vec<Vec<AssignmentStep>>,
    /// Per-depth scratch buffers for candidate actions.
    candidates: Vec<Vec<Action>>,
    /// Shortest return trip from each drop cell to any base.
    min_return: Vec<Option<Time>>,
    found: Option<TaskAssignment>,
}

impl Search<'_, '_> {
    fn dfs(&mut self, robot: usize) -> Result<bool, PlanError> {
        self.nodes += 1;
        if self.nodes.is_multiple_of(TIMEOUT_POLL) && self.deadline.expired() {
            return Err(PlanError::Timeout);
        }
        let n_robots = self.state.robots.len();
        if robot == n_robots {
            return self.finish_step();
        }
        let mut cands = std::mem::take(&mut self.candidates[robot]);
        self.collect_candidates(robot, &mut cands);
        let mut result = Ok(false);
        for &action in &cands {
            let saved_robot = self.state.robots[robot];
            let task = action.task();
            let saved_task = task.map(|m| self.state.tasks[m]);
            if self.state.apply_action(self.ctx, robot, action).is_err() {
                continue;
            }
            if let Some(m) = task {
                self.touched[m] = true;
            }
            let r = self.state.robots[robot];
            self.history[robot].push(AssignmentStep {
                action,
                cell: r.pos,
                time: r.time,
            });
            let outcome = self.dfs(robot + 1);
            self.history[robot].pop();
            if let (Some(m), Some(t)) = (task, saved_task) {
                self.touched[m] = false;
                self.state.tasks[m] = t;
            }
            self.state.robots[robot] = saved_robot;
            match outcome {
                Ok(false) => {}
                other => {
                    result = other;
                    break;
                }
            }
        }
        self.candidates[robot] = cands;
        result
    }

    fn collect_candidates(&self, i: usize, out: &mut Vec<Action>) {
        out.clear();
        let inst = self.ctx.inst;
        let st = &self.state;
        let r = &st.robots[i];
        let intermediates = inst.workspace.intermediates();
        for (m, loc) in st.tasks.iter().enumerate() {
            if self.touched[m] {
                continue;
            }
            match *loc {
                TaskLoc::AtPickup => {
                    if r.capacity >= inst.tasks[m].weight {
                        out.push(Action::Pick(m));
                    }
                }
                TaskLoc::Carried(c) if c == i => {
                    out.push(Action::Drop(m));
                    for &n in intermediates {
                        out.push(Action::DropIntermediate(m, n));
                    }
                }
                TaskLoc::Placed { cell, .. } if cell != inst.tasks[m].drop && r.capacity >= inst.tasks[m].weight => {
                    out.push(Action::PickIntermediate(m, cell));
                }
                _ => {}
            }
        }
        // A return from the base is indistinguishable from staying.
        if r.pos != inst.robots[i].start {
            out.push(Action::Return);
        }
        out.push(Action::Stay);
        out.sort();
    }

    fn finish_step(&mut self) -> Result<bool, PlanError> {
        if !self.state.intermediates_exclusive(self.ctx) {
            return Ok(false);
        }
        self.state.step += 1;
        let touched = std::mem::replace(&mut self.touched, vec![false; self.state.tasks.len()]);
        let result = if self.state.step == self.ctx.inst.z {
            if self.leaf_ok() {
                self.found = Some(self.build());
                Ok(true)
            } else {
                Ok(false)
            }
        } else if self.prune() {
            Ok(false)
        } else {
            self.dfs(0)
        };
        self.touched = touched;
        self.state.step -= 1;
        result
    }

    fn leaf_ok(&self) -> bool {
        if !is_goal(self.ctx, &self.state) {
            return false;
        }
        let cost = assignment_cost(&self.state, self.ctx.inst.objective);
        if cost < self.lo || cost > self.hi {
            return false;
        }
        self.excl.is_empty() || !self.excl.contains(&self.build().fingerprint())
    }

    fn build(&self) -> TaskAssignment {
        TaskAssignment {
            steps: self.history.clone(),
            robot_times: self.state.robots.iter().map(|r| r.time).collect(),
            cost: assignment_cost(&self.state, self.ctx.inst.objective),
        }
    }

    /// True when no completion of the current state can be accepted.
    fn prune(&self) -> bool {
        let ctx = self.ctx;
        let inst = ctx.inst;
        let st = &self.state;
        let remaining = inst.z - st.step;

        // Action-step budget.
        let mut carried = vec![0usize; st.robots.len()];
        let mut needed = 0usize;
        for loc in &st.tasks {
            match *loc {
                TaskLoc::AtPickup => needed += 2,
                TaskLoc::Carried(i) => {
                    carried[i] += 1;
                    needed += 1;
                }
                TaskLoc::Placed { .. } => {}
            }
        }
        for (m, loc) in st.tasks.iter().enumerate() {
            if let TaskLoc::Placed { cell, .. } = *loc {
                if cell != inst.tasks[m].drop {
                    needed += 2;
                }
            }
        }
        if needed > remaining * st.robots.len() {
            return true;
        }
        for (i, r) in st.robots.iter().enumerate() {
            let away = usize::from(r.pos != inst.robots[i].start);
            if carried[i].max(away) > remaining {
                return true;
            }
        }

        // Per-robot earliest possible return home.
        let mut home = Vec::with_capacity(st.robots.len());
        for (i, r) in st.robots.iter().enumerate() {
            match ctx.dist(r.pos, inst.robots[i].start) {
                Some(d) => home.push(r.time + d),
                None => return true,
            }
        }

        // Earliest delivery of each object, ignoring which robot does it.
        let mut makespan_lb = home.iter().copied().max().unwrap_or(0);
        let mut extra_total: Time = 0;
        for (m, loc) in st.tasks.iter().enumerate() {
            let task = &inst.tasks[m];
            let delivered = match *loc {
                TaskLoc::Placed { cell, since } if cell == task.drop => Some(since),
                _ => None,
            };
            if let Some(since) = delivered {
                if task.deadline.is_some_and(|d| since > d) {
                    return true;
                }
                continue;
            }
            let from_cell = |cell: Cell, ready: Time| -> Option<Time> {
                let to_drop = ctx.dist(cell, task.drop)?;
                st.robots
                    .iter()
                    .filter_map(|r| {
                        let reach = ctx.dist(r.pos, cell)?;
                        Some((r.time + reach + 1).max(ready))
                    })
                    .min()
                    .map(|picked| picked + to_drop + 1)
            };
            let delivery = match *loc {
                TaskLoc::AtPickup => from_cell(task.pickup, 0),
                TaskLoc::Carried(i) => {
                    let r = &st.robots[i];
                    ctx.dist(r.pos, task.drop).map(|d| r.time + d + 1)
                }
                TaskLoc::Placed { cell, since } => from_cell(cell, since + 2),
            };
            let Some(delivery) = delivery else {
                return true;
            };
            if task.deadline.is_some_and(|d| delivery > d) {
                return true;
            }
            let Some(back) = self.min_return[m] else {
                return true;
            };
            makespan_lb = makespan_lb.max(delivery + back);
            if inst.objective == Objective::TotalCost {
                let extra = inst
                    .robots
                    .iter()
                    .enumerate()
                    .filter_map(|(k, rk)| {
                        let back_k = ctx.dist(task.drop, rk.start)?;
                        Some((delivery + back_k).saturating_sub(home[k]))
                    })
                    .min()
                    .unwrap_or(0);
                extra_total = extra_total.max(extra);
            }
        }
        let lb = match inst.objective {
            Objective::Makespan => makespan_lb,
            Objective::TotalCost => home.iter().sum::<Time>() + extra_total,
        };
        lb > self.hi
    }
}
