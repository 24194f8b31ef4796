//! Problem instances: robots, tasks, objective and the action-step budget.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::workspace::{Cell, DistanceOracle, Workspace};

/// Time steps and costs are small non-negative integers.
pub type Time = u32;

/// Default wall-clock budget for one planner run.
pub const DEFAULT_TIMEOUT_S: f64 = 3600.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Objective {
    #[serde(rename = "makespan")]
    Makespan,
    #[serde(rename = "total_cost", alias = "total-cost")]
    TotalCost,
}

impl Objective {
    /// Folds per-robot completion times into the objective value.
    pub fn combine(self, times: impl IntoIterator<Item = Time>) -> Time {
        match self {
            Objective::Makespan => times.into_iter().max().unwrap_or(0),
            Objective::TotalCost => times.into_iter().sum(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Objective::Makespan => "makespan",
            Objective::TotalCost => "total_cost",
        }
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Robot {
    pub id: usize,
    /// Start cell, also the base the robot must return to.
    pub start: Cell,
    pub capacity: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Task {
    pub id: usize,
    pub pickup: Cell,
    pub drop: Cell,
    pub weight: u32,
    /// Latest time step at which the object may be delivered.
    pub deadline: Option<Time>,
}

impl Task {
    pub fn is_degenerate(&self) -> bool {
        self.pickup == self.drop
    }
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub workspace: Workspace,
    pub robots: Vec<Robot>,
    pub tasks: Vec<Task>,
    pub objective: Objective,
    /// Action steps available to every robot.
    pub z: usize,
    pub timeout_s: f64,
    /// Accept tasks whose pickup and drop cells coincide.
    pub allow_degenerate: bool,
}

impl Instance {
    /// Builds an instance with `z` set to [`min_feasible_z`] and the default
    /// timeout.
    pub fn new(workspace: Workspace, robots: Vec<Robot>, tasks: Vec<Task>, objective: Objective) -> Self {
        let z = min_feasible_z(tasks.len(), robots.len().max(1)).unwrap_or(1);
        Instance {
            workspace,
            robots,
            tasks,
            objective,
            z,
            timeout_s: DEFAULT_TIMEOUT_S,
            allow_degenerate: false,
        }
    }

    pub fn with_z(mut self, z: usize) -> Self {
        self.z = z;
        self
    }

    pub fn with_objective(mut self, objective: Objective) -> Self {
        self.objective = objective;
        self
    }

    /// Copy of the instance with intermediate transfer cells removed.
    pub fn without_intermediates(&self) -> Instance {
        Instance {
            workspace: self.workspace.without_intermediates(),
            ..self.clone()
        }
    }

    /// Every cell the task planner may move a robot to.
    pub fn points_of_interest(&self) -> Vec<Cell> {
        let mut pois: Vec<Cell> = self
            .robots
            .iter()
            .map(|r| r.start)
            .chain(self.tasks.iter().flat_map(|t| [t.pickup, t.drop]))
            .chain(self.workspace.intermediates().iter().copied())
            .collect();
        pois.sort();
        pois.dedup();
        pois
    }

    pub fn distance_oracle(&self) -> Result<DistanceOracle, crate::workspace::WorkspaceError> {
        DistanceOracle::build(&self.workspace, self.points_of_interest())
    }
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("at least one robot is required")]
    NoRobots,
}

/// Smallest action-step budget for which every task can be served:
/// `1 + ceil(tasks / robots) * 2`.
pub fn min_feasible_z(num_tasks: usize, num_robots: usize) -> Result<usize, ModelError> {
    if num_robots == 0 {
        return Err(ModelError::NoRobots);
    }
    Ok(1 + num_tasks.div_ceil(num_robots) * 2)
}

/// Budget that lets a single robot serve every task: `1 + 2 * tasks`.
pub fn exhaustive_z(num_tasks: usize) -> usize {
    1 + 2 * num_tasks
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Diagnostic {
    NoRobots,
    RobotIdNotDense { index: usize, id: usize },
    TaskIdNotDense { index: usize, id: usize },
    RobotStartBlocked { robot: usize, cell: Cell },
    SharedStart { robots: (usize, usize), cell: Cell },
    TaskCellBlocked { task: usize, cell: Cell },
    DegenerateTask { task: usize },
    IntermediateIsTaskCell { task: usize, cell: Cell },
    ExceedsCapacity { task: usize },
    PickupUnreachable { task: usize },
    DropUnreachable { task: usize },
    ZTooSmall { z: usize, min: usize },
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::NoRobots => write!(f, "instance has no robots"),
            Diagnostic::RobotIdNotDense { index, id } => {
                write!(f, "robot at position {index} has id {id}, ids must be 0..n-1 in order")
            }
            Diagnostic::TaskIdNotDense { index, id } => {
                write!(f, "task at position {index} has id {id}, ids must be 0..n-1 in order")
            }
            Diagnostic::RobotStartBlocked { robot, cell } => {
                write!(f, "robot {robot} starts on blocked or out-of-bounds cell {cell}")
            }
            Diagnostic::SharedStart { robots: (a, b), cell } => {
                write!(f, "robots {a} and {b} share start cell {cell}")
            }
            Diagnostic::TaskCellBlocked { task, cell } => {
                write!(f, "task {task} uses blocked or out-of-bounds cell {cell}")
            }
            Diagnostic::DegenerateTask { task } => {
                write!(f, "task {task} has identical pickup and drop cells")
            }
            Diagnostic::IntermediateIsTaskCell { task, cell } => {
                write!(f, "intermediate cell {cell} coincides with a cell of task {task}")
            }
            Diagnostic::ExceedsCapacity { task } => write!(f, "task {task} exceeds every capacity"),
            Diagnostic::PickupUnreachable { task } => {
                write!(f, "task {task} pickup unreachable by any capable robot")
            }
            Diagnostic::DropUnreachable { task } => write!(f, "task {task} drop unreachable"),
            Diagnostic::ZTooSmall { z, min } => {
                write!(f, "z = {z} is below the minimum feasible budget {min}")
            }
        }
    }
}

/// Checks every well-formedness rule and returns all violations.
pub fn validate_instance(inst: &Instance) -> Result<(), Vec<Diagnostic>> {
    let ws = &inst.workspace;
    let mut diags = Vec::new();
    if inst.robots.is_empty() {
        diags.push(Diagnostic::NoRobots);
    }
    for (index, r) in inst.robots.iter().enumerate() {
        if r.id != index {
            diags.push(Diagnostic::RobotIdNotDense { index, id: r.id });
        }
        if !ws.is_free(r.start) {
            diags.push(Diagnostic::RobotStartBlocked {
                robot: r.id,
                cell: r.start,
            });
        }
        for other in &inst.robots[..index] {
            if other.start == r.start {
                diags.push(Diagnostic::SharedStart {
                    robots: (other.id, r.id),
                    cell: r.start,
                });
            }
        }
    }
    let max_capacity = inst.robots.iter().map(|r| r.capacity).max();
    for (index, t) in inst.tasks.iter().enumerate() {
        if t.id != index {
            diags.push(Diagnostic::TaskIdNotDense { index, id: t.id });
        }
        let mut cells_ok = true;
        for cell in [t.pickup, t.drop] {
            if !ws.is_free(cell) {
                diags.push(Diagnostic::TaskCellBlocked { task: t.id, cell });
                cells_ok = false;
            } else if ws.is_intermediate(cell) {
                diags.push(Diagnostic::IntermediateIsTaskCell { task: t.id, cell });
            }
        }
        if t.is_degenerate() && !inst.allow_degenerate {
            diags.push(Diagnostic::DegenerateTask { task: t.id });
        }
        if max_capacity.is_some_and(|c| t.weight > c) {
            diags.push(Diagnostic::ExceedsCapacity { task: t.id });
        }
        if !cells_ok {
            continue;
        }
        let reachable_by_capable = inst.robots.iter().any(|r| {
            r.capacity >= t.weight
                && ws.is_free(r.start)
                && ws.shortest_dist(r.start, t.pickup).ok().flatten().is_some()
        });
        if max_capacity.is_some_and(|c| t.weight <= c) && !reachable_by_capable {
            diags.push(Diagnostic::PickupUnreachable { task: t.id });
        }
        if ws.shortest_dist(t.pickup, t.drop).ok().flatten().is_none() {
            diags.push(Diagnostic::DropUnreachable { task: t.id });
        }
    }
    if let Ok(min) = min_feasible_z(inst.tasks.len(), inst.robots.len()) {
        if inst.z < min {
            diags.push(Diagnostic::ZTooSmall { z: inst.z, min });
        }
    }
    if diags.is_empty() {
        Ok(())
    } else {
        Err(diags)
    }
}
