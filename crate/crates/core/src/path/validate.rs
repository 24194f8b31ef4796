//! Plan checking that relies only on the instance and the labelled
//! trajectories, never on planner internals.

use thiserror::Error;

use crate::model::{Instance, Time};
use crate::workspace::Cell;

use super::{detect_conflict, Conflict, Label, Plan, PRECEDENCE_GAP};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlanViolation {
    #[error("plan has {found} trajectories, instance has {expected} robots")]
    RobotCount { expected: usize, found: usize },
    #[error("robot {robot} has an empty trajectory")]
    Empty { robot: usize },
    #[error("robot {robot} does not start at its base")]
    BadStart { robot: usize },
    #[error("robot {robot} ends away from its base")]
    BadEnd { robot: usize },
    #[error("robot {robot} at t={t}: cell {cell} is not free")]
    Blocked { robot: usize, t: Time, cell: Cell },
    #[error("robot {robot} at t={t}: jump to {cell}")]
    Jump { robot: usize, t: Time, cell: Cell },
    #[error("robot {robot} at t={t}: {label} without dwelling on the cell")]
    NoDwell { robot: usize, t: Time, label: String },
    #[error("robot {robot} at t={t}: {label} is not possible here")]
    BadAction { robot: usize, t: Time, label: String },
    #[error("robot {robot} at t={t}: capacity exceeded")]
    Capacity { robot: usize, t: Time },
    #[error("robots {a} and {b} collide at {cell}, t={t}")]
    VertexCollision { a: usize, b: usize, cell: Cell, t: Time },
    #[error("robots {a} and {b} swap {from} and {to} between t={t} and t={}", t + 1)]
    Swap {
        a: usize,
        b: usize,
        from: Cell,
        to: Cell,
        t: Time,
    },
    #[error("task {task} is never delivered")]
    Undelivered { task: usize },
    #[error("task {task} delivered at {at}, after its deadline {deadline}")]
    Late { task: usize, at: Time, deadline: Time },
    #[error("robot {robot} still carries task {task} at the end")]
    StillCarried { robot: usize, task: usize },
    #[error("reported {what} {reported} differs from trajectories ({actual})")]
    Metric {
        what: &'static str,
        reported: String,
        actual: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Obj {
    AtPickup,
    Carried(usize),
    Placed { cell: Cell, since: Time },
}

/// Checks collision freedom, movement rules, pick and drop semantics,
/// capacities, deadlines and the reported metrics.
pub fn validate_plan(inst: &Instance, plan: &Plan) -> Result<(), Vec<PlanViolation>> {
    let mut out = Vec::new();
    let ws = &inst.workspace;
    if plan.trajectories.len() != inst.robots.len() {
        return Err(vec![PlanViolation::RobotCount {
            expected: inst.robots.len(),
            found: plan.trajectories.len(),
        }]);
    }
    for (i, traj) in plan.trajectories.iter().enumerate() {
        let base = inst.robots[i].start;
        let Some(first) = traj.first() else {
            out.push(PlanViolation::Empty { robot: i });
            continue;
        };
        if first.cell != base {
            out.push(PlanViolation::BadStart { robot: i });
        }
        if traj.last().is_some_and(|s| s.cell != base) {
            out.push(PlanViolation::BadEnd { robot: i });
        }
        for (t, s) in traj.iter().enumerate() {
            let t_ = t as Time;
            if !ws.is_free(s.cell) {
                out.push(PlanViolation::Blocked {
                    robot: i,
                    t: t_,
                    cell: s.cell,
                });
            }
            if t > 0 {
                let prev = traj[t - 1].cell;
                if !prev.is_adjacent_or_equal(s.cell) {
                    out.push(PlanViolation::Jump {
                        robot: i,
                        t: t_,
                        cell: s.cell,
                    });
                }
                if s.label.task().is_some() && prev != s.cell {
                    out.push(PlanViolation::NoDwell {
                        robot: i,
                        t: t_,
                        label: s.label.to_string(),
                    });
                }
            }
        }
    }
    if !out.is_empty() {
        return Err(out);
    }

    match detect_conflict(&plan.cells()) {
        Some(Conflict::Vertex { a, b, cell, t }) => out.push(PlanViolation::VertexCollision { a, b, cell, t }),
        Some(Conflict::Edge { a, b, from, to, t }) => out.push(PlanViolation::Swap { a, b, from, to, t }),
        None => {}
    }

    // Replay object handling in time order.
    let mut events: Vec<(usize, usize, Label, Cell)> = Vec::new();
    for (i, traj) in plan.trajectories.iter().enumerate() {
        for (t, s) in traj.iter().enumerate() {
            if s.label.task().is_some() {
                events.push((t, i, s.label, s.cell));
            }
        }
    }
    events.sort_by_key(|e| (e.0, e.1));
    let mut objs = vec![Obj::AtPickup; inst.tasks.len()];
    let mut load = vec![0u32; inst.robots.len()];
    let mut delivered = vec![None; inst.tasks.len()];
    for (t, i, label, cell) in events {
        let t = t as Time;
        let m = label.task().unwrap_or(usize::MAX);
        let bad = || PlanViolation::BadAction {
            robot: i,
            t,
            label: label.to_string(),
        };
        let Some(task) = inst.tasks.get(m) else {
            out.push(bad());
            continue;
        };
        let ok = match (label, objs[m]) {
            (Label::Pick(_), Obj::AtPickup) if cell == task.pickup => {
                load[i] += task.weight;
                objs[m] = Obj::Carried(i);
                true
            }
            (Label::InterPick(_), Obj::Placed { cell: at, since })
                if at == cell && at != task.drop && t >= since + PRECEDENCE_GAP =>
            {
                load[i] += task.weight;
                objs[m] = Obj::Carried(i);
                true
            }
            (Label::Drop(_), Obj::Carried(r)) if r == i && cell == task.drop => {
                load[i] -= task.weight;
                objs[m] = Obj::Placed { cell, since: t };
                delivered[m] = Some(t);
                true
            }
            (Label::InterDrop(_), Obj::Carried(r))
                if r == i
                    && ws.is_intermediate(cell)
                    && !objs
                        .iter()
                        .any(|o| matches!(o, Obj::Placed { cell: at, .. } if *at == cell)) =>
            {
                load[i] -= task.weight;
                objs[m] = Obj::Placed { cell, since: t };
                true
            }
            _ => false,
        };
        if !ok {
            out.push(bad());
        } else if load[i] > inst.robots[i].capacity {
            out.push(PlanViolation::Capacity { robot: i, t });
        }
    }
    for (m, task) in inst.tasks.iter().enumerate() {
        match (objs[m], delivered[m]) {
            (Obj::Carried(r), _) => out.push(PlanViolation::StillCarried { robot: r, task: m }),
            (Obj::Placed { cell, .. }, Some(at)) if cell == task.drop => {
                if let Some(d) = task.deadline.filter(|&d| at > d) {
                    out.push(PlanViolation::Late {
                        task: m,
                        at,
                        deadline: d,
                    });
                }
            }
            _ => out.push(PlanViolation::Undelivered { task: m }),
        }
    }

    let lens: Vec<Time> = (0..plan.trajectories.len()).map(|i| plan.robot_cost(i)).collect();
    let makespan = lens.iter().copied().max().unwrap_or(0);
    let total: Time = lens.iter().sum();
    if plan.makespan != makespan {
        out.push(PlanViolation::Metric {
            what: "makespan",
            reported: plan.makespan.to_string(),
            actual: makespan.to_string(),
        });
    }
    if plan.total_cost != total {
        out.push(PlanViolation::Metric {
            what: "total cost",
            reported: plan.total_cost.to_string(),
            actual: total.to_string(),
        });
    }
    if plan.completions != delivered {
        out.push(PlanViolation::Metric {
            what: "completions",
            reported: format!("{:?}", plan.completions),
            actual: format!("{delivered:?}"),
        });
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Objective, Robot, Task};
    use crate::path::PlanStep;
    use crate::workspace::Workspace;

    fn c(x: i32, y: i32) -> Cell {
        Cell::new(x, y)
    }

    fn strip() -> Instance {
        Instance::new(
            Workspace::open(1, 4),
            vec![Robot {
                id: 0,
                start: c(0, 0),
                capacity: 1,
            }],
            vec![Task {
                id: 0,
                pickup: c(0, 1),
                drop: c(0, 2),
                weight: 1,
                deadline: Some(4),
            }],
            Objective::Makespan,
        )
    }

    fn steps(steps_at: &[(i32, Label)]) -> Vec<PlanStep> {
        steps_at
            .iter()
            .map(|&(y, label)| PlanStep { cell: c(0, y), label })
            .collect()
    }

    fn good() -> Vec<PlanStep> {
        steps(&[
            (0, Label::Start),
            (1, Label::Move),
            (1, Label::Pick(0)),
            (2, Label::Move),
            (2, Label::Drop(0)),
            (1, Label::Move),
            (0, Label::Return),
        ])
    }

    #[test]
    fn accepts_valid_plan() {
        let plan = Plan::from_trajectories(vec![good()], 1);
        assert_eq!(validate_plan(&strip(), &plan), Ok(()));
    }

    #[test]
    fn rejects_missing_dwell_and_late_delivery() {
        let mut traj = good();
        traj[2].label = Label::Move;
        traj[3].label = Label::Pick(0);
        let plan = Plan::from_trajectories(vec![traj], 1);
        let errs = validate_plan(&strip(), &plan).unwrap_err();
        assert!(errs.iter().any(|e| matches!(e, PlanViolation::NoDwell { .. })));

        let mut slow = good();
        slow.insert(1, slow[0]);
        slow[1].label = Label::Move;
        let plan = Plan::from_trajectories(vec![slow], 1);
        let errs = validate_plan(&strip(), &plan).unwrap_err();
        assert_eq!(
            errs,
            vec![PlanViolation::Late {
                task: 0,
                at: 5,
                deadline: 4
            }]
        );
    }

    #[test]
    fn transfer_cell_holds_one_object() {
        let inst = Instance::new(
            Workspace::new(1, 6, [], [c(0, 3)]).unwrap(),
            vec![Robot {
                id: 0,
                start: c(0, 0),
                capacity: 2,
            }],
            vec![
                Task {
                    id: 0,
                    pickup: c(0, 1),
                    drop: c(0, 5),
                    weight: 1,
                    deadline: None,
                },
                Task {
                    id: 1,
                    pickup: c(0, 2),
                    drop: c(0, 4),
                    weight: 1,
                    deadline: None,
                },
            ],
            Objective::Makespan,
        );
        let traj = steps(&[
            (0, Label::Start),
            (1, Label::Move),
            (1, Label::Pick(0)),
            (2, Label::Move),
            (2, Label::Pick(1)),
            (3, Label::Move),
            (3, Label::InterDrop(0)),
            (3, Label::InterDrop(1)),
            (2, Label::Move),
            (1, Label::Move),
            (0, Label::Return),
        ]);
        let errs = validate_plan(&inst, &Plan::from_trajectories(vec![traj], 2)).unwrap_err();
        assert!(errs.contains(&PlanViolation::BadAction {
            robot: 0,
            t: 7,
            label: Label::InterDrop(1).to_string(),
        }));
    }

    #[test]
    fn rejects_tampered_metrics() {
        let mut plan = Plan::from_trajectories(vec![good()], 1);
        plan.makespan = 5;
        assert!(validate_plan(&strip(), &plan).is_err());
    }
}
