//! The task-planner / path-planner interaction loop.
//!
//! The task planner proposes assignments in nondecreasing heuristic cost.
//! Each one is realized by the path planner; the loop stops once no
//! unexplored assignment has a heuristic cost below the best plan cost.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::clock::Deadline;
use crate::error::PlanError;
use crate::model::{validate_instance, Instance, Time};
use crate::path::{compile_goal_sequences, GoalSequence, PathPlanner, Plan, PrecedenceEdge};
use crate::task::{
    solve_decision, task_planner, DecisionBackend, ExclusionSet, Fingerprint, TaskAssignment, TaskContext,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Optimal,
    TimeoutWithIncumbent,
    TimeoutNoPlan,
    Infeasible,
}

impl Outcome {
    pub fn name(self) -> &'static str {
        match self {
            Outcome::Optimal => "optimal",
            Outcome::TimeoutWithIncumbent => "timeout_incumbent",
            Outcome::TimeoutNoPlan => "timeout",
            Outcome::Infeasible => "infeasible",
        }
    }
}

/// One probed assignment. `plan_cost` is `None` when the assignment could
/// not be realized without collisions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub fingerprint: Fingerprint,
    pub task_cost: Time,
    pub plan_cost: Option<Time>,
}

#[derive(Debug, Clone)]
pub struct IntegratedResult {
    pub outcome: Outcome,
    pub plan: Option<Plan>,
    pub assignment: Option<TaskAssignment>,
    pub log: Vec<IterationRecord>,
    /// Path-planner invocations that missed the cache.
    pub path_planner_calls: usize,
}

impl IntegratedResult {
    pub fn cost(&self, inst: &Instance) -> Option<Time> {
        self.plan.as_ref().map(|p| p.cost(inst.objective))
    }
}

type CacheKey = (Vec<GoalSequence>, Vec<PrecedenceEdge>);

/// Runs the interaction loop under one shared deadline.
pub fn integrated_planner<B, P>(
    inst: &Instance,
    backend: &mut B,
    path_planner: &mut P,
    deadline: &Deadline,
) -> Result<IntegratedResult, PlanError>
where
    B: DecisionBackend + ?Sized,
    P: PathPlanner + ?Sized,
{
    if let Err(diags) = validate_instance(inst) {
        let msgs: Vec<String> = diags.iter().map(ToString::to_string).collect();
        return Err(PlanError::Invalid(msgs.join("; ")));
    }
    let ctx = TaskContext::new(inst)?;
    let mut cur_task_cost: Time = 0;
    let mut opt_plan_cost: Option<Time> = None;
    let mut opt: Option<(Plan, TaskAssignment)> = None;
    let mut excluded = ExclusionSet::new();
    let mut log = Vec::new();
    let mut cache: HashMap<CacheKey, Option<Plan>> = HashMap::new();
    let mut calls = 0;

    let finish = |outcome, opt: Option<(Plan, TaskAssignment)>, log, calls| {
        let (plan, assignment) = opt.map_or((None, None), |(p, a)| (Some(p), Some(a)));
        IntegratedResult {
            outcome,
            plan,
            assignment,
            log,
            path_planner_calls: calls,
        }
    };
    let timed_out = |opt: Option<(Plan, TaskAssignment)>, log, calls| {
        let outcome = if opt.is_some() {
            Outcome::TimeoutWithIncumbent
        } else {
            Outcome::TimeoutNoPlan
        };
        Ok(finish(outcome, opt, log, calls))
    };

    while opt_plan_cost.is_none_or(|o| cur_task_cost < o) {
        let assignment = match task_planner(backend, &ctx, &excluded, cur_task_cost, opt_plan_cost, deadline) {
            Ok(Some(a)) => a,
            Ok(None) => break,
            Err(PlanError::Timeout) => return timed_out(opt, log, calls),
            Err(e) => return Err(e),
        };
        let key = compile_goal_sequences(&assignment, inst).map_err(|e| PlanError::Assignment(e.to_string()))?;
        let plan = match cache.get(&key) {
            Some(p) => p.clone(),
            None => {
                calls += 1;
                match path_planner.plan(inst, &assignment, deadline) {
                    Ok(p) => {
                        cache.insert(key, p.clone());
                        p
                    }
                    Err(PlanError::Timeout) => return timed_out(opt, log, calls),
                    Err(e) => return Err(e),
                }
            }
        };
        let task_cost = assignment.cost;
        let plan_cost = plan.as_ref().map(|p| p.cost(inst.objective));
        if cur_task_cost < task_cost {
            cur_task_cost = task_cost;
            excluded.clear();
        }
        let fingerprint = assignment.fingerprint();
        excluded.insert(fingerprint.clone());
        log.push(IterationRecord {
            fingerprint,
            task_cost,
            plan_cost,
        });
        if let (Some(pc), Some(plan)) = (plan_cost, plan) {
            if opt_plan_cost.is_none_or(|o| pc < o) {
                opt_plan_cost = Some(pc);
                opt = Some((plan, assignment));
            }
        }
    }
    let outcome = if opt.is_some() {
        Outcome::Optimal
    } else {
        Outcome::Infeasible
    };
    Ok(finish(outcome, opt, log, calls))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AuditFinding {
    /// A probe whose realized cost undercuts its heuristic cost.
    HeuristicAbovePlan {
        index: usize,
        task_cost: Time,
        plan_cost: Time,
    },
    DuplicateProbe {
        index: usize,
        first: usize,
    },
    /// Heuristic costs must be nondecreasing across probes.
    CostRegression {
        index: usize,
    },
    /// The claimed optimum is not the best realized cost in the log.
    CostMismatch {
        claimed: Option<Time>,
        best_logged: Option<Time>,
    },
    /// An assignment cheaper than the claimed optimum was never probed.
    Unprobed {
        assignment: String,
    },
}

impl std::fmt::Display for AuditFinding {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AuditFinding::HeuristicAbovePlan {
                index,
                task_cost,
                plan_cost,
            } => write!(
                f,
                "probe {index}: heuristic cost {task_cost} exceeds plan cost {plan_cost}"
            ),
            AuditFinding::DuplicateProbe { index, first } => write!(f, "probe {index} repeats probe {first}"),
            AuditFinding::CostRegression { index } => write!(f, "probe {index}: heuristic cost decreased"),
            AuditFinding::CostMismatch { claimed, best_logged } => {
                write!(
                    f,
                    "claimed cost {claimed:?} but best logged plan cost is {best_logged:?}"
                )
            }
            AuditFinding::Unprobed { assignment } => {
                write!(f, "unprobed cheaper assignment:\n{assignment}")
            }
        }
    }
}

/// Re-checks an iteration log against a claimed optimum. The completeness
/// check asks the native decision procedure for any assignment cheaper than
/// `claimed` outside the logged fingerprints. A claim of `None` (no plan
/// exists) requires that every assignment was probed.
pub fn audit_log(
    inst: &Instance,
    log: &[IterationRecord],
    claimed: Option<Time>,
    deadline: &Deadline,
) -> Result<Vec<AuditFinding>, PlanError> {
    let mut findings = Vec::new();
    let mut seen: HashMap<&Fingerprint, usize> = HashMap::new();
    for (index, rec) in log.iter().enumerate() {
        if let Some(pc) = rec.plan_cost {
            if rec.task_cost > pc {
                findings.push(AuditFinding::HeuristicAbovePlan {
                    index,
                    task_cost: rec.task_cost,
                    plan_cost: pc,
                });
            }
        }
        if let Some(&first) = seen.get(&rec.fingerprint) {
            findings.push(AuditFinding::DuplicateProbe { index, first });
        } else {
            seen.insert(&rec.fingerprint, index);
        }
        if index > 0 && rec.task_cost < log[index - 1].task_cost {
            findings.push(AuditFinding::CostRegression { index });
        }
    }
    let best_logged = log.iter().filter_map(|r| r.plan_cost).min();
    if best_logged != claimed {
        findings.push(AuditFinding::CostMismatch { claimed, best_logged });
    }
    if claimed != Some(0) {
        let ctx = TaskContext::new(inst)?;
        let probed: ExclusionSet = log.iter().map(|r| r.fingerprint.clone()).collect();
        if let Some(a) = solve_decision(&ctx, &probed, 0, claimed.map(|c| c - 1), deadline)? {
            findings.push(AuditFinding::Unprobed {
                assignment: a.to_string(),
            });
        }
    }
    Ok(findings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Objective, Robot, Task};
    use crate::path::CbsPlanner;
    use crate::task::NativeBackend;
    use crate::workspace::{Cell, Workspace};

    /// Claims every assignment is realized at exactly its heuristic cost.
    struct Exact {
        calls: usize,
    }

    impl PathPlanner for Exact {
        fn plan(&mut self, inst: &Instance, a: &TaskAssignment, _: &Deadline) -> Result<Option<Plan>, PlanError> {
            self.calls += 1;
            let trajectories = a
                .robot_times
                .iter()
                .zip(&inst.robots)
                .map(|(&t, r)| {
                    vec![
                        crate::path::PlanStep {
                            cell: r.start,
                            label: crate::path::Label::Start
                        };
                        t as usize + 1
                    ]
                })
                .collect();
            Ok(Some(Plan::from_trajectories(trajectories, inst.tasks.len())))
        }
    }

    fn small() -> Instance {
        let c = Cell::new;
        Instance::new(
            Workspace::open(4, 4),
            vec![
                Robot {
                    id: 0,
                    start: c(0, 0),
                    capacity: 1,
                },
                Robot {
                    id: 1,
                    start: c(3, 3),
                    capacity: 1,
                },
            ],
            vec![
                Task {
                    id: 0,
                    pickup: c(1, 0),
                    drop: c(2, 0),
                    weight: 1,
                    deadline: None,
                },
                Task {
                    id: 1,
                    pickup: c(3, 2),
                    drop: c(3, 1),
                    weight: 1,
                    deadline: None,
                },
            ],
            Objective::Makespan,
        )
    }

    #[test]
    fn exact_path_planner_needs_one_call() {
        let inst = small();
        let mut pp = Exact { calls: 0 };
        let r = integrated_planner(&inst, &mut NativeBackend, &mut pp, &Deadline::never()).unwrap();
        assert_eq!(pp.calls, 1);
        assert_eq!(r.outcome, Outcome::Optimal);
        assert_eq!(r.log.len(), 1);
    }

    #[test]
    fn cbs_run_passes_audit() {
        let inst = small();
        let r = integrated_planner(
            &inst,
            &mut NativeBackend,
            &mut CbsPlanner::default(),
            &Deadline::never(),
        )
        .unwrap();
        assert_eq!(r.outcome, Outcome::Optimal);
        let cost = r.cost(&inst).unwrap();
        // r0: 1+1, 1+1, 2 = 6; r1: 1+1, 1+1, 2 = 6.
        assert_eq!(cost, 6);
        assert!(audit_log(&inst, &r.log, Some(cost), &Deadline::never())
            .unwrap()
            .is_empty());
        assert!(!audit_log(&inst, &r.log, Some(cost + 1), &Deadline::never())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn expired_clock_reports_timeout() {
        let inst = small();
        let r = integrated_planner(
            &inst,
            &mut NativeBackend,
            &mut CbsPlanner::default(),
            &Deadline::after_secs(0.0),
        )
        .unwrap();
        assert_eq!(r.outcome, Outcome::TimeoutNoPlan);
        assert!(r.plan.is_none());
    }
}
