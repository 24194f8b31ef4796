//! Cost-bounded task planning by binary search over decision calls.

use crate::clock::Deadline;
use crate::error::PlanError;
use crate::model::{Objective, Time};

use super::{solve_decision, ExclusionSet, TaskAssignment, TaskContext};

#[derive(Debug, Clone)]
pub enum Decision {
    Sat(TaskAssignment),
    Unsat,
}

/// A procedure that decides whether an assignment with cost in `[lo, hi]`
/// and a non-excluded fingerprint exists, and returns a witness if so.
pub trait DecisionBackend {
    fn decide(
        &mut self,
        ctx: &TaskContext,
        excl: &ExclusionSet,
        lo: Time,
        hi: Option<Time>,
        deadline: &Deadline,
    ) -> Result<Decision, PlanError>;
}

/// The built-in branch-and-bound engine.
#[derive(Debug, Clone, Copy, Default)]
pub struct NativeBackend;

impl DecisionBackend for NativeBackend {
    fn decide(
        &mut self,
        ctx: &TaskContext,
        excl: &ExclusionSet,
        lo: Time,
        hi: Option<Time>,
        deadline: &Deadline,
    ) -> Result<Decision, PlanError> {
        Ok(match solve_decision(ctx, excl, lo, hi, deadline)? {
            Some(a) => Decision::Sat(a),
            None => Decision::Unsat,
        })
    }
}

/// Binary-search window. `lb <= ub + 1` holds throughout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchBounds {
    pub lb: i64,
    pub ub: i64,
}

impl SearchBounds {
    pub fn is_open(&self) -> bool {
        self.lb <= self.ub
    }

    pub fn mid(&self) -> i64 {
        self.lb + (self.ub - self.lb) / 2
    }
}

/// Certified over-estimate of any assignment cost: in each action step the
/// latest robot clock grows by at most the largest distance plus two.
pub fn cost_ceiling(ctx: &TaskContext) -> Time {
    let inst = ctx.inst;
    let per_robot = inst.z as Time * (ctx.oracle.max_finite() + 2);
    match inst.objective {
        Objective::Makespan => per_robot,
        Objective::TotalCost => per_robot * inst.robots.len() as Time,
    }
}

/// Minimum-cost assignment with cost in `[lb, ub]` outside `excl`, or `None`.
/// `ub = None` stands for an unbounded window.
pub fn task_planner<B: DecisionBackend + ?Sized>(
    backend: &mut B,
    ctx: &TaskContext,
    excl: &ExclusionSet,
    lb: Time,
    ub: Option<Time>,
    deadline: &Deadline,
) -> Result<Option<TaskAssignment>, PlanError> {
    if let Decision::Unsat = backend.decide(ctx, excl, 0, None, deadline)? {
        return Ok(None);
    }
    let mut bounds = SearchBounds {
        lb: lb.into(),
        ub: ub.unwrap_or_else(|| cost_ceiling(ctx)).into(),
    };
    let mut best = None;
    while bounds.is_open() {
        let mid = bounds.mid();
        match backend.decide(ctx, excl, bounds.lb as Time, Some(mid as Time), deadline)? {
            Decision::Sat(a) => {
                bounds.ub = i64::from(a.cost) - 1;
                best = Some(a);
            }
            Decision::Unsat => bounds.lb = mid + 1,
        }
    }
    Ok(best)
}
