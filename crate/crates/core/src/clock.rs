//! Wall-clock budget shared by every stage of a planner run.

use std::time::{Duration, Instant};

#[derive(Debug, Clone, Copy)]
pub struct Deadline {
    at: Option<Instant>,
}

impl Deadline {
    pub fn never() -> Self {
        Deadline { at: None }
    }

    pub fn after(budget: Duration) -> Self {
        Deadline {
            at: Instant::now().checked_add(budget),
        }
    }

    /// Non-finite or negative budgets mean "no limit" and "already expired".
    pub fn after_secs(secs: f64) -> Self {
        if !secs.is_finite() {
            Self::never()
        } else {
            Self::after(Duration::from_secs_f64(secs.max(0.0)))
        }
    }

    pub fn expired(&self) -> bool {
        self.at.is_some_and(|t| Instant::now() >= t)
    }

    pub fn remaining(&self) -> Option<Duration> {
        self.at.map(|t| t.saturating_duration_since(Instant::now()))
    }
}
