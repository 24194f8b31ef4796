//! Plan tables: one row per time step, one column per robot.
//!
//! ```text
//! time r1 r2
//! 0 (Start, (0, 0)) (Start, (7, 3))
//! 1 (Move, (0, 1)) (Move, (7, 4))
//! ```
//!
//! Robots and tasks are numbered from 1. A robot that has finished shows
//! `---` at its base.

use std::fmt::Write as _;

use thiserror::Error;

use crate::path::{Label, Plan, PlanStep};
use crate::workspace::Cell;

const DONE: &str = "---";

pub fn render_plan_table(plan: &Plan) -> String {
    let mut out = String::from("time");
    for i in 0..plan.trajectories.len() {
        let _ = write!(out, " r{}", i + 1);
    }
    out.push('\n');
    for t in 0..=plan.makespan as usize {
        let _ = write!(out, "{t}");
        for traj in &plan.trajectories {
            match traj.get(t) {
                Some(s) => {
                    let _ = write!(out, " ({}, ({}, {}))", s.label, s.cell.x, s.cell.y);
                }
                None => {
                    let c = traj.last().map_or(Cell::new(0, 0), |s| s.cell);
                    let _ = write!(out, " ({DONE}, ({}, {}))", c.x, c.y);
                }
            }
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TableError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("empty table")]
    Empty,
}

struct Cursor<'a> {
    s: &'a str,
    pos: usize,
    line: usize,
}

impl<'a> Cursor<'a> {
    fn err(&self, msg: impl Into<String>) -> TableError {
        TableError::Syntax {
            line: self.line,
            msg: msg.into(),
        }
    }

    fn rest(&self) -> &'a str {
        &self.s[self.pos..]
    }

    fn eat(&mut self, lit: &str) -> Result<(), TableError> {
        if self.rest().starts_with(lit) {
            self.pos += lit.len();
            Ok(())
        } else {
            Err(self.err(format!("expected {lit:?} at column {}", self.pos + 1)))
        }
    }

    fn take_until(&mut self, stop: char) -> Result<&'a str, TableError> {
        let rest = self.rest();
        let n = rest.find(stop).ok_or_else(|| self.err(format!("missing {stop:?}")))?;
        self.pos += n;
        Ok(&rest[..n])
    }

    fn int(&mut self, stop: char) -> Result<i32, TableError> {
        let tok = self.take_until(stop)?;
        tok.parse().map_err(|_| self.err(format!("bad integer {tok:?}")))
    }
}

fn parse_label(s: &str) -> Option<Option<Label>> {
    let task = |prefix: &str| -> Option<usize> {
        let n: usize = s.strip_prefix(prefix)?.parse().ok()?;
        n.checked_sub(1)
    };
    Some(Some(match s {
        DONE => return Some(None),
        "Start" => Label::Start,
        "Move" => Label::Move,
        "Return" => Label::Return,
        _ if s.starts_with("InterDrop_") => Label::InterDrop(task("InterDrop_")?),
        _ if s.starts_with("InterPick_") => Label::InterPick(task("InterPick_")?),
        _ if s.starts_with("Pick_") => Label::Pick(task("Pick_")?),
        _ if s.starts_with("Drop_") => Label::Drop(task("Drop_")?),
        _ => return None,
    }))
}

/// Inverse of [`render_plan_table`]. `num_tasks` sizes the completion
/// vector of the rebuilt plan.
pub fn parse_plan_table(text: &str, num_tasks: usize) -> Result<Plan, TableError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(TableError::Empty)?;
    let cols: Vec<&str> = header.split(' ').collect();
    if cols.first() != Some(&"time") || cols.len() < 2 {
        return Err(TableError::Syntax {
            line: 1,
            msg: "header must be `time r1 ...`".into(),
        });
    }
    for (i, c) in cols[1..].iter().enumerate() {
        if *c != format!("r{}", i + 1) {
            return Err(TableError::Syntax {
                line: 1,
                msg: format!("unexpected column {c:?}"),
            });
        }
    }
    let n = cols.len() - 1;
    let mut trajs: Vec<Vec<PlanStep>> = vec![Vec::new(); n];
    let mut finished = vec![false; n];
    let mut expected_t = 0usize;
    for (idx, line) in lines {
        let mut cur = Cursor {
            s: line,
            pos: 0,
            line: idx + 1,
        };
        let t = cur.int(' ')?;
        if t as usize != expected_t {
            return Err(cur.err(format!("expected time {expected_t}, found {t}")));
        }
        expected_t += 1;
        for (i, traj) in trajs.iter_mut().enumerate() {
            cur.eat(" (")?;
            let raw = cur.take_until(',')?;
            let label = parse_label(raw).ok_or_else(|| cur.err(format!("unknown action {raw:?}")))?;
            cur.eat(", (")?;
            let x = cur.int(',')?;
            cur.eat(", ")?;
            let y = cur.int(')')?;
            cur.eat("))")?;
            let cell = Cell::new(x, y);
            match label {
                Some(label) if !finished[i] => traj.push(PlanStep { cell, label }),
                Some(_) => return Err(cur.err(format!("robot {} acts after finishing", i + 1))),
                None => {
                    if traj.last().map(|s| s.cell) != Some(cell) {
                        return Err(cur.err(format!("finished robot {} moved", i + 1)));
                    }
                    finished[i] = true;
                }
            }
        }
        if !cur.rest().is_empty() {
            return Err(cur.err("trailing text"));
        }
    }
    if expected_t == 0 {
        return Err(TableError::Empty);
    }
    Ok(Plan::from_trajectories(trajs, num_tasks))
}
