//! SMT-LIB2 (QF_LIA) encoding of the task-assignment model and a backend
//! that delegates decision calls to an external solver process.
//!
//! Cells are encoded by their row-major index. `-1` marks "none" (no task
//! acted upon, object in transit, no carrier); `-2` marks a degenerate task
//! still waiting at its pickup cell.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::{Read, Write};
use std::process::{Command, Stdio};
use std::thread;
use std::time::Duration;

use crate::clock::Deadline;
use crate::error::PlanError;
use crate::model::{Objective, Time};
use crate::workspace::Cell;

use super::planner::{Decision, DecisionBackend};
use super::{Action, ExclusionSet, TaskAssignment, TaskContext};

const NONE: i64 = -1;
const UNPICKED_DEGENERATE: i64 = -2;

fn lit(v: i64) -> String {
    if v < 0 {
        format!("(- {})", -v)
    } else {
        v.to_string()
    }
}

struct Encoder<'c, 'a> {
    ctx: &'c TaskContext<'a>,
    out: String,
}

impl Encoder<'_, '_> {
    fn code(&self, c: Cell) -> i64 {
        self.ctx.inst.workspace.index(c) as i64
    }

    fn pickup_code(&self, m: usize) -> i64 {
        let t = &self.ctx.inst.tasks[m];
        if t.is_degenerate() {
            UNPICKED_DEGENERATE
        } else {
            self.code(t.pickup)
        }
    }

    fn line(&mut self, s: &str) {
        self.out.push_str(s);
        self.out.push('\n');
    }

    fn locations(&self, i: usize) -> Vec<Cell> {
        let inst = self.ctx.inst;
        let mut locs: Vec<Cell> = std::iter::once(inst.robots[i].start)
            .chain(inst.tasks.iter().flat_map(|t| [t.pickup, t.drop]))
            .chain(inst.workspace.intermediates().iter().copied())
            .collect();
        locs.sort();
        locs.dedup();
        locs
    }

    fn declarations(&mut self) {
        let inst = self.ctx.inst;
        for j in 0..=inst.z {
            for i in 0..inst.robots.len() {
                for v in ["pos", "ptime", "act", "cap"] {
                    self.line(&format!("(declare-fun {v}_{i}_{j} () Int)"));
                }
            }
            for m in 0..inst.tasks.len() {
                for v in ["tloc", "ttime", "carr"] {
                    self.line(&format!("(declare-fun {v}_{m}_{j} () Int)"));
                }
            }
        }
        self.line("(declare-fun cost () Int)");
    }

    fn initial(&mut self) {
        let inst = self.ctx.inst;
        for (i, r) in inst.robots.iter().enumerate() {
            let s = self.code(r.start);
            self.line(&format!(
                "(assert (and (= pos_{i}_0 {s}) (= ptime_{i}_0 0) (= act_{i}_0 {}) (= cap_{i}_0 {})))",
                lit(NONE),
                r.capacity
            ));
        }
        for m in 0..inst.tasks.len() {
            let p = self.pickup_code(m);
            self.line(&format!(
                "(assert (and (= tloc_{m}_0 {}) (= ttime_{m}_0 0) (= carr_{m}_0 {})))",
                lit(p),
                lit(NONE)
            ));
        }
    }

    fn robot_step(&mut self, i: usize, j: usize) -> String {
        let inst = self.ctx.inst;
        let p = j - 1;
        let none = lit(NONE);
        let base = inst.robots[i].start;
        let mut alts = vec![format!(
            "(and (= pos_{i}_{j} pos_{i}_{p}) (= act_{i}_{j} {none}) (= ptime_{i}_{j} ptime_{i}_{p}) (= cap_{i}_{j} cap_{i}_{p}))"
        )];
        for k in self.locations(i) {
            let mut acts = Vec::new();
            if let Some(d) = self.ctx.dist(k, base) {
                let mut free: Vec<String> = (0..inst.tasks.len())
                    .map(|m| format!("(distinct carr_{m}_{p} {i})"))
                    .collect();
                free.insert(
                    0,
                    format!(
                        "(= pos_{i}_{j} {}) (= act_{i}_{j} {none}) (= ptime_{i}_{j} (+ ptime_{i}_{p} {d})) (= cap_{i}_{j} cap_{i}_{p})",
                        self.code(base)
                    ),
                );
                acts.push(format!("(and {})", free.join(" ")));
            }
            for (m, t) in inst.tasks.iter().enumerate() {
                let w = t.weight;
                if let Some(d) = self.ctx.dist(k, t.pickup) {
                    acts.push(format!(
                        "(and (= tloc_{m}_{p} {}) (>= cap_{i}_{p} {w}) (= cap_{i}_{j} (- cap_{i}_{p} {w})) (= pos_{i}_{j} {}) (= carr_{m}_{j} {i}) (= ptime_{i}_{j} (+ ptime_{i}_{p} {})) (= tloc_{m}_{j} {none}) (= ttime_{m}_{j} {none}) (= act_{i}_{j} {m}))",
                        lit(self.pickup_code(m)),
                        self.code(t.pickup),
                        d + 1
                    ));
                }
                let drop_to = |target: Cell, this: &Self| {
                    this.ctx.dist(k, target).map(|d| {
                        let c = this.code(target);
                        format!(
                            "(and (= carr_{m}_{p} {i}) (= pos_{i}_{j} {c}) (= carr_{m}_{j} {none}) (= ptime_{i}_{j} (+ ptime_{i}_{p} {})) (= tloc_{m}_{j} {c}) (= ttime_{m}_{j} ptime_{i}_{j}) (= act_{i}_{j} {m}) (= cap_{i}_{j} (+ cap_{i}_{p} {w})))",
                            d + 1
                        )
                    })
                };
                if let Some(s) = drop_to(t.drop, self) {
                    acts.push(s);
                }
                for &n in inst.workspace.intermediates() {
                    let Some(d) = self.ctx.dist(k, n) else { continue };
                    let c = self.code(n);
                    let arrive = d + 1;
                    let common = format!(
                        "(= tloc_{m}_{p} {c}) (>= cap_{i}_{p} {w}) (= cap_{i}_{j} (- cap_{i}_{p} {w})) (= pos_{i}_{j} {c}) (= carr_{m}_{j} {i}) (= tloc_{m}_{j} {none}) (= ttime_{m}_{j} {none}) (= act_{i}_{j} {m})"
                    );
                    acts.push(format!(
                        "(and {common} (<= (+ ttime_{m}_{p} 2) (+ ptime_{i}_{p} {arrive})) (= ptime_{i}_{j} (+ ptime_{i}_{p} {arrive})))"
                    ));
                    acts.push(format!(
                        "(and {common} (> (+ ttime_{m}_{p} 2) (+ ptime_{i}_{p} {arrive})) (= ptime_{i}_{j} (+ ttime_{m}_{p} 2)))"
                    ));
                    if let Some(s) = drop_to(n, self) {
                        acts.push(s);
                    }
                }
            }
            if acts.is_empty() {
                continue;
            }
            alts.push(format!(
                "(and (= pos_{i}_{p} {}) (or {}))",
                self.code(k),
                acts.join(" ")
            ));
        }
        format!("(assert (or {}))", alts.join(" "))
    }

    fn frame(&mut self, m: usize, j: usize) {
        let inst = self.ctx.inst;
        let p = j - 1;
        let idle: Vec<String> = (0..inst.robots.len())
            .map(|i| format!("(distinct act_{i}_{j} {m})"))
            .collect();
        let guard = if idle.len() == 1 {
            idle[0].clone()
        } else {
            format!("(and {})", idle.join(" "))
        };
        self.line(&format!(
            "(assert (=> {guard} (and (= tloc_{m}_{j} tloc_{m}_{p}) (= ttime_{m}_{j} ttime_{m}_{p}) (= carr_{m}_{j} carr_{m}_{p}))))"
        ));
    }

    fn exclusivity(&mut self, j: usize) {
        let inst = self.ctx.inst;
        for &n in inst.workspace.intermediates() {
            let c = self.code(n);
            for a in 0..inst.tasks.len() {
                for b in a + 1..inst.tasks.len() {
                    self.line(&format!(
                        "(assert (not (and (= tloc_{a}_{j} {c}) (= tloc_{b}_{j} {c}))))"
                    ));
                }
            }
        }
    }

    fn goal_and_cost(&mut self) {
        let inst = self.ctx.inst;
        let z = inst.z;
        for (m, t) in inst.tasks.iter().enumerate() {
            let d = self.code(t.drop);
            self.line(&format!("(assert (= tloc_{m}_{z} {d}))"));
            if let Some(dl) = t.deadline {
                self.line(&format!("(assert (<= ttime_{m}_{z} {dl}))"));
            }
        }
        for (i, r) in inst.robots.iter().enumerate() {
            let s = self.code(r.start);
            self.line(&format!("(assert (= pos_{i}_{z} {s}))"));
        }
        let finals: Vec<String> = (0..inst.robots.len()).map(|i| format!("ptime_{i}_{z}")).collect();
        match inst.objective {
            Objective::Makespan => {
                for f in &finals {
                    self.line(&format!("(assert (>= cost {f}))"));
                }
                let eqs: Vec<String> = finals.iter().map(|f| format!("(= cost {f})")).collect();
                if eqs.len() == 1 {
                    self.line(&format!("(assert {})", eqs[0]));
                } else {
                    self.line(&format!("(assert (or {}))", eqs.join(" ")));
                }
            }
            Objective::TotalCost => {
                if finals.len() == 1 {
                    self.line(&format!("(assert (= cost {}))", finals[0]));
                } else {
                    self.line(&format!("(assert (= cost (+ {})))", finals.join(" ")));
                }
            }
        }
    }

    fn exclusions(&mut self, excl: &ExclusionSet) {
        // Sorted so the document does not depend on hash order.
        let mut fps: Vec<_> = excl.iter().collect();
        fps.sort_by(|a, b| (&a.pos, &a.act).cmp(&(&b.pos, &b.act)));
        for fp in fps {
            let mut diffs = Vec::new();
            for (i, row) in fp.pos.iter().enumerate() {
                for (j, &c) in row.iter().enumerate() {
                    diffs.push(format!("(distinct pos_{i}_{} {})", j + 1, self.code(c)));
                }
            }
            for (i, row) in fp.act.iter().enumerate() {
                for (j, &a) in row.iter().enumerate() {
                    let v = a.map_or(NONE, |m| m as i64);
                    diffs.push(format!("(distinct act_{i}_{} {})", j + 1, lit(v)));
                }
            }
            if diffs.is_empty() {
                self.line("(assert false)");
            } else {
                self.line(&format!("(assert (or {}))", diffs.join(" ")));
            }
        }
    }

    fn queries(&mut self) {
        let inst = self.ctx.inst;
        self.line("(check-sat)");
        let mut names = Vec::new();
        for j in 0..=inst.z {
            for i in 0..inst.robots.len() {
                for v in ["pos", "ptime", "act", "cap"] {
                    names.push(format!("{v}_{i}_{j}"));
                }
            }
            for m in 0..inst.tasks.len() {
                for v in ["tloc", "ttime", "carr"] {
                    names.push(format!("{v}_{m}_{j}"));
                }
            }
        }
        names.push("cost".into());
        self.line(&format!("(get-value ({}))", names.join(" ")));
    }
}

/// Self-contained SMT-LIB2 document whose models are exactly the
/// assignments with cost in `[lo, hi]` and fingerprint outside `excl`.
pub fn emit_smtlib(ctx: &TaskContext, excl: &ExclusionSet, lo: Time, hi: Option<Time>) -> String {
    let inst = ctx.inst;
    let mut enc = Encoder {
        ctx,
        out: String::new(),
    };
    enc.line("(set-logic QF_LIA)");
    enc.line("(set-option :produce-models true)");
    enc.declarations();
    enc.initial();
    for j in 1..=inst.z {
        for i in 0..inst.robots.len() {
            let s = enc.robot_step(i, j);
            enc.line(&s);
        }
        for m in 0..inst.tasks.len() {
            enc.frame(m, j);
        }
        enc.exclusivity(j);
    }
    enc.goal_and_cost();
    enc.exclusions(excl);
    let _ = writeln!(enc.out, "(assert (>= cost {lo}))");
    if let Some(hi) = hi {
        let _ = writeln!(enc.out, "(assert (<= cost {hi}))");
    }
    enc.queries();
    enc.out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SolverAnswer {
    Sat(HashMap<String, i64>),
    Unsat,
}

/// Parses solver output: a `sat`/`unsat` line followed, for `sat`, by the
/// `get-value` response.
pub fn parse_solver_output(out: &str) -> Result<SolverAnswer, PlanError> {
    let mut lines = out.lines().map(str::trim).filter(|l| !l.is_empty());
    match lines.next() {
        Some("unsat") => return Ok(SolverAnswer::Unsat),
        Some("sat") => {}
        other => return Err(PlanError::Backend(format!("unexpected solver answer {other:?}"))),
    }
    let rest: String = lines.collect::<Vec<_>>().join(" ");
    let tokens = tokenize(&rest);
    let mut values = HashMap::new();
    let mut pos = 0;
    expect(&tokens, &mut pos, "(")?;
    while tokens.get(pos).map(String::as_str) == Some("(") {
        pos += 1;
        let name = tokens
            .get(pos)
            .cloned()
            .ok_or_else(|| PlanError::Backend("truncated model".into()))?;
        pos += 1;
        let value = parse_int(&tokens, &mut pos)?;
        expect(&tokens, &mut pos, ")")?;
        values.insert(name, value);
    }
    expect(&tokens, &mut pos, ")")?;
    Ok(SolverAnswer::Sat(values))
}

fn tokenize(s: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut cur = String::new();
    for ch in s.chars() {
        match ch {
            '(' | ')' => {
                if !cur.is_empty() {
                    tokens.push(std::mem::take(&mut cur));
                }
                tokens.push(ch.to_string());
            }
            c if c.is_whitespace() => {
                if !cur.is_empty() {
                    tokens.push(std::mem::take(&mut cur));
                }
            }
            c => cur.push(c),
        }
    }
    if !cur.is_empty() {
        tokens.push(cur);
    }
    tokens
}

fn expect(tokens: &[String], pos: &mut usize, want: &str) -> Result<(), PlanError> {
    if tokens.get(*pos).map(String::as_str) == Some(want) {
        *pos += 1;
        Ok(())
    } else {
        Err(PlanError::Backend(format!(
            "malformed model: expected {want:?} at token {}",
            *pos
        )))
    }
}

fn parse_int(tokens: &[String], pos: &mut usize) -> Result<i64, PlanError> {
    let bad = || PlanError::Backend("malformed integer in model".into());
    if tokens.get(*pos).map(String::as_str) == Some("(") {
        *pos += 1;
        expect(tokens, pos, "-")?;
        let v: i64 = tokens.get(*pos).ok_or_else(bad)?.parse().map_err(|_| bad())?;
        *pos += 1;
        expect(tokens, pos, ")")?;
        Ok(-v)
    } else {
        let v = tokens.get(*pos).ok_or_else(bad)?.parse().map_err(|_| bad())?;
        *pos += 1;
        Ok(v)
    }
}

/// Rebuilds and re-validates an assignment from a solver model.
pub fn decode_model(ctx: &TaskContext, values: &HashMap<String, i64>) -> Result<TaskAssignment, PlanError> {
    let inst = ctx.inst;
    let ws = &inst.workspace;
    let get = |name: String| {
        values
            .get(&name)
            .copied()
            .ok_or_else(|| PlanError::Backend(format!("model lacks {name}")))
    };
    let cell = |v: i64| -> Result<Cell, PlanError> {
        if v < 0 || v as usize >= ws.num_cells() {
            Err(PlanError::Backend(format!("cell code {v} out of range")))
        } else {
            Ok(ws.cell_at(v as usize))
        }
    };
    let mut joint = Vec::with_capacity(inst.z);
    for j in 1..=inst.z {
        let mut actions = Vec::with_capacity(inst.robots.len());
        for i in 0..inst.robots.len() {
            let act = get(format!("act_{i}_{j}"))?;
            let pos = cell(get(format!("pos_{i}_{j}"))?)?;
            let action = if act < 0 {
                let prev = cell(get(format!("pos_{i}_{}", j - 1))?)?;
                let same_time = get(format!("ptime_{i}_{j}"))? == get(format!("ptime_{i}_{}", j - 1))?;
                if prev == pos && same_time {
                    Action::Stay
                } else {
                    Action::Return
                }
            } else {
                let m = act as usize;
                let task = inst
                    .tasks
                    .get(m)
                    .ok_or_else(|| PlanError::Backend(format!("unknown task {m}")))?;
                if get(format!("carr_{m}_{j}"))? == i as i64 {
                    let before = get(format!("tloc_{m}_{}", j - 1))?;
                    let at_pickup = if task.is_degenerate() {
                        before == UNPICKED_DEGENERATE
                    } else {
                        before == ws.index(task.pickup) as i64
                    };
                    if at_pickup {
                        Action::Pick(m)
                    } else {
                        Action::PickIntermediate(m, pos)
                    }
                } else if pos == task.drop {
                    Action::Drop(m)
                } else {
                    Action::DropIntermediate(m, pos)
                }
            };
            actions.push(action);
        }
        joint.push(actions);
    }
    let (assignment, _) = TaskAssignment::replay(ctx, &joint).map_err(PlanError::Backend)?;
    if i64::from(assignment.cost) != get("cost".into())? {
        return Err(PlanError::Backend(format!(
            "model cost {} disagrees with replayed cost {}",
            get("cost".into())?,
            assignment.cost
        )));
    }
    Ok(assignment)
}

/// Runs an external SMT-LIB2 solver that reads the query from standard
/// input, e.g. `z3 -in`.
#[derive(Debug, Clone)]
pub struct SmtLibBackend {
    command: Vec<String>,
}

impl SmtLibBackend {
    pub fn new(command: &str) -> Result<Self, PlanError> {
        let command: Vec<String> = command.split_whitespace().map(String::from).collect();
        if command.is_empty() {
            return Err(PlanError::Backend("empty solver command".into()));
        }
        Ok(SmtLibBackend { command })
    }

    pub fn run(&self, document: &str, deadline: &Deadline) -> Result<String, PlanError> {
        let mut child = Command::new(&self.command[0])
            .args(&self.command[1..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| PlanError::Backend(format!("cannot start {}: {e}", self.command[0])))?;
        let mut stdin = child.stdin.take().expect("piped stdin");
        let doc = document.to_owned();
        let writer = thread::spawn(move || stdin.write_all(doc.as_bytes()));
        let mut stdout = child.stdout.take().expect("piped stdout");
        let reader = thread::spawn(move || {
            let mut s = String::new();
            stdout.read_to_string(&mut s).map(|_| s)
        });
        loop {
            if child
                .try_wait()
                .map_err(|e| PlanError::Backend(e.to_string()))?
                .is_some()
            {
                break;
            }
            if deadline.expired() {
                let _ = child.kill();
                let _ = child.wait();
                return Err(PlanError::Timeout);
            }
            thread::sleep(Duration::from_millis(2));
        }
        let _ = writer.join();
        reader
            .join()
            .map_err(|_| PlanError::Backend("solver reader panicked".into()))?
            .map_err(|e| PlanError::Backend(e.to_string()))
    }
}

impl DecisionBackend for SmtLibBackend {
    fn decide(
        &mut self,
        ctx: &TaskContext,
        excl: &ExclusionSet,
        lo: Time,
        hi: Option<Time>,
        deadline: &Deadline,
    ) -> Result<Decision, PlanError> {
        let doc = emit_smtlib(ctx, excl, lo, hi);
        let out = self.run(&doc, deadline)?;
        match parse_solver_output(&out)? {
            SolverAnswer::Unsat => Ok(Decision::Unsat),
            SolverAnswer::Sat(values) => {
                let a = decode_model(ctx, &values)?;
                if a.cost < lo || hi.is_some_and(|h| a.cost > h) || excl.contains(&a.fingerprint()) {
                    return Err(PlanError::Backend("model violates the query bounds".into()));
                }
                Ok(Decision::Sat(a))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_models() {
        let out = "sat\n((pos_0_0 3)\n (act_0_1 (- 1))\n (cost 8))\n";
        let SolverAnswer::Sat(v) = parse_solver_output(out).unwrap() else {
            panic!("expected sat")
        };
        assert_eq!(v["pos_0_0"], 3);
        assert_eq!(v["act_0_1"], -1);
        assert_eq!(v["cost"], 8);
        assert_eq!(
            parse_solver_output("unsat\n(error \"model is not available\")").unwrap(),
            SolverAnswer::Unsat
        );
        assert!(parse_solver_output("unknown\n").is_err());
        assert!(parse_solver_output("sat\n((pos_0_0 3)").is_err());
    }

    #[test]
    fn literals() {
        assert_eq!(lit(-1), "(- 1)");
        assert_eq!(lit(12), "12");
    }
}
