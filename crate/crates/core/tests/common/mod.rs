//! Independent oracles shared by the integration tests.
//!
//! `all_assignments` enumerates every goal-reaching joint action sequence by
//! brute force. `joint_optimum` plans all robots at once with A* over the
//! joint state space, so it needs no conflict resolution at all.

#![allow(dead_code)]

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, HashSet, VecDeque};

use mapd_core::io::{generate_instance, GeneratorConfig};
use mapd_core::model::{Instance, Objective, Robot, Task, Time};
use mapd_core::path::{Checkpoint, CheckpointKind, GoalSequence, Label, Plan, PrecedenceEdge};
use mapd_core::task::{
    apply_joint, enumerate_actions, initial_state, is_goal, Action, Fingerprint, StepState, TaskAssignment, TaskContext,
};
use mapd_core::workspace::{parse_map, Cell, Workspace};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn robot(id: usize, x: i32, y: i32, capacity: u32) -> Robot {
    Robot {
        id,
        start: Cell::new(x, y),
        capacity,
    }
}

pub fn task(id: usize, p: (i32, i32), d: (i32, i32)) -> Task {
    Task {
        id,
        pickup: Cell::new(p.0, p.1),
        drop: Cell::new(d.0, d.1),
        weight: 1,
        deadline: None,
    }
}

/// Open 8x7 grid, transfer cell at (4, 4). Robot 0 starts at (0, 0) and
/// robot 1 at (7, 3). Task 0 goes (0, 1) -> (7, 6), task 1 (1, 6) -> (0, 3).
pub fn transfer_instance(objective: Objective) -> Instance {
    let mut rows = vec![".".repeat(8); 7];
    rows[4].replace_range(4..5, "I");
    let ws = parse_map(&rows.join("\n")).unwrap();
    Instance::new(
        ws,
        vec![robot(0, 0, 0, 2), robot(1, 7, 3, 2)],
        vec![task(0, (0, 1), (7, 6)), task(1, (1, 6), (0, 3))],
        objective,
    )
    .with_z(5)
}

// ---------------------------------------------------------------------------
// Brute-force task assignments

/// Every goal-reaching assignment of exactly `inst.z` steps, one per
/// distinct fingerprint, sorted by heuristic cost.
pub fn all_assignments(inst: &Instance) -> Vec<TaskAssignment> {
    let ctx = TaskContext::new(inst).unwrap();
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    let mut joint = Vec::new();
    dfs(&ctx, &initial_state(inst), &mut joint, &mut seen, &mut out);
    out.sort_by_key(|a: &TaskAssignment| a.cost);
    out
}

fn dfs(
    ctx: &TaskContext,
    st: &StepState,
    joint: &mut Vec<Vec<Action>>,
    seen: &mut HashSet<Fingerprint>,
    out: &mut Vec<TaskAssignment>,
) {
    let inst = ctx.inst;
    if joint.len() == inst.z {
        if is_goal(ctx, st) {
            let (a, _) = TaskAssignment::replay(ctx, joint).unwrap();
            if seen.insert(a.fingerprint()) {
                out.push(a);
            }
        }
        return;
    }
    let per_robot: Vec<Vec<Action>> = {
        let all = enumerate_actions(ctx, st);
        (0..inst.robots.len())
            .map(|i| all.iter().filter(|(r, _)| *r == i).map(|(_, a)| *a).collect())
            .collect()
    };
    let mut choice = vec![Action::Stay; inst.robots.len()];
    product(ctx, st, &per_robot, 0, &mut choice, joint, seen, out);
}

#[allow(clippy::too_many_arguments)]
fn product(
    ctx: &TaskContext,
    st: &StepState,
    per_robot: &[Vec<Action>],
    i: usize,
    choice: &mut Vec<Action>,
    joint: &mut Vec<Vec<Action>>,
    seen: &mut HashSet<Fingerprint>,
    out: &mut Vec<TaskAssignment>,
) {
    if i == per_robot.len() {
        if let Some(next) = apply_joint(ctx, st, choice) {
            joint.push(choice.clone());
            dfs(ctx, &next, joint, seen, out);
            joint.pop();
        }
        return;
    }
    for &a in &per_robot[i] {
        choice[i] = a;
        product(ctx, st, per_robot, i + 1, choice, joint, seen, out);
    }
}

// ---------------------------------------------------------------------------
// Checkpoint compilation, written independently of the library version

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Goal {
    pub cell: Cell,
    /// Ticks spent on the cell; zero means reached on arrival.
    pub dwell: Time,
}

/// Goal list per robot plus transfer edges `((r, k), (r', k'))`: goal `k'`
/// of robot `r'` completes at least two ticks after goal `k` of robot `r`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Sequences {
    pub bases: Vec<Cell>,
    pub goals: Vec<Vec<Goal>>,
    pub edges: Vec<((usize, usize), (usize, usize))>,
}

pub fn sequences_of(inst: &Instance, a: &TaskAssignment) -> Sequences {
    let mut goals = Vec::new();
    // task -> (step, robot, goal index, is intermediate drop, cell)
    type Touch = (usize, usize, usize, bool, Cell);
    let mut touches: HashMap<usize, Vec<Touch>> = HashMap::new();
    // transfer cell -> (step, is drop, robot, goal index)
    let mut occupancy: HashMap<Cell, Vec<(usize, bool, usize, usize)>> = HashMap::new();
    for (i, steps) in a.steps.iter().enumerate() {
        let base = inst.robots[i].start;
        let mut gs: Vec<Goal> = Vec::new();
        for (j, s) in steps.iter().enumerate() {
            let (cell, dwell) = match s.action {
                Action::Stay => continue,
                Action::Return => (base, 0),
                Action::Pick(m) => (inst.tasks[m].pickup, 1),
                Action::Drop(m) => (inst.tasks[m].drop, 1),
                Action::DropIntermediate(_, n) | Action::PickIntermediate(_, n) => (n, 1),
            };
            if let Some(m) = s.action.task() {
                let idrop = matches!(s.action, Action::DropIntermediate(..));
                touches.entry(m).or_default().push((j, i, gs.len(), idrop, cell));
                if let Action::DropIntermediate(_, n) | Action::PickIntermediate(_, n) = s.action {
                    // Within a step the pickup frees the cell first.
                    occupancy.entry(n).or_default().push((j, idrop, i, gs.len()));
                }
            }
            gs.push(Goal { cell, dwell });
        }
        if gs.last().is_some_and(|g| !(g.cell == base && g.dwell == 0)) {
            gs.push(Goal { cell: base, dwell: 0 });
        }
        goals.push(gs);
    }
    let mut edges = Vec::new();
    for evs in touches.values_mut() {
        evs.sort();
        for w in evs.windows(2) {
            if w[0].3 {
                edges.push(((w[0].1, w[0].2), (w[1].1, w[1].2)));
            }
        }
    }
    // A transfer cell holds one object: the next drop onto it waits for the
    // previous object to be picked up.
    for evs in occupancy.values_mut() {
        evs.sort();
        for w in evs.windows(2) {
            let ((_, drop0, r0, g0), (_, drop1, r1, g1)) = (w[0], w[1]);
            if !drop0 && drop1 && r0 != r1 {
                edges.push(((r0, g0), (r1, g1)));
            }
        }
    }
    edges.sort();
    Sequences {
        bases: inst.robots.iter().map(|r| r.start).collect(),
        goals,
        edges,
    }
}

// ---------------------------------------------------------------------------
// Joint-state A*

fn bfs(ws: &Workspace, from: Cell) -> HashMap<Cell, Time> {
    let mut d = HashMap::from([(from, 0)]);
    let mut q = VecDeque::from([from]);
    while let Some(c) = q.pop_front() {
        let dc = d[&c];
        for (dx, dy) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
            let n = Cell::new(c.x + dx, c.y + dy);
            if ws.in_bounds(n) && ws.is_free(n) && !d.contains_key(&n) {
                d.insert(n, dc + 1);
                q.push_back(n);
            }
        }
    }
    d
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct JointState {
    cells: Vec<Cell>,
    labels: Vec<usize>,
    /// Robot has stopped for good at its base.
    done: Vec<bool>,
    /// Per edge: `None` before the first goal completes, then ticks since,
    /// saturated at two.
    since: Vec<Option<u8>>,
}

struct Oracle<'a> {
    ws: &'a Workspace,
    seqs: &'a Sequences,
    objective: Objective,
    dist: HashMap<Cell, HashMap<Cell, Time>>,
}

impl Oracle<'_> {
    fn d(&self, a: Cell, b: Cell) -> Option<Time> {
        self.dist[&b].get(&a).copied()
    }

    /// Lower bound on the remaining ticks of one robot.
    fn h_robot(&self, i: usize, cell: Cell, label: usize) -> Option<Time> {
        let goals = &self.seqs.goals[i];
        let mut at = cell;
        let mut total = 0;
        for g in &goals[label..] {
            total += self.d(at, g.cell)? + g.dwell;
            at = g.cell;
        }
        Some(total + self.d(at, self.seqs.bases[i])?)
    }

    fn h(&self, s: &JointState) -> Option<Time> {
        let mut hs = Vec::new();
        for i in 0..s.cells.len() {
            if !s.done[i] {
                hs.push(self.h_robot(i, s.cells[i], s.labels[i])?);
            }
        }
        Some(self.objective.combine(hs))
    }

    /// Advances zero-dwell goals reached on arrival.
    fn close(&self, i: usize, cell: Cell, label: &mut usize) {
        while let Some(g) = self.seqs.goals[i].get(*label) {
            if g.dwell == 0 && g.cell == cell {
                *label += 1;
            } else {
                break;
            }
        }
    }

    fn finished(&self, i: usize, cell: Cell, label: usize) -> bool {
        label == self.seqs.goals[i].len() && cell == self.seqs.bases[i]
    }

    /// Every way of marking eligible robots as stopped.
    fn with_stops(&self, s: JointState, out: &mut Vec<JointState>) {
        let eligible: Vec<usize> = (0..s.cells.len())
            .filter(|&i| !s.done[i] && self.finished(i, s.cells[i], s.labels[i]))
            .collect();
        for mask in 0..(1u32 << eligible.len()) {
            let mut t = s.clone();
            for (b, &i) in eligible.iter().enumerate() {
                if mask & (1 << b) != 0 {
                    t.done[i] = true;
                }
            }
            out.push(t);
        }
    }

    /// Options for one robot: (next cell, next label, goal index completed).
    fn robot_moves(&self, i: usize, cell: Cell, label: usize) -> Vec<(Cell, usize, Option<usize>)> {
        let mut out = Vec::new();
        let goals = &self.seqs.goals[i];
        if let Some(g) = goals.get(label) {
            if g.dwell == 1 && g.cell == cell {
                let mut l = label + 1;
                self.close(i, cell, &mut l);
                out.push((cell, l, Some(label)));
            }
        }
        for (dx, dy) in [(0, 0), (1, 0), (-1, 0), (0, 1), (0, -1)] {
            let n = Cell::new(cell.x + dx, cell.y + dy);
            if self.ws.in_bounds(n) && self.ws.is_free(n) {
                let mut l = label;
                self.close(i, n, &mut l);
                out.push((n, l, None));
            }
        }
        out
    }

    fn successors(&self, s: &JointState) -> Vec<JointState> {
        let n = s.cells.len();
        let options: Vec<Vec<(Cell, usize, Option<usize>)>> = (0..n)
            .map(|i| {
                if s.done[i] {
                    vec![(s.cells[i], s.labels[i], None)]
                } else {
                    self.robot_moves(i, s.cells[i], s.labels[i])
                }
            })
            .collect();
        let mut out = Vec::new();
        let mut pick = vec![0usize; n];
        loop {
            let chosen: Vec<_> = (0..n).map(|i| options[i][pick[i]]).collect();
            if let Some(next) = self.combine(s, &chosen) {
                self.with_stops(next, &mut out);
            }
            let mut k = 0;
            loop {
                if k == n {
                    return out;
                }
                pick[k] += 1;
                if pick[k] < options[k].len() {
                    break;
                }
                pick[k] = 0;
                k += 1;
            }
        }
    }

    fn combine(&self, s: &JointState, chosen: &[(Cell, usize, Option<usize>)]) -> Option<JointState> {
        let n = chosen.len();
        for a in 0..n {
            for b in a + 1..n {
                if chosen[a].0 == chosen[b].0 {
                    return None;
                }
                if chosen[a].0 == s.cells[b] && chosen[b].0 == s.cells[a] {
                    return None;
                }
            }
        }
        let mut since: Vec<Option<u8>> = s.since.iter().map(|c| c.map(|v| (v + 1).min(2))).collect();
        for (e, &((rb, kb), (ra, ka))) in self.seqs.edges.iter().enumerate() {
            if chosen[ra].2 == Some(ka) && since[e] != Some(2) {
                return None;
            }
            if chosen[rb].2 == Some(kb) {
                since[e] = Some(0);
            }
        }
        Some(JointState {
            cells: chosen.iter().map(|c| c.0).collect(),
            labels: chosen.iter().map(|c| c.1).collect(),
            done: s.done.clone(),
            since,
        })
    }

    fn step_cost(&self, s: &JointState, t: Time) -> Time {
        match self.objective {
            Objective::Makespan => t + 1,
            Objective::TotalCost => s.done.iter().filter(|d| !**d).count() as Time,
        }
    }
}

/// Optimal plan cost for the given goal sequences, or `None` if no
/// collision-free realization exists. Under the makespan objective `g` is the
/// elapsed time; under total cost it sums the ticks of robots still active.
/// A non-`None` `bound` discards anything costing `bound` or more.
pub fn joint_optimum(ws: &Workspace, seqs: &Sequences, objective: Objective, bound: Option<Time>) -> Option<Time> {
    let mut targets: HashSet<Cell> = seqs.bases.iter().copied().collect();
    targets.extend(seqs.goals.iter().flatten().map(|g| g.cell));
    let dist = targets.into_iter().map(|c| (c, bfs(ws, c))).collect();
    let o = Oracle {
        ws,
        seqs,
        objective,
        dist,
    };
    let n = seqs.bases.len();
    let mut starts = Vec::new();
    let mut labels = vec![0; n];
    for (i, l) in labels.iter_mut().enumerate() {
        o.close(i, seqs.bases[i], l);
    }
    o.with_stops(
        JointState {
            cells: seqs.bases.clone(),
            labels,
            done: vec![false; n],
            since: vec![None; seqs.edges.len()],
        },
        &mut starts,
    );
    // Heap entries: (f, g, t, id); states live in `arena`.
    let mut arena: Vec<(JointState, Time)> = Vec::new();
    let mut best_g: HashMap<JointState, Time> = HashMap::new();
    let mut heap = BinaryHeap::new();
    for s in starts {
        if let Some(h) = o.h(&s) {
            if bound.is_none_or(|b| h < b) {
                best_g.insert(s.clone(), 0);
                heap.push(Reverse((h, 0, arena.len())));
                arena.push((s, 0));
            }
        }
    }
    while let Some(Reverse((_, g, id))) = heap.pop() {
        let (s, t) = arena[id].clone();
        if best_g.get(&s).is_some_and(|&b| b < g) {
            continue;
        }
        if s.done.iter().all(|d| *d) {
            return Some(g);
        }
        for next in o.successors(&s) {
            let g2 = match objective {
                Objective::Makespan => o.step_cost(&s, t),
                Objective::TotalCost => g + o.step_cost(&s, t),
            };
            let Some(h) = o.h(&next) else { continue };
            let f = g2 + h;
            if bound.is_some_and(|b| f >= b) {
                continue;
            }
            if best_g.get(&next).is_some_and(|&b| b <= g2) {
                continue;
            }
            best_g.insert(next.clone(), g2);
            heap.push(Reverse((f, g2, arena.len())));
            arena.push((next, t + 1));
        }
    }
    None
}

/// Cheapest collision-free realization over every assignment, with the
/// assignment achieving it. Results are cached per distinct goal sequence.
pub fn global_optimum(inst: &Instance) -> Option<(Time, TaskAssignment)> {
    let mut best: Option<(Time, TaskAssignment)> = None;
    let mut memo: HashSet<Sequences> = HashSet::new();
    for a in all_assignments(inst) {
        let seqs = sequences_of(inst, &a);
        if !memo.insert(seqs.clone()) {
            continue;
        }
        let bound = best.as_ref().map(|b| b.0);
        if let Some(c) = joint_optimum(&inst.workspace, &seqs, inst.objective, bound) {
            best = Some((c, a));
        }
    }
    best
}

// ---------------------------------------------------------------------------
// Fixture corpora

fn objective_of(k: u64) -> Objective {
    if k.is_multiple_of(2) {
        Objective::Makespan
    } else {
        Objective::TotalCost
    }
}

/// Two robots at opposite ends of a narrow strip, one task running the
/// length of it and a transfer cell near the middle.
pub fn strip_instance(rng: &mut ChaCha8Rng, objective: Objective) -> Instance {
    let w: i32 = rng.gen_range(5..=6);
    let h: i32 = rng.gen_range(2..=3);
    let mid = w / 2;
    let inter = Cell::new(rng.gen_range(mid - 1..=mid), rng.gen_range(0..h));
    let ws = Workspace::new(w as usize, h as usize, [], [inter]).unwrap();
    let mut used = vec![inter];
    let mut fresh = |rng: &mut ChaCha8Rng, lo: i32, hi: i32| loop {
        let c = Cell::new(rng.gen_range(lo..=hi), rng.gen_range(0..h));
        if !used.contains(&c) {
            used.push(c);
            return c;
        }
    };
    let r0 = fresh(rng, 0, 0);
    let r1 = fresh(rng, w - 1, w - 1);
    let mut tasks = vec![Task {
        id: 0,
        pickup: fresh(rng, 0, 1),
        drop: fresh(rng, w - 2, w - 1),
        weight: 1,
        deadline: None,
    }];
    if rng.gen_bool(0.5) {
        tasks.push(Task {
            id: 1,
            pickup: fresh(rng, 0, w - 1),
            drop: fresh(rng, 0, w - 1),
            weight: 1,
            deadline: None,
        });
    }
    let robots = vec![
        Robot {
            id: 0,
            start: r0,
            capacity: 1,
        },
        Robot {
            id: 1,
            start: r1,
            capacity: 1,
        },
    ];
    let inst = Instance::new(ws, robots, tasks, objective);
    let z = rng.gen_range(inst.z..=5);
    inst.with_z(z)
}

/// 200 micro-instances: grids up to 6x6, at most two robots, two tasks and
/// one transfer cell, `z <= 5`, objectives alternating.
pub fn micro_corpus() -> Vec<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let shapes = [(6, 2), (5, 2), (5, 3), (6, 3), (4, 3), (4, 4), (5, 5), (6, 6), (3, 6)];
    let mut out = Vec::new();
    for k in 0..200u64 {
        if k % 4 == 3 {
            out.push(strip_instance(&mut rng, objective_of(k)));
            continue;
        }
        let (w, h) = shapes[rng.gen_range(0..shapes.len())];
        let robots = if rng.gen_bool(0.8) { 2 } else { 1 };
        let mut cfg = GeneratorConfig::new(k, w, h, robots, rng.gen_range(1..=2));
        cfg.obstacle_density = [0.0, 0.1, 0.2, 0.3][rng.gen_range(0..4)];
        cfg.intermediates = rng.gen_range(0..=1);
        cfg.capacity = rng.gen_range(1..=2);
        cfg.objective = objective_of(k);
        let inst = generate_instance(&cfg).unwrap();
        let z = rng.gen_range(inst.z..=5.max(inst.z));
        out.push(inst.with_z(z));
    }
    out
}

/// 50 small instances for backend comparison. Tight deadlines and short
/// step budgets make a share of them infeasible.
pub fn backend_corpus() -> Vec<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut out = Vec::new();
    for k in 0..50u64 {
        let robots = rng.gen_range(1..=2);
        let tasks = rng.gen_range(1..=3);
        let mut cfg = GeneratorConfig::new(100 + k, rng.gen_range(4..=6), rng.gen_range(4..=6), robots, tasks);
        cfg.obstacle_density = 0.15;
        cfg.intermediates = rng.gen_range(0..=1);
        cfg.capacity = rng.gen_range(1..=2);
        cfg.objective = objective_of(k);
        let mut inst = generate_instance(&cfg).unwrap();
        if rng.gen_bool(0.3) {
            inst.tasks[0].deadline = Some(rng.gen_range(2..=12));
        }
        if rng.gen_bool(0.15) && inst.z > 1 {
            inst.z -= 2;
        }
        out.push(inst);
    }
    out
}

/// Two robots with mirror-image tasks and one spare step each: many
/// assignments share the optimal heuristic cost.
pub fn multi_optimum_instance() -> Instance {
    Instance::new(
        Workspace::open(4, 4),
        vec![robot(0, 0, 0, 2), robot(1, 3, 0, 2)],
        vec![task(0, (0, 3), (3, 3)), task(1, (3, 2), (0, 2))],
        Objective::Makespan,
    )
    .with_z(4)
}

/// Library goal sequences translated to the oracle's representation.
pub fn oracle_sequences(seqs: &[GoalSequence], edges: &[PrecedenceEdge]) -> Sequences {
    Sequences {
        bases: seqs.iter().map(|s| s.base).collect(),
        goals: seqs
            .iter()
            .map(|s| {
                s.checkpoints
                    .iter()
                    .map(|c| Goal {
                        cell: c.cell,
                        dwell: c.dwell,
                    })
                    .collect()
            })
            .collect(),
        edges: edges.iter().map(|e| (e.before, e.after)).collect(),
    }
}

pub struct MapfCase {
    pub ws: Workspace,
    pub seqs: Vec<GoalSequence>,
    pub edges: Vec<PrecedenceEdge>,
    pub num_tasks: usize,
}

fn checkpoint(kind: CheckpointKind, cell: Cell, task: Option<usize>) -> Checkpoint {
    Checkpoint {
        cell,
        kind,
        task,
        dwell: if kind == CheckpointKind::ReturnHome { 0 } else { 1 },
        deadline: None,
    }
}

/// Two-robot cases on grids up to 5x5 with up to three checkpoints per
/// robot, some with a transfer between the robots. Some are unsolvable.
pub fn mapf_corpus(n: usize) -> Vec<MapfCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut out = Vec::new();
    while out.len() < n {
        let w = rng.gen_range(3..=5);
        let h = rng.gen_range(2..=5);
        let density = [0.0, 0.1, 0.2][rng.gen_range(0..3)];
        let obstacles: Vec<Cell> = (0..h as i32)
            .flat_map(|y| (0..w as i32).map(move |x| Cell::new(x, y)))
            .filter(|_| rng.gen_bool(density))
            .collect();
        let free: Vec<Cell> = (0..h as i32)
            .flat_map(|y| (0..w as i32).map(move |x| Cell::new(x, y)))
            .filter(|c| !obstacles.contains(c))
            .collect();
        if free.len() < 4 {
            continue;
        }
        let any = |rng: &mut ChaCha8Rng| free[rng.gen_range(0..free.len())];
        let b0 = any(&mut rng);
        let b1 = loop {
            let c = any(&mut rng);
            if c != b0 {
                break c;
            }
        };
        let transfer = rng.gen_bool(0.3);
        let inter = any(&mut rng);
        let ws = Workspace::new(w, h, obstacles, transfer.then_some(inter)).unwrap();
        let mut next_task = 0;
        let mut make = |rng: &mut ChaCha8Rng, robot: usize, base: Cell| {
            let k = rng.gen_range(0..=3);
            let mut cps = Vec::new();
            for _ in 0..k {
                let kind = if rng.gen_bool(0.5) {
                    CheckpointKind::Pick
                } else {
                    CheckpointKind::Drop
                };
                cps.push(checkpoint(kind, any(rng), Some(next_task)));
                next_task += 1;
            }
            GoalSequence {
                robot,
                base,
                checkpoints: cps,
            }
        };
        let mut seqs = vec![make(&mut rng, 0, b0), make(&mut rng, 1, b1)];
        let mut edges = Vec::new();
        if transfer {
            let m = next_task;
            next_task += 1;
            let a = rng.gen_range(0..=seqs[0].checkpoints.len());
            seqs[0]
                .checkpoints
                .insert(a, checkpoint(CheckpointKind::DropIntermediate, inter, Some(m)));
            let b = rng.gen_range(0..=seqs[1].checkpoints.len());
            seqs[1]
                .checkpoints
                .insert(b, checkpoint(CheckpointKind::PickIntermediate, inter, Some(m)));
            edges.push(PrecedenceEdge {
                before: (0, a),
                after: (1, b),
            });
        }
        for s in &mut seqs {
            if !s.checkpoints.is_empty() {
                s.checkpoints.push(checkpoint(CheckpointKind::ReturnHome, s.base, None));
            }
        }
        out.push(MapfCase {
            ws,
            seqs,
            edges,
            num_tasks: next_task,
        });
    }
    out
}

/// Checks a plan against goal sequences using only its labelled
/// trajectories. Returns the first problem found.
pub fn check_realizes(case: &MapfCase, plan: &Plan) -> Result<(), String> {
    let cells = plan.cells();
    if let Some(c) = mapd_core::path::detect_conflict(&cells) {
        return Err(format!("collision {c:?}"));
    }
    let mut done_at: HashMap<(usize, usize), usize> = HashMap::new();
    for (i, seq) in case.seqs.iter().enumerate() {
        let traj = &plan.trajectories[i];
        if traj[0].cell != seq.base || traj.last().unwrap().cell != seq.base {
            return Err(format!("robot {i} does not start and end at its base"));
        }
        for t in 1..traj.len() {
            let (a, b) = (traj[t - 1].cell, traj[t].cell);
            if !case.ws.is_free(b) || a.manhattan(b) > 1 {
                return Err(format!("robot {i} jumps {a} -> {b} at {t}"));
            }
        }
        let events: Vec<(usize, Label)> = traj
            .iter()
            .enumerate()
            .filter(|(_, s)| !matches!(s.label, Label::Start | Label::Move))
            .map(|(t, s)| (t, s.label))
            .collect();
        let mut next = events.iter().copied().peekable();
        let mut prev_t = 0;
        for (k, cp) in seq.checkpoints.iter().enumerate() {
            // A return home reached in the same tick as the previous
            // checkpoint carries no label of its own.
            if cp.kind == CheckpointKind::ReturnHome && next.peek().is_none_or(|e| e.1 != Label::Return) {
                if traj[prev_t].cell != cp.cell {
                    return Err(format!("robot {i} event {k}: return home missing"));
                }
                done_at.insert((i, k), prev_t);
                continue;
            }
            let Some((t, label)) = next.next() else {
                return Err(format!("robot {i}: checkpoint {k} never completed"));
            };
            prev_t = t;
            let want = match (cp.kind, cp.task) {
                (CheckpointKind::Pick, Some(m)) => Label::Pick(m),
                (CheckpointKind::Drop, Some(m)) => Label::Drop(m),
                (CheckpointKind::DropIntermediate, Some(m)) => Label::InterDrop(m),
                (CheckpointKind::PickIntermediate, Some(m)) => Label::InterPick(m),
                _ => Label::Return,
            };
            if label != want || traj[t].cell != cp.cell {
                return Err(format!(
                    "robot {i} event {k}: {label} at {} for {want} at {}",
                    traj[t].cell, cp.cell
                ));
            }
            if cp.dwell == 1 && traj[t - 1].cell != cp.cell {
                return Err(format!("robot {i} event {k} completes without dwelling"));
            }
            done_at.insert((i, k), t);
        }
        if let Some((t, label)) = next.next() {
            return Err(format!("robot {i}: unexpected {label} at {t}"));
        }
    }
    for e in &case.edges {
        if done_at[&e.after] < done_at[&e.before] + 2 {
            return Err(format!("transfer {e:?} completes too early"));
        }
    }
    Ok(())
}
