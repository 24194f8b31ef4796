//! `mapd`: command-line driver for the integrated task and path planner.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use mapd_core::integrated::{audit_log, integrated_planner, IntegratedResult, Outcome};
use mapd_core::io::{
    aggregate, generate_instance, instance_to_json, load_instance, parse_plan_table, records_to_csv, render_plan_table,
    report_table, run_benchmark, BenchConfig, GeneratorConfig, MapStyle, RunLog,
};
use mapd_core::model::validate_instance;
use mapd_core::path::{validate_plan, CbsPlanner, Plan};
use mapd_core::task::smtlib::{emit_smtlib, SmtLibBackend};
use mapd_core::task::{DecisionBackend, ExclusionSet, NativeBackend, TaskContext};
use mapd_core::{Deadline, Instance, Objective};

const EXIT_OPTIMAL: u8 = 0;
const EXIT_USAGE: u8 = 1;
const EXIT_INFEASIBLE: u8 = 2;
const EXIT_TIMEOUT_INCUMBENT: u8 = 3;
const EXIT_TIMEOUT_NO_PLAN: u8 = 4;
/// `validate` and `audit` found a problem.
const EXIT_REJECTED: u8 = 5;

#[derive(Parser)]
#[command(
    name = "mapd",
    version,
    about = "Optimal integrated task and path planning for pickup and delivery"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve an instance file, or a generated one when --seed is given.
    Solve(SolveArgs),
    /// Write a random instance as JSON.
    Gen(GenArgs),
    /// Check an instance and optionally a plan table against it.
    Validate {
        instance: PathBuf,
        /// Plan table to check.
        #[arg(long)]
        plan: Option<PathBuf>,
    },
    /// Draw a plan as one map frame per time step.
    Render {
        instance: PathBuf,
        plan: PathBuf,
        /// Only draw this time step.
        #[arg(long)]
        t: Option<usize>,
    },
    /// Run a benchmark sweep described by a JSON config.
    Bench {
        config: PathBuf,
        /// Write per-run rows as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Write the aggregated report as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
        #[arg(long, default_value = "native")]
        backend: String,
    },
    /// Print the SMT-LIB2 decision query for an instance.
    EmitSmt {
        instance: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
        /// Lowest admissible cost.
        #[arg(long, default_value_t = 0)]
        lo: u32,
        /// Highest admissible cost; unbounded when absent.
        #[arg(long)]
        hi: Option<u32>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Re-verify the optimality claim of a saved iteration log.
    Audit {
        instance: PathBuf,
        log: PathBuf,
        #[arg(long, default_value_t = 3600.0)]
        timeout_s: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ObjectiveArg {
    Makespan,
    TotalCost,
}

impl From<ObjectiveArg> for Objective {
    fn from(o: ObjectiveArg) -> Self {
        match o {
            ObjectiveArg::Makespan => Objective::Makespan,
            ObjectiveArg::TotalCost => Objective::TotalCost,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum StyleArg {
    Random,
    Warehouse,
}

/// Settings applied on top of an instance file.
#[derive(Args)]
struct Overrides {
    #[arg(long, value_enum)]
    objective: Option<ObjectiveArg>,
    /// Action-step budget; defaults to the instance value.
    #[arg(long)]
    z: Option<usize>,
    /// Ignore intermediate transfer cells.
    #[arg(long)]
    no_intermediates: bool,
}

impl Overrides {
    fn apply(&self, mut inst: Instance) -> Instance {
        if let Some(o) = self.objective {
            inst.objective = o.into();
        }
        if let Some(z) = self.z {
            inst.z = z;
        }
        if self.no_intermediates {
            inst = inst.without_intermediates();
        }
        inst
    }
}

#[derive(Args)]
struct Shape {
    #[arg(long, default_value_t = 10)]
    width: usize,
    #[arg(long, default_value_t = 10)]
    height: usize,
    #[arg(long, default_value_t = 2)]
    robots: usize,
    #[arg(long, default_value_t = 2)]
    tasks: usize,
    #[arg(long, default_value_t = 0.0)]
    density: f64,
    #[arg(long, default_value_t = 0)]
    intermediates: usize,
    #[arg(long, value_enum, default_value = "random")]
    style: StyleArg,
    #[arg(long, default_value_t = 2)]
    capacity: u32,
}

impl Shape {
    fn config(&self, seed: u64) -> GeneratorConfig {
        GeneratorConfig {
            seed,
            width: self.width,
            height: self.height,
            obstacle_density: self.density,
            robots: self.robots,
            tasks: self.tasks,
            intermediates: self.intermediates,
            style: match self.style {
                StyleArg::Random => MapStyle::Random,
                StyleArg::Warehouse => MapStyle::Warehouse,
            },
            capacity: self.capacity,
            objective: Objective::Makespan,
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    #[arg(required_unless_present = "seed")]
    instance: Option<PathBuf>,
    /// Generate the instance from this seed instead of reading a file.
    #[arg(long, conflicts_with = "instance")]
    seed: Option<u64>,
    #[command(flatten)]
    shape: Shape,
    #[command(flatten)]
    overrides: Overrides,
    /// Solve at Z, Z+2 and Z+4 in turn.
    #[arg(long)]
    z_sweep: bool,
    /// Wall-clock budget per run; defaults to the instance's `timeout_s`.
    #[arg(long)]
    timeout_s: Option<f64>,
    /// `native` or `smtlib:<solver command>`.
    #[arg(long, default_value = "native")]
    backend: String,
    /// Write the plan table here instead of stdout.
    #[arg(long)]
    plan_out: Option<PathBuf>,
    /// Write the iteration log as JSON.
    #[arg(long)]
    log_out: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    shape: Shape,
    #[arg(long, value_enum)]
    objective: Option<ObjectiveArg>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

fn main() -> ExitCode {
    // Clap's own exit status for usage errors would collide with the
    // infeasible code.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}

fn run(cmd: Command) -> Result<u8> {
    match cmd {
        Command::Solve(args) => solve(&args),
        Command::Gen(args) => {
            let mut cfg = args.shape.config(args.seed);
            if let Some(o) = args.objective {
                cfg.objective = o.into();
            }
            let inst = generate_instance(&cfg)?;
            emit(args.output.as_deref(), &instance_to_json(&inst))?;
            Ok(EXIT_OPTIMAL)
        }
        Command::Validate { instance, plan } => validate(&instance, plan.as_deref()),
        Command::Render { instance, plan, t } => {
            let inst = load(&instance)?;
            let plan = read_plan(&plan, &inst)?;
            print!("{}", render_frames(&inst, &plan, t));
            Ok(EXIT_OPTIMAL)
        }
        Command::Bench {
            config,
            csv,
            json,
            backend,
        } => bench(&config, csv.as_deref(), json.as_deref(), &backend),
        Command::EmitSmt {
            instance,
            overrides,
            lo,
            hi,
            output,
        } => {
            let inst = overrides.apply(load(&instance)?);
            let ctx = TaskContext::new(&inst)?;
            emit(output.as_deref(), &emit_smtlib(&ctx, &ExclusionSet::new(), lo, hi))?;
            Ok(EXIT_OPTIMAL)
        }
        Command::Audit {
            instance,
            log,
            timeout_s,
        } => audit(&instance, &log, timeout_s),
    }
}

fn load(path: &Path) -> Result<Instance> {
    load_instance(path).with_context(|| format!("loading {}", path.display()))
}

fn read_plan(path: &Path, inst: &Instance) -> Result<Plan> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_plan_table(&text, inst.tasks.len()).with_context(|| format!("parsing {}", path.display()))
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn backend(choice: &str) -> Result<Box<dyn DecisionBackend>> {
    if choice == "native" {
        return Ok(Box::new(NativeBackend));
    }
    match choice.strip_prefix("smtlib:") {
        Some(cmd) => Ok(Box::new(SmtLibBackend::new(cmd)?)),
        None => bail!("unknown backend {choice:?}; expected native or smtlib:<command>"),
    }
}

fn exit_code(outcome: Outcome) -> u8 {
    match outcome {
        Outcome::Optimal => EXIT_OPTIMAL,
        Outcome::Infeasible => EXIT_INFEASIBLE,
        Outcome::TimeoutWithIncumbent => EXIT_TIMEOUT_INCUMBENT,
        Outcome::TimeoutNoPlan => EXIT_TIMEOUT_NO_PLAN,
    }
}

fn solve(args: &SolveArgs) -> Result<u8> {
    let base = match (&args.instance, args.seed) {
        (Some(path), _) => load(path)?,
        (None, Some(seed)) => {
            let mut cfg = args.shape.config(seed);
            if let Some(o) = args.overrides.objective {
                cfg.objective = o.into();
            }
            generate_instance(&cfg)?
        }
        (None, None) => bail!("an instance file or --seed is required"),
    };
    let base = args.overrides.apply(base);
    let zs = if args.z_sweep {
        vec![base.z, base.z + 2, base.z + 4]
    } else {
        vec![base.z]
    };
    let mut backend = backend(&args.backend)?;
    let mut code = EXIT_OPTIMAL;
    let mut last = None;
    for z in zs {
        let mut inst = base.clone().with_z(z);
        if let Some(t) = args.timeout_s {
            inst.timeout_s = t;
        }
        let start = Instant::now();
        let r = integrated_planner(
            &inst,
            backend.as_mut(),
            &mut CbsPlanner::default(),
            &Deadline::after_secs(inst.timeout_s),
        )?;
        let secs = start.elapsed().as_secs_f64();
        if let Some(plan) = &r.plan {
            if let Err(v) = validate_plan(&inst, plan) {
                bail!(
                    "planner produced an invalid plan: {}",
                    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
                );
            }
        }
        eprintln!("{}", summary(&inst, &r, secs));
        if code == EXIT_OPTIMAL {
            code = exit_code(r.outcome);
        }
        last = Some((inst, r));
    }
    let (inst, r) = last.expect("at least one Z value");
    if let Some(plan) = &r.plan {
        emit(args.plan_out.as_deref(), &render_plan_table(plan))?;
    }
    if let Some(path) = &args.log_out {
        let log = RunLog {
            objective: inst.objective,
            z: inst.z,
            intermediates: !args.overrides.no_intermediates,
            outcome: r.outcome,
            cost: r.cost(&inst),
            iterations: r.log,
        };
        emit(Some(path), &log.to_json())?;
    }
    Ok(code)
}

fn summary(inst: &Instance, r: &IntegratedResult, secs: f64) -> String {
    let metrics = match &r.plan {
        Some(p) => format!("makespan {} total_cost {}", p.makespan, p.total_cost),
        None => "no plan".into(),
    };
    format!(
        "z {} objective {} outcome {} {metrics} probes {} time {secs:.3}s",
        inst.z,
        inst.objective,
        r.outcome.name(),
        r.log.len()
    )
}

fn validate(instance: &Path, plan: Option<&Path>) -> Result<u8> {
    let inst = load(instance)?;
    if let Err(diags) = validate_instance(&inst) {
        for d in diags {
            println!("instance: {d}");
        }
        return Ok(EXIT_REJECTED);
    }
    println!("instance ok");
    let Some(path) = plan else {
        return Ok(EXIT_OPTIMAL);
    };
    let plan = read_plan(path, &inst)?;
    match validate_plan(&inst, &plan) {
        Ok(()) => {
            println!("plan ok: makespan {} total_cost {}", plan.makespan, plan.total_cost);
            Ok(EXIT_OPTIMAL)
        }
        Err(violations) => {
            for v in violations {
                println!("plan: {v}");
            }
            Ok(EXIT_REJECTED)
        }
    }
}

/// Robots are drawn as 1..9 then a..z; later ones as `*`.
fn robot_glyph(i: usize) -> char {
    match i {
        0..=8 => char::from(b'1' + i as u8),
        9..=34 => char::from(b'a' + (i - 9) as u8),
        _ => '*',
    }
}

fn render_frames(inst: &Instance, plan: &Plan, only: Option<usize>) -> String {
    let ws = &inst.workspace;
    let mut grid: Vec<Vec<char>> = ws.to_map_text().lines().map(|l| l.chars().collect()).collect();
    for task in &inst.tasks {
        for c in [task.pickup, task.drop] {
            grid[c.y as usize][c.x as usize] = '+';
        }
    }
    let mut out = String::new();
    for t in 0..=plan.makespan as usize {
        if only.is_some_and(|o| o != t) {
            continue;
        }
        let mut frame = grid.clone();
        for i in 0..plan.trajectories.len() {
            let c = plan.cell_at(i, t as u32);
            frame[c.y as usize][c.x as usize] = robot_glyph(i);
        }
        let _ = writeln!(out, "t={t}");
        for row in frame {
            out.extend(row);
            out.push('\n');
        }
        out.push('\n');
    }
    out
}

fn bench(config: &Path, csv: Option<&Path>, json: Option<&Path>, backend_choice: &str) -> Result<u8> {
    let text = fs::read_to_string(config).with_context(|| format!("reading {}", config.display()))?;
    let cfg: BenchConfig = serde_json::from_str(&text).with_context(|| format!("parsing {}", config.display()))?;
    let mut backend = backend(backend_choice)?;
    let records = run_benchmark(&cfg, backend.as_mut(), |r| {
        eprintln!("{} seed {}: {} in {:.3}s", r.config, r.seed, r.status, r.time_s);
    });
    let rows = aggregate(&records, cfg.timeout_s);
    print!("{}", report_table(&rows));
    if let Some(p) = csv {
        emit(Some(p), &records_to_csv(&records))?;
    }
    if let Some(p) = json {
        emit(Some(p), &(serde_json::to_string_pretty(&rows)? + "\n"))?;
    }
    Ok(EXIT_OPTIMAL)
}

fn audit(instance: &Path, log_path: &Path, timeout_s: f64) -> Result<u8> {
    let text = fs::read_to_string(log_path).with_context(|| format!("reading {}", log_path.display()))?;
    let log = RunLog::from_json(&text)?;
    let mut inst = load(instance)?.with_z(log.z).with_objective(log.objective);
    if !log.intermediates {
        inst = inst.without_intermediates();
    }
    if !matches!(log.outcome, Outcome::Optimal | Outcome::Infeasible) {
        println!("log records a {} run, which claims no optimum", log.outcome.name());
        return Ok(EXIT_OPTIMAL);
    }
    let findings = audit_log(&inst, &log.iterations, log.cost, &Deadline::after_secs(timeout_s))?;
    if findings.is_empty() {
        println!(
            "audit ok: {} probes, claimed cost {:?} confirmed",
            log.iterations.len(),
            log.cost
        );
        return Ok(EXIT_OPTIMAL);
    }
    for f in findings {
        println!("{f}");
    }
    Ok(EXIT_REJECTED)
}
