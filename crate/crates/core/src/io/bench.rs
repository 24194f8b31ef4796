//! Benchmark sweeps over generated instances.
//!
//! A run that does not finish with a proven optimum counts as a failure:
//! it contributes the full timeout to the time statistics and is left out of
//! the makespan and total-cost means.

use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::clock::Deadline;
use crate::integrated::{integrated_planner, Outcome};
use crate::model::{Objective, Time};
use crate::path::{validate_plan, CbsPlanner};
use crate::task::DecisionBackend;

use super::generate::{generate_instance, GeneratorConfig, MapStyle};
use super::IoError;

fn default_style() -> MapStyle {
    MapStyle::Random
}

fn default_capacity() -> u32 {
    2
}

fn default_objective() -> Objective {
    Objective::Makespan
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchEntry {
    pub name: String,
    pub width: usize,
    pub height: usize,
    #[serde(default)]
    pub obstacle_density: f64,
    pub robots: usize,
    pub tasks: usize,
    #[serde(default)]
    pub intermediates: usize,
    #[serde(default = "default_style")]
    pub style: MapStyle,
    #[serde(default = "default_capacity")]
    pub capacity: u32,
    #[serde(default = "default_objective")]
    pub objective: Objective,
    /// Action steps added on top of the minimal feasible budget.
    #[serde(default)]
    pub z_offset: usize,
    pub seeds: Vec<u64>,
}

impl BenchEntry {
    pub fn generator(&self, seed: u64) -> GeneratorConfig {
        GeneratorConfig {
            seed,
            width: self.width,
            height: self.height,
            obstacle_density: self.obstacle_density,
            robots: self.robots,
            tasks: self.tasks,
            intermediates: self.intermediates,
            style: self.style,
            capacity: self.capacity,
            objective: self.objective,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub timeout_s: f64,
    pub configs: Vec<BenchEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: String,
    pub seed: u64,
    /// An [`Outcome`] name, or `error`.
    pub status: String,
    pub time_s: f64,
    pub makespan: Option<Time>,
    pub total_cost: Option<Time>,
}

impl RunRecord {
    pub fn solved(&self) -> bool {
        self.status == Outcome::Optimal.name()
    }
}

/// Row as written to CSV: time with millisecond resolution.
#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    config: String,
    seed: u64,
    status: String,
    time_s: String,
    makespan: Option<Time>,
    total_cost: Option<Time>,
}

pub fn records_to_csv(records: &[RunRecord]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(CsvRow {
            config: r.config.clone(),
            seed: r.seed,
            status: r.status.clone(),
            time_s: format!("{:.3}", r.time_s),
            makespan: r.makespan,
            total_cost: r.total_cost,
        })
        .expect("in-memory CSV write");
    }
    if records.is_empty() {
        return "config,seed,status,time_s,makespan,total_cost\n".into();
    }
    String::from_utf8(w.into_inner().expect("in-memory CSV flush")).expect("CSV is UTF-8")
}

pub fn records_from_csv(text: &str) -> Result<Vec<RunRecord>, IoError> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let mut out = Vec::new();
    for row in rdr.deserialize::<CsvRow>() {
        let row = row.map_err(|e| IoError::Schema(e.to_string()))?;
        let time_s = row
            .time_s
            .parse()
            .map_err(|_| IoError::Schema(format!("bad time {:?}", row.time_s)))?;
        out.push(RunRecord {
            config: row.config,
            seed: row.seed,
            status: row.status,
            time_s,
            makespan: row.makespan,
            total_cost: row.total_cost,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub config: String,
    pub runs: usize,
    pub solved: usize,
    pub success: f64,
    pub time_mean: f64,
    pub time_std: f64,
    pub makespan_mean: Option<f64>,
    pub makespan_std: Option<f64>,
    pub total_cost_mean: Option<f64>,
    pub total_cost_std: Option<f64>,
    pub timeout_s: f64,
}

/// Mean and sample standard deviation.
fn mean_std(xs: &[f64]) -> Option<(f64, f64)> {
    if xs.is_empty() {
        return None;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let std = if xs.len() > 1 {
        (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Some((mean, std))
}

/// One row per configuration name, in order of first appearance.
pub fn aggregate(records: &[RunRecord], timeout_s: f64) -> Vec<ReportRow> {
    let mut names: Vec<&str> = Vec::new();
    for r in records {
        if !names.contains(&r.config.as_str()) {
            names.push(&r.config);
        }
    }
    names
        .into_iter()
        .map(|name| {
            let rs: Vec<&RunRecord> = records.iter().filter(|r| r.config == name).collect();
            let solved: Vec<&&RunRecord> = rs.iter().filter(|r| r.solved()).collect();
            let times: Vec<f64> = rs
                .iter()
                .map(|r| if r.solved() { r.time_s } else { timeout_s })
                .collect();
            let metric = |f: fn(&RunRecord) -> Option<Time>| {
                let xs: Vec<f64> = solved.iter().filter_map(|r| f(r)).map(f64::from).collect();
                mean_std(&xs)
            };
            let (time_mean, time_std) = mean_std(&times).unwrap_or((0.0, 0.0));
            let mk = metric(|r| r.makespan);
            let tc = metric(|r| r.total_cost);
            ReportRow {
                config: name.to_string(),
                runs: rs.len(),
                solved: solved.len(),
                success: solved.len() as f64 / rs.len() as f64,
                time_mean,
                time_std,
                makespan_mean: mk.map(|m| m.0),
                makespan_std: mk.map(|m| m.1),
                total_cost_mean: tc.map(|m| m.0),
                total_cost_std: tc.map(|m| m.1),
                timeout_s,
            }
        })
        .collect()
}

pub fn report_table(rows: &[ReportRow]) -> String {
    let pm = |m: Option<f64>, s: Option<f64>| match (m, s) {
        (Some(m), Some(s)) => format!("{m:.2} ± {s:.2}"),
        _ => "-".into(),
    };
    let mut out = format!(
        "{:<16} {:>5} {:>8} {:>20} {:>18} {:>18}\n",
        "config", "runs", "success", "time_s", "makespan", "total_cost"
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{:<16} {:>5} {:>8.2} {:>20} {:>18} {:>18}",
            r.config,
            r.runs,
            r.success,
            format!("{:.3} ± {:.3}", r.time_mean, r.time_std),
            pm(r.makespan_mean, r.makespan_std),
            pm(r.total_cost_mean, r.total_cost_std),
        );
    }
    out
}

/// Runs every configuration and seed in order. Failures of individual runs
/// are recorded, never propagated; `on_run` sees each record as it lands.
pub fn run_benchmark(
    cfg: &BenchConfig,
    backend: &mut dyn DecisionBackend,
    mut on_run: impl FnMut(&RunRecord),
) -> Vec<RunRecord> {
    let mut records = Vec::new();
    for entry in &cfg.configs {
        for &seed in &entry.seeds {
            let start = Instant::now();
            let deadline = Deadline::after_secs(cfg.timeout_s);
            let result = generate_instance(&entry.generator(seed))
                .map_err(|e| e.to_string())
                .and_then(|mut inst| {
                    inst.z += entry.z_offset;
                    inst.timeout_s = cfg.timeout_s;
                    let r = integrated_planner(&inst, backend, &mut CbsPlanner::default(), &deadline)
                        .map_err(|e| e.to_string())?;
                    if let Some(plan) = &r.plan {
                        validate_plan(&inst, plan).map_err(|v| format!("invalid plan: {v:?}"))?;
                    }
                    Ok(r)
                });
            let time_s = start.elapsed().as_secs_f64();
            let record = match result {
                Ok(r) => RunRecord {
                    config: entry.name.clone(),
                    seed,
                    status: r.outcome.name().into(),
                    time_s,
                    makespan: r.plan.as_ref().map(|p| p.makespan),
                    total_cost: r.plan.as_ref().map(|p| p.total_cost),
                },
                Err(_) => RunRecord {
                    config: entry.name.clone(),
                    seed,
                    status: "error".into(),
                    time_s,
                    makespan: None,
                    total_cost: None,
                },
            };
            on_run(&record);
            records.push(record);
        }
    }
    records
}
