//! File formats, instance generation and benchmark sweeps.

pub mod bench;
pub mod generate;
pub mod instance;
pub mod table;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::integrated::{IterationRecord, Outcome};
use crate::model::{Objective, Time};
use crate::workspace::MapError;

pub use bench::{
    aggregate, records_from_csv, records_to_csv, report_table, run_benchmark, BenchConfig, BenchEntry, ReportRow,
    RunRecord,
};
pub use generate::{generate_instance, GenError, GeneratorConfig, MapStyle};
pub use instance::{instance_to_json, load_instance, parse_instance, InstanceFile, MapSource};
pub use table::{parse_plan_table, render_plan_table, TableError};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("cannot read {}: {source}", path.display())]
    Read { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error("{0}")]
    Schema(String),
}

/// Persisted record of one planner run, enough to re-audit its claim.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunLog {
    pub objective: Objective,
    pub z: usize,
    /// False when the run ignored intermediate transfer cells.
    #[serde(default = "yes")]
    pub intermediates: bool,
    pub outcome: Outcome,
    pub cost: Option<Time>,
    pub iterations: Vec<IterationRecord>,
}

fn yes() -> bool {
    true
}

impl RunLog {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string(self).expect("log serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, IoError> {
        Ok(serde_json::from_str(text)?)
    }
}
