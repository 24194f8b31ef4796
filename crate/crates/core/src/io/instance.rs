//! Instance files (JSON).

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::model::{Instance, Objective, Robot, Task, Time, DEFAULT_TIMEOUT_S};
use crate::workspace::{parse_map, Cell};

use super::IoError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MapSource {
    /// Inline map rows.
    Rows(Vec<String>),
    /// Map file, relative paths resolved against the instance file.
    Path(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotEntry {
    pub id: usize,
    pub start: Cell,
    pub capacity: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskEntry {
    pub id: usize,
    pub pickup: Cell,
    pub drop: Cell,
    pub weight: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deadline: Option<Time>,
}

fn default_objective() -> Objective {
    Objective::Makespan
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub map: MapSource,
    pub robots: Vec<RobotEntry>,
    pub tasks: Vec<TaskEntry>,
    #[serde(default = "default_objective")]
    pub objective: Objective,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timeout_s: Option<f64>,
    #[serde(default, skip_serializing_if = "is_false")]
    pub allow_degenerate: bool,
}

impl InstanceFile {
    pub fn from_instance(inst: &Instance) -> Self {
        InstanceFile {
            map: MapSource::Rows(inst.workspace.to_map_text().lines().map(String::from).collect()),
            robots: inst
                .robots
                .iter()
                .map(|r| RobotEntry {
                    id: r.id,
                    start: r.start,
                    capacity: r.capacity,
                })
                .collect(),
            tasks: inst
                .tasks
                .iter()
                .map(|t| TaskEntry {
                    id: t.id,
                    pickup: t.pickup,
                    drop: t.drop,
                    weight: t.weight,
                    deadline: t.deadline,
                })
                .collect(),
            objective: inst.objective,
            z: Some(inst.z),
            timeout_s: (inst.timeout_s != DEFAULT_TIMEOUT_S).then_some(inst.timeout_s),
            allow_degenerate: inst.allow_degenerate,
        }
    }

    pub fn into_instance(self, base_dir: Option<&Path>) -> Result<Instance, IoError> {
        let text = match &self.map {
            MapSource::Rows(rows) => rows.join("\n"),
            MapSource::Path(p) => {
                let path = resolve(base_dir, p);
                fs::read_to_string(&path).map_err(|source| IoError::Read { path, source })?
            }
        };
        let workspace = parse_map(&text)?;
        let robots = self
            .robots
            .iter()
            .map(|r| Robot {
                id: r.id,
                start: r.start,
                capacity: r.capacity,
            })
            .collect::<Vec<_>>();
        if robots.is_empty() {
            return Err(IoError::Schema("instance has no robots".into()));
        }
        let tasks = self
            .tasks
            .iter()
            .map(|t| Task {
                id: t.id,
                pickup: t.pickup,
                drop: t.drop,
                weight: t.weight,
                deadline: t.deadline,
            })
            .collect();
        let mut inst = Instance::new(workspace, robots, tasks, self.objective);
        if let Some(z) = self.z {
            inst.z = z;
        }
        if let Some(t) = self.timeout_s {
            inst.timeout_s = t;
        }
        inst.allow_degenerate = self.allow_degenerate;
        Ok(inst)
    }
}

fn resolve(base_dir: Option<&Path>, p: &str) -> PathBuf {
    let path = Path::new(p);
    match base_dir {
        Some(dir) if path.is_relative() => dir.join(path),
        _ => path.to_path_buf(),
    }
}

pub fn parse_instance(text: &str, base_dir: Option<&Path>) -> Result<Instance, IoError> {
    let file: InstanceFile = serde_json::from_str(text)?;
    file.into_instance(base_dir)
}

pub fn load_instance(path: &Path) -> Result<Instance, IoError> {
    let text = fs::read_to_string(path).map_err(|source| IoError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    parse_instance(&text, path.parent())
}

/// Pretty JSON with the map inlined, newline-terminated.
pub fn instance_to_json(inst: &Instance) -> String {
    let mut s = serde_json::to_string_pretty(&InstanceFile::from_instance(inst)).expect("instance serializes");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    const DOC: &str = r#"{
  "map": ["....", ".#I.", "...."],
  "robots": [{"id": 0, "start": [0, 0], "capacity": 2}],
  "tasks": [{"id": 0, "pickup": [3, 0], "drop": [0, 2], "weight": 1, "deadline": 40}],
  "objective": "total-cost"
}"#;

    #[test]
    fn parses_inline_map() {
        let inst = parse_instance(DOC, None).unwrap();
        assert_eq!(inst.workspace.width(), 4);
        assert_eq!(inst.workspace.intermediates(), &[Cell::new(2, 1)]);
        assert_eq!(inst.objective, Objective::TotalCost);
        assert_eq!(inst.z, 3);
        assert_eq!(inst.tasks[0].deadline, Some(40));
        assert_eq!(inst.timeout_s, DEFAULT_TIMEOUT_S);
    }

    #[test]
    fn json_round_trip_is_stable() {
        let inst = parse_instance(DOC, None).unwrap();
        let a = instance_to_json(&inst);
        let again = parse_instance(&a, None).unwrap();
        assert_eq!(instance_to_json(&again), a);
        assert!(a.contains("\"total_cost\""));
    }

    #[test]
    fn rejects_unknown_keys_and_empty_robots() {
        let bad = DOC.replace("\"objective\"", "\"objectiv\"");
        assert!(matches!(parse_instance(&bad, None), Err(IoError::Json(_))));
        let none = r#"{"map": ["."], "robots": [], "tasks": []}"#;
        assert!(matches!(parse_instance(none, None), Err(IoError::Schema(_))));
    }

    #[test]
    fn map_path_is_relative_to_instance() {
        let dir = std::env::temp_dir().join(format!("mapd-inst-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        fs::write(dir.join("grid.map"), "..\n..\n").unwrap();
        let doc = r#"{"map": "grid.map", "robots": [{"id": 0, "start": [1, 1], "capacity": 1}], "tasks": []}"#;
        fs::write(dir.join("inst.json"), doc).unwrap();
        let inst = load_instance(&dir.join("inst.json")).unwrap();
        assert_eq!(inst.workspace.height(), 2);
        assert_eq!(inst.z, 1);
        fs::remove_dir_all(&dir).unwrap();
    }
}
