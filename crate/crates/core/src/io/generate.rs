//! Seeded random instance generation.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{min_feasible_z, Instance, Objective, Robot, Task};
use crate::workspace::{Cell, Workspace};

const MAX_ATTEMPTS: usize = 200;

/// Shelf blocks in warehouse maps are this many cells wide and two tall.
const SHELF_LEN: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MapStyle {
    /// Independent obstacles with the configured density.
    Random,
    /// Periodic shelf blocks separated by one-cell aisles. Density is
    /// ignored.
    Warehouse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub seed: u64,
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
}

fn default_style() -> MapStyle {
    MapStyle::Random
}

fn default_capacity() -> u32 {
    2
}

fn default_objective() -> Objective {
    Objective::Makespan
}

impl GeneratorConfig {
    pub fn new(seed: u64, width: usize, height: usize, robots: usize, tasks: usize) -> Self {
        GeneratorConfig {
            seed,
            width,
            height,
            obstacle_density: 0.0,
            robots,
            tasks,
            intermediates: 0,
            style: MapStyle::Random,
            capacity: default_capacity(),
            objective: Objective::Makespan,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GenError {
    #[error("obstacle density {0} must lie in [0, 1)")]
    Density(f64),
    #[error("at least one robot is required")]
    NoRobots,
    #[error("could not place {needed} distinct connected cells after {MAX_ATTEMPTS} attempts")]
    Placement { needed: usize },
}

fn warehouse_obstacles(width: usize, height: usize) -> Vec<Cell> {
    let mut out = Vec::new();
    for y in 1..height.saturating_sub(1) {
        if y % 3 == 0 {
            continue;
        }
        for x in 1..width.saturating_sub(1) {
            if x % (SHELF_LEN + 1) != 0 {
                out.push(Cell::new(x as i32, y as i32));
            }
        }
    }
    out
}

/// True when every cell in `cells` is reachable from the first one.
fn connected(ws: &Workspace, cells: &[Cell]) -> bool {
    let Some(&first) = cells.first() else {
        return true;
    };
    let field = ws.distance_field(first);
    cells.iter().all(|&c| field[ws.index(c)].is_some())
}

/// Builds a reproducible instance: the same config always yields the same
/// instance. Robots get distinct bases; bases, pickups, drops and
/// intermediate cells are pairwise distinct and mutually reachable.
pub fn generate_instance(cfg: &GeneratorConfig) -> Result<Instance, GenError> {
    if !(0.0..1.0).contains(&cfg.obstacle_density) {
        return Err(GenError::Density(cfg.obstacle_density));
    }
    if cfg.robots == 0 {
        return Err(GenError::NoRobots);
    }
    let needed = cfg.robots + 2 * cfg.tasks + cfg.intermediates;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for _ in 0..MAX_ATTEMPTS {
        let obstacles = match cfg.style {
            MapStyle::Warehouse => warehouse_obstacles(cfg.width, cfg.height),
            MapStyle::Random => {
                let mut obs = Vec::new();
                for y in 0..cfg.height {
                    for x in 0..cfg.width {
                        if rng.gen_bool(cfg.obstacle_density) {
                            obs.push(Cell::new(x as i32, y as i32));
                        }
                    }
                }
                obs
            }
        };
        let Ok(bare) = Workspace::new(cfg.width, cfg.height, obstacles.iter().copied(), []) else {
            continue;
        };
        let mut free: Vec<Cell> = bare.free_cells().collect();
        if free.len() < needed {
            if cfg.style == MapStyle::Warehouse {
                break;
            }
            continue;
        }
        free.shuffle(&mut rng);
        let picked = &free[..needed];
        if !connected(&bare, picked) {
            continue;
        }
        let (bases, rest) = picked.split_at(cfg.robots);
        let (task_cells, inter) = rest.split_at(2 * cfg.tasks);
        let ws = Workspace::new(cfg.width, cfg.height, obstacles, inter.iter().copied())
            .expect("intermediates were sampled from free cells");
        let robots = bases
            .iter()
            .enumerate()
            .map(|(id, &start)| Robot {
                id,
                start,
                capacity: cfg.capacity,
            })
            .collect();
        let tasks = task_cells
            .chunks(2)
            .enumerate()
            .map(|(id, pd)| Task {
                id,
                pickup: pd[0],
                drop: pd[1],
                weight: 1,
                deadline: None,
            })
            .collect();
        let mut inst = Instance::new(ws, robots, tasks, cfg.objective);
        inst.z = min_feasible_z(cfg.tasks, cfg.robots).expect("robots checked above");
        return Ok(inst);
    }
    Err(GenError::Placement { needed })
}
