//! Instances shared by the criterion benchmarks.

use mapd_core::io::{generate_instance, GeneratorConfig, MapStyle};
use mapd_core::{Cell, Instance, Objective, Robot, Task, Workspace};

/// Two robots on an 8x7 open grid with one transfer cell. Handing the first
/// task over at the transfer cell shortens the makespan.
pub fn transfer(objective: Objective) -> Instance {
    let c = Cell::new;
    let ws = Workspace::new(8, 7, [], [c(4, 4)]).expect("transfer cell lies on the grid");
    let robots = vec![
        Robot {
            id: 0,
            start: c(0, 0),
            capacity: 2,
        },
        Robot {
            id: 1,
            start: c(7, 3),
            capacity: 2,
        },
    ];
    let task = |id, pickup, drop| Task {
        id,
        pickup,
        drop,
        weight: 1,
        deadline: None,
    };
    let tasks = vec![task(0, c(0, 1), c(7, 6)), task(1, c(1, 6), c(0, 3))];
    Instance::new(ws, robots, tasks, objective).with_z(5)
}

/// Warehouse-style instance of the given side length.
pub fn warehouse(seed: u64, size: usize, robots: usize, tasks: usize) -> Instance {
    let mut cfg = GeneratorConfig::new(seed, size, size, robots, tasks);
    cfg.style = MapStyle::Warehouse;
    generate_instance(&cfg).expect("warehouse maps have room for every placement")
}
