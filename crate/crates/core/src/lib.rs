//! Optimal integrated task and path planning for multi-robot pickup and
//! delivery with intermediate transfer cells.

pub mod clock;
pub mod error;
pub mod integrated;
pub mod io;
pub mod model;
pub mod path;
pub mod task;
pub mod workspace;

pub use clock::Deadline;
pub use error::PlanError;
pub use model::{Instance, Objective, Robot, Task, Time};
pub use workspace::{Cell, DistanceOracle, Workspace};
