//! Navigation toward a goal in partially known maps: occupancy mapping with
//! a noisy depth sensor, hypothesis path planning, next-best-view selection
//! and a kinematic closed-loop simulator.

pub mod geometry;
pub mod grid;
pub mod nbv;
pub mod planner;
pub mod search;
pub mod sensor;
pub mod sim;

pub use geometry::{Path, Pose, WorldPoint};
pub use grid::{CellClass, CellIndex, ClassifierConfig, GridSpec, OccupancyGrid, OccupancyView};
