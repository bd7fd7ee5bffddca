//! Ground registration, height-grid resampling and debris volumes.

mod grid;
mod ground;
mod instances;

pub use grid::{resample, HeightGrid, MAX_GRID_CELLS};
pub use ground::{register_ground, GroundPlane};
pub use instances::{cluster_instances, compute_volume, DebrisInstance};
