//! Semantic digital twins of construction jobsites for wind-borne debris
//! risk.
//!
//! The pipeline takes a reconstructed point cloud, calibrated camera poses
//! and one label mask per camera, and
//!
//! 1. projects mask labels onto the cloud, rejecting occluded points with
//!    per-camera depth maps ([`projection`]);
//! 2. registers the ground, resamples debris onto a height grid and
//!    measures each debris instance ([`volumetry`]);
//! 3. evaluates kinetic energy `½ρVU²` per cell and per instance for every
//!    wind category and renders heatmaps ([`risk`]).
//!
//! [`synth`] builds analytic test scenes with exact ground truth.

pub mod classes;
pub mod error;
pub mod io;
pub mod projection;
pub mod risk;
pub mod synth;
pub mod volumetry;

pub use classes::{ClassId, ClassTable, MaterialTable, WindCategory, WindScale};
pub use error::{Error, ErrorFamily, Location, Result};
pub use io::{CameraPose, Config, Intrinsics, LabelMask, PointCloud, Scene};
pub use projection::{DepthMap, PixelCoord, Projection, SemanticCloud};
pub use risk::{KeScale, RiskMap};
pub use synth::{SceneSpec, SynthScene};
pub use volumetry::{DebrisInstance, GroundPlane, HeightGrid};
