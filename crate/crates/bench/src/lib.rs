//! Shared fixtures for the criterion benchmarks.

use debris_twin_core::classes::{ClassTable, MaterialTable, WindScale};
use debris_twin_core::projection::{build_depth_maps, default_eps, project_labels, SemanticCloud};
use debris_twin_core::synth::{generate, random_fixture, SynthScene};
use debris_twin_core::volumetry::{cluster_instances, register_ground, resample, DebrisInstance, HeightGrid};

pub const PATCH: u32 = 4;
pub const GRID_SIZE: f64 = 0.05;
pub const THRESHOLD: f64 = 0.05;

/// A seeded random debris scene at `density` points per square metre.
pub fn scene(seed: u64, density: f64) -> SynthScene {
    generate(&random_fixture(seed, density)).expect("fixture spec is valid")
}

pub fn fuse(s: &SynthScene) -> SemanticCloud {
    let maps = build_depth_maps(&s.scene.cloud.points, &s.scene.cameras, PATCH);
    project_labels(&s.scene, &s.masks, &maps, default_eps(&s.scene.cloud.points))
}

pub fn grid(cloud: &SemanticCloud) -> (HeightGrid, Vec<DebrisInstance>) {
    let plane = register_ground(cloud, THRESHOLD, 1000, 0).expect("fixture has ground");
    let grid = resample(cloud, &plane, GRID_SIZE, THRESHOLD).expect("grid resamples");
    let instances = cluster_instances(&grid, 4);
    (grid, instances)
}

pub fn tables() -> (ClassTable, MaterialTable, WindScale) {
    let classes = ClassTable::debris_default();
    let materials = MaterialTable::defaults_for(&classes);
    (classes, materials, WindScale::saffir_simpson())
}
