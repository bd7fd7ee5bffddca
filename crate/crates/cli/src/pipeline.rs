//! The depth, fuse and risk stages. Stages hand over through files in the
//! output directory, so each one can be rerun on its own.

use std::path::{Path, PathBuf};
use std::time::Instant;

use debris_twin_core::error::Location;
use debris_twin_core::io::depth::{read_depth_map, write_depth_map, write_depth_png};
use debris_twin_core::io::grid::{write_height_grid, write_instances_csv};
use debris_twin_core::io::{
    load_masks, read_cameras, read_label_list, read_labeled_cloud, read_point_cloud, write_labeled_cloud,
};
use debris_twin_core::projection::{build_depth_maps, default_eps, project_labels, DepthMap};
use debris_twin_core::risk::{build_risk_maps, flagged_cells, instance_risks, write_heatmap, KeScale};
use debris_twin_core::volumetry::{cluster_instances, register_ground, resample};
use debris_twin_core::{CameraPose, Config, Error, Result, Scene};
use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::StageError;
use crate::report::{
    class_counts, score_truth, CategoryReport, FuseSummary, GridReport, GroundReport, RiskSummary, StageTiming,
    Timing, Units,
};

pub const DEPTH_DIR: &str = "depth";
pub const LABELED_CLOUD: &str = "labeled_cloud.ply";
pub const FUSE_SUMMARY: &str = "fuse_summary.json";
pub const INSTANCES_CSV: &str = "instances.csv";
pub const SUMMARY: &str = "summary.json";
pub const TIMING: &str = "timing.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Depth,
    Fuse,
    Risk,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Depth => "depth",
            Stage::Fuse => "fuse",
            Stage::Risk => "risk",
        }
    }
}

/// What a stage wrote and how long it took.
#[derive(Clone, Debug)]
pub struct StageReport {
    pub stage: Stage,
    pub seconds: f64,
    pub outputs: Vec<PathBuf>,
}

pub fn depth_file(out: &Path, camera_index: usize) -> PathBuf {
    out.join(DEPTH_DIR).join(format!("cam_{camera_index:04}.depth"))
}

pub fn depth_png(out: &Path, camera_index: usize) -> PathBuf {
    out.join(DEPTH_DIR).join(format!("cam_{camera_index:04}.png"))
}

pub fn heatmap_png(out: &Path, category: u8) -> PathBuf {
    out.join(format!("risk_cat{category}.png"))
}

pub fn risk_json(out: &Path, category: u8) -> PathBuf {
    out.join(format!("risk_cat{category}.json"))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Write {
        path: dir.to_path_buf(),
        source,
    })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|source| Error::Write {
        path: path.to_path_buf(),
        source,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("reports serialize");
    text.push('\n');
    write_file(path, text.as_bytes())
}

/// A loaded configuration and the directory outputs go to.
#[derive(Clone, Debug)]
pub struct Pipeline {
    pub config: Config,
    pub out: PathBuf,
}

impl Pipeline {
    /// `out` overrides the configured output directory.
    pub fn new(config: Config, out: Option<PathBuf>) -> Pipeline {
        let out = out.unwrap_or_else(|| config.paths.outdir.clone());
        Pipeline { config, out }
    }

    pub fn load(config_path: &Path, out: Option<PathBuf>) -> std::result::Result<Pipeline, StageError> {
        let config = Config::load(config_path).map_err(|e| StageError::new("config", e))?;
        Ok(Pipeline::new(config, out))
    }

    fn timed(
        &self,
        stage: Stage,
        run: impl FnOnce() -> Result<Vec<PathBuf>>,
    ) -> std::result::Result<StageReport, StageError> {
        let start = Instant::now();
        let outputs = run().map_err(|e| StageError::new(stage.name(), e))?;
        let seconds = start.elapsed().as_secs_f64();
        info!("{}: {} outputs in {seconds:.3} s", stage.name(), outputs.len());
        Ok(StageReport { stage, seconds, outputs })
    }

    /// Builds one depth map per camera and writes the binary map and a
    /// preview PNG for each.
    pub fn depth(&self) -> std::result::Result<StageReport, StageError> {
        self.timed(Stage::Depth, || {
            let cameras = read_cameras(&self.config.paths.cameras)?;
            let cloud = read_point_cloud(&self.config.paths.cloud)?;
            let scene = Scene::new(cameras, cloud, self.config.classes.clone())?;
            let d = self.config.projection.downsample;
            info!(
                "depth: {} points, {} cameras, {d}x{d} patches",
                scene.cloud.len(),
                scene.cameras.len()
            );
            let maps = build_depth_maps(&scene.cloud.points, &scene.cameras, d);
            create_dir(&self.out.join(DEPTH_DIR))?;
            let written: Vec<Vec<PathBuf>> = maps
                .par_iter()
                .enumerate()
                .map(|(i, map)| {
                    let (bin, png) = (depth_file(&self.out, i), depth_png(&self.out, i));
                    write_depth_map(map, &bin)?;
                    write_depth_png(map, &png)?;
                    Ok(vec![bin, png])
                })
                .collect::<Result<_>>()?;
            Ok(written.into_iter().flatten().collect())
        })
    }

    /// Reads the depth stage's maps when they all match the cameras and
    /// patch size; otherwise builds them in memory.
    fn depth_maps_for(&self, scene: &Scene) -> Result<Vec<DepthMap>> {
        let d = self.config.projection.downsample;
        let stored: Option<Vec<DepthMap>> = scene
            .cameras
            .par_iter()
            .enumerate()
            .map(|(i, cam)| {
                let path = depth_file(&self.out, i);
                if !path.is_file() {
                    return Ok(None);
                }
                let map = read_depth_map(&path)?;
                Ok(matches_camera(&map, cam, d).then_some(map))
            })
            .collect::<Result<Vec<Option<DepthMap>>>>()?
            .into_iter()
            .collect();
        Ok(match stored {
            Some(maps) => maps,
            None => {
                warn!("fuse: depth maps missing or stale in {}; building them in memory", self.out.display());
                build_depth_maps(&scene.cloud.points, &scene.cameras, d)
            }
        })
    }

    /// Projects mask labels onto the cloud with the visibility test and
    /// writes the labelled cloud and a per-class summary.
    pub fn fuse(&self) -> std::result::Result<StageReport, StageError> {
        self.timed(Stage::Fuse, || {
            let paths = &self.config.paths;
            let classes = &self.config.classes;
            let cameras = read_cameras(&paths.cameras)?;
            let cloud = read_point_cloud(&paths.cloud)?;
            let masks = load_masks(&cameras, &paths.masks, classes)?;
            let scene = Scene::new(cameras, cloud, classes.clone())?;
            let truth = match &paths.truth {
                Some(p) => {
                    let t = read_label_list(p, classes)?;
                    if t.len() != scene.cloud.len() {
                        return Err(Error::Malformed {
                            source_name: p.display().to_string(),
                            location: Location::Line(t.len()),
                            message: format!("{} labels for {} points", t.len(), scene.cloud.len()),
                        });
                    }
                    Some(t)
                }
                None => None,
            };
            let maps = self.depth_maps_for(&scene)?;
            let (eps, eps_source) = match self.config.projection.eps {
                Some(e) => (e, "config"),
                None => (default_eps(&scene.cloud.points), "point_spacing"),
            };
            info!("fuse: eps {eps:.5} ({eps_source})");
            let fused = project_labels(&scene, &masks, &maps, eps);

            create_dir(&self.out)?;
            let ply = self.out.join(LABELED_CLOUD);
            write_labeled_cloud(&fused, &ply)?;
            let summary = FuseSummary {
                points: fused.len(),
                cameras: scene.cameras.len(),
                downsample: self.config.projection.downsample,
                eps,
                eps_source,
                unsupported_points: (0..fused.len()).filter(|&i| fused.support(i) == 0).count(),
                class_counts: class_counts(&fused, classes),
                truth: truth.map(|t| score_truth(&fused, &t, classes)),
            };
            let json = self.out.join(FUSE_SUMMARY);
            write_json(&json, &summary)?;
            Ok(vec![ply, json])
        })
    }

    /// Ground registration, height grid, instances, per-category risk maps,
    /// heatmaps and the JSON summary.
    pub fn risk(&self) -> std::result::Result<StageReport, StageError> {
        self.timed(Stage::Risk, || {
            let cfg = &self.config;
            let v = &cfg.volumetry;
            let classes = &cfg.classes;
            let ply = self.out.join(LABELED_CLOUD);
            let cloud = read_labeled_cloud(&ply)?;
            if cloud.class_count() != classes.len() {
                return Err(Error::Malformed {
                    source_name: ply.display().to_string(),
                    location: Location::Line(1),
                    message: format!(
                        "cloud carries votes for {} classes but the config lists {}",
                        cloud.class_count(),
                        classes.len()
                    ),
                });
            }
            let plane = register_ground(&cloud, v.inlier_threshold, v.max_iters, v.seed)?;
            let grid = resample(&cloud, &plane, v.grid_size, v.inlier_threshold)?;
            let instances = cluster_instances(&grid, v.min_cells);
            info!(
                "risk: ground inliers {:.1}%, grid {}x{}, {} instances",
                plane.inlier_fraction * 100.0,
                grid.cols(),
                grid.rows(),
                instances.len()
            );
            let maps = build_risk_maps(&grid, &instances, &cfg.materials, classes, &cfg.wind)?;

            create_dir(&self.out)?;
            write_height_grid(&grid, &self.out)?;
            let mut outputs: Vec<PathBuf> =
                ["height.asc", "class.asc", "count.asc"].iter().map(|f| self.out.join(f)).collect();
            let csv = self.out.join(INSTANCES_CSV);
            write_instances_csv(&instances, classes, &csv)?;
            outputs.push(csv);

            let scale = KeScale::from_maps(&maps);
            let threshold = cfg.risk.threshold;
            let per_map: Vec<(CategoryReport, Vec<PathBuf>)> = maps
                .par_iter()
                .map(|map| {
                    let png = heatmap_png(&self.out, map.category);
                    write_heatmap(map, scale.as_ref(), cfg.risk.pixels_per_cell, threshold, classes, &png)?;
                    let json = risk_json(&self.out, map.category);
                    write_file(&json, (map.to_json() + "\n").as_bytes())?;
                    let flagged = png.with_file_name(format!("risk_cat{}_flagged.csv", map.category));
                    let report = CategoryReport {
                        category: map.category,
                        speed: map.speed,
                        max_cell_energy: map.max_energy(),
                        flagged_cells: flagged_cells(map, threshold).len(),
                        heatmap: format!("risk_cat{}.png", map.category),
                    };
                    Ok((report, vec![png, flagged, json]))
                })
                .collect::<Result<_>>()?;
            let mut categories = Vec::with_capacity(per_map.len());
            for (report, files) in per_map {
                categories.push(report);
                outputs.extend(files);
            }

            let n = plane.normal;
            let summary = RiskSummary {
                scaled: cfg.scene.scaled,
                units: Units::for_scene(cfg.scene.scaled),
                ground: GroundReport {
                    normal: [n.x, n.y, n.z],
                    offset: plane.offset,
                    inlier_fraction: plane.inlier_fraction,
                },
                grid: GridReport {
                    origin: grid.origin(),
                    cell_size: grid.cell_size(),
                    cols: grid.cols(),
                    rows: grid.rows(),
                    occupied_cells: (0..grid.len()).filter(|&i| grid.is_occupied(i)).count(),
                },
                site_volume: grid.total_volume(),
                instance_volume: instances.iter().map(|i| i.volume).sum(),
                threshold_j: threshold,
                categories,
                instances: instance_risks(&instances, &maps, classes),
            };
            let path = self.out.join(SUMMARY);
            write_json(&path, &summary)?;
            outputs.push(path);
            Ok(outputs)
        })
    }

    /// Runs depth, fuse and risk in order, stopping at the first failure,
    /// and writes `timing.json`.
    pub fn all(&self, threads: usize) -> std::result::Result<Vec<StageReport>, StageError> {
        let reports = vec![self.depth()?, self.fuse()?, self.risk()?];
        let timing = Timing {
            threads,
            stages: reports
                .iter()
                .map(|r| StageTiming {
                    stage: r.stage.name(),
                    seconds: r.seconds,
                })
                .collect(),
            total_seconds: reports.iter().map(|r| r.seconds).sum(),
        };
        let path = self.out.join(TIMING);
        write_json(&path, &timing).map_err(|e| StageError::new("all", e))?;
        Ok(reports)
    }
}

fn matches_camera(map: &DepthMap, cam: &CameraPose, downsample: u32) -> bool {
    map.camera_id() == cam.id && map.image_size() == (cam.width, cam.height) && map.downsample() == downsample
}
