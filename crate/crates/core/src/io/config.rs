//! Pipeline configuration (`config.toml`).
//!
//! ```toml
//! [paths]              # relative paths resolve against the config file
//! cameras = "cameras.txt"
//! cloud = "cloud.ply"
//! masks = "masks"
//! outdir = "out"       # optional, default "out"
//! truth = "truth_labels.txt"  # optional per-point class indices for scoring
//!
//! [classes]
//! names = ["background", "metal_girder", "portable_toilet", "pvc_piping", "plywood", "metal_piping"]
//!
//! [densities]          # kg/m³ by class name
//! plywood = 600.0
//!
//! [wind]
//! speeds = [33.0, 43.0, 50.0, 58.0, 70.0]   # m/s for categories 1..n
//!
//! [projection]
//! downsample = 4       # depth-map patch size in pixels
//! eps = 0.05           # optional; default 3 x median point spacing
//!
//! [volumetry]
//! grid_size = 0.05
//! min_cells = 4
//! inlier_threshold = 0.05
//! max_iters = 1000
//! seed = 0
//!
//! [risk]
//! threshold = 50000.0  # optional, joules
//! pixels_per_cell = 4
//!
//! [scene]
//! scaled = true        # false when the reconstruction has no metric scale
//! ```
//!
//! Every section is optional except `[paths]`; unknown keys are rejected.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::classes::{ClassTable, MaterialTable, WindScale};
use crate::error::{Error, Result};

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    paths: RawPaths,
    classes: Option<RawClasses>,
    densities: Option<BTreeMap<String, f64>>,
    wind: Option<RawWind>,
    #[serde(default)]
    projection: ProjectionSettings,
    #[serde(default)]
    volumetry: VolumetrySettings,
    #[serde(default)]
    risk: RiskSettings,
    #[serde(default)]
    scene: SceneSettings,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPaths {
    cameras: PathBuf,
    cloud: PathBuf,
    masks: PathBuf,
    outdir: Option<PathBuf>,
    truth: Option<PathBuf>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawClasses {
    names: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWind {
    speeds: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Paths {
    pub cameras: PathBuf,
    pub cloud: PathBuf,
    pub masks: PathBuf,
    pub outdir: PathBuf,
    /// Reference labels, one class index per cloud point.
    pub truth: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProjectionSettings {
    /// Depth-map patch edge in pixels.
    pub downsample: u32,
    /// Visibility tolerance in meters; `None` derives it from point spacing.
    pub eps: Option<f64>,
}

impl Default for ProjectionSettings {
    fn default() -> Self {
        ProjectionSettings {
            downsample: 4,
            eps: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VolumetrySettings {
    /// Height-grid cell size, meters.
    pub grid_size: f64,
    /// Smallest debris footprint, in cells.
    pub min_cells: usize,
    /// Ground inlier distance, meters.
    pub inlier_threshold: f64,
    pub max_iters: usize,
    pub seed: u64,
}

impl Default for VolumetrySettings {
    fn default() -> Self {
        VolumetrySettings {
            grid_size: 0.05,
            min_cells: 4,
            inlier_threshold: 0.05,
            max_iters: 1000,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RiskSettings {
    /// Cells with kinetic energy above this (joules) are flagged.
    pub threshold: Option<f64>,
    /// Heatmap pixels per grid cell edge.
    pub pixels_per_cell: u32,
}

impl Default for RiskSettings {
    fn default() -> Self {
        RiskSettings {
            threshold: None,
            pixels_per_cell: 4,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SceneSettings {
    /// Whether world units are meters.
    pub scaled: bool,
}

impl Default for SceneSettings {
    fn default() -> Self {
        SceneSettings { scaled: true }
    }
}

#[derive(Clone, Debug)]
pub struct Config {
    pub paths: Paths,
    pub classes: ClassTable,
    pub materials: MaterialTable,
    pub wind: WindScale,
    pub projection: ProjectionSettings,
    pub volumetry: VolumetrySettings,
    pub risk: RiskSettings,
    pub scene: SceneSettings,
}

impl Config {
    pub fn load(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::read(path, e))?;
        let base = path.parent().unwrap_or(Path::new(""));
        Config::parse(&text, base, &path.display().to_string())
    }

    /// Parses config text; relative paths are joined onto `base_dir`.
    pub fn parse(text: &str, base_dir: &Path, source_name: &str) -> Result<Config> {
        let raw: RawConfig =
            toml::from_str(text).map_err(|e| Error::config(source_name, e.to_string().trim_end()))?;
        let tag = |e: Error| match e {
            Error::Config { message, .. } => Error::config(source_name, message),
            other => other,
        };
        let resolve = |p: PathBuf| if p.is_absolute() { p } else { base_dir.join(p) };
        let paths = Paths {
            cameras: resolve(raw.paths.cameras),
            cloud: resolve(raw.paths.cloud),
            masks: resolve(raw.paths.masks),
            outdir: resolve(raw.paths.outdir.unwrap_or_else(|| PathBuf::from("out"))),
            truth: raw.paths.truth.map(resolve),
        };
        let classes = match raw.classes {
            Some(c) => ClassTable::new(c.names).map_err(tag)?,
            None => ClassTable::debris_default(),
        };
        let materials = match raw.densities {
            Some(map) => {
                let mut entries = Vec::with_capacity(map.len());
                for (name, rho) in map {
                    let id = classes.id_of(&name).ok_or_else(|| {
                        Error::config(source_name, format!("density given for unknown class {name:?}"))
                    })?;
                    entries.push((id, rho));
                }
                MaterialTable::new(entries).map_err(tag)?
            }
            None => MaterialTable::defaults_for(&classes),
        };
        let wind = match raw.wind {
            Some(w) => WindScale::from_speeds(&w.speeds).map_err(tag)?,
            None => WindScale::saffir_simpson(),
        };
        let config = Config {
            paths,
            classes,
            materials,
            wind,
            projection: raw.projection,
            volumetry: raw.volumetry,
            risk: raw.risk,
            scene: raw.scene,
        };
        config.validate_ranges().map_err(|m| Error::config(source_name, m))?;
        Ok(config)
    }

    fn validate_ranges(&self) -> std::result::Result<(), String> {
        let p = &self.projection;
        if !(1..=64).contains(&p.downsample) {
            return Err("projection.downsample must be in 1..=64".into());
        }
        if let Some(eps) = p.eps {
            if !(eps.is_finite() && eps > 0.0) {
                return Err("projection.eps must be a positive number of meters".into());
            }
        }
        let v = &self.volumetry;
        if !(v.grid_size.is_finite() && v.grid_size >= 1e-4 && v.grid_size <= 100.0) {
            return Err("volumetry.grid_size must be within [1e-4, 100] m".into());
        }
        if v.min_cells == 0 {
            return Err("volumetry.min_cells must be at least 1".into());
        }
        if !(v.inlier_threshold.is_finite() && v.inlier_threshold > 0.0) {
            return Err("volumetry.inlier_threshold must be positive".into());
        }
        if !(1..=1_000_000).contains(&v.max_iters) {
            return Err("volumetry.max_iters must be in 1..=1000000".into());
        }
        let r = &self.risk;
        if let Some(t) = r.threshold {
            if !(t.is_finite() && t >= 0.0) {
                return Err("risk.threshold must be a non-negative number of joules".into());
            }
        }
        if !(1..=64).contains(&r.pixels_per_cell) {
            return Err("risk.pixels_per_cell must be in 1..=64".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classes::ClassId;

    const PATHS: &str = "[paths]\ncameras = \"c.txt\"\ncloud = \"p.ply\"\nmasks = \"m\"\n";

    #[test]
    fn defaults_fill_missing_sections() {
        let cfg = Config::parse(PATHS, Path::new("/data"), "cfg").unwrap();
        assert_eq!(cfg.paths.cameras, PathBuf::from("/data/c.txt"));
        assert_eq!(cfg.paths.outdir, PathBuf::from("/data/out"));
        assert_eq!(cfg.classes, ClassTable::debris_default());
        assert_eq!(cfg.wind, WindScale::saffir_simpson());
        assert_eq!(cfg.projection.downsample, 4);
        assert_eq!(cfg.projection.eps, None);
        assert_eq!(cfg.volumetry.grid_size, 0.05);
        assert_eq!(cfg.volumetry.min_cells, 4);
        assert_eq!(cfg.volumetry.max_iters, 1000);
        assert_eq!(cfg.risk.threshold, None);
        assert!(cfg.scene.scaled);
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = format!("{PATHS}[volumetry]\ngrid_sz = 0.1\n");
        assert!(matches!(
            Config::parse(&text, Path::new(""), "cfg"),
            Err(Error::Config { .. })
        ));
        let text = format!("{PATHS}[bogus]\n");
        assert!(Config::parse(&text, Path::new(""), "cfg").is_err());
    }

    #[test]
    fn densities_by_class_name() {
        let text = format!(
            "{PATHS}[classes]\nnames = [\"background\", \"crate\"]\n[densities]\ncrate = 450.0\n"
        );
        let cfg = Config::parse(&text, Path::new(""), "cfg").unwrap();
        assert_eq!(cfg.materials.density(ClassId(1)), Some(450.0));
        let bad = format!("{PATHS}[densities]\nunobtainium = 1.0\n");
        assert!(Config::parse(&bad, Path::new(""), "cfg").is_err());
    }

    #[test]
    fn out_of_range_values_rejected() {
        for section in [
            "[projection]\ndownsample = 0\n",
            "[projection]\neps = -1.0\n",
            "[volumetry]\ngrid_size = 0.0\n",
            "[volumetry]\nmin_cells = 0\n",
            "[risk]\nthreshold = -5.0\n",
            "[wind]\nspeeds = [50.0, 40.0]\n",
        ] {
            let text = format!("{PATHS}{section}");
            assert!(Config::parse(&text, Path::new(""), "cfg").is_err(), "{section}");
        }
    }
}
