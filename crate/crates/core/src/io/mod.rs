//! Reading and validating pipeline inputs; writing pipeline outputs.

pub mod camera;
pub mod config;
pub mod depth;
pub mod grid;
pub mod mask;
pub mod ply;

use std::collections::HashSet;
use std::path::Path;

use rayon::prelude::*;

use crate::classes::{ClassId, ClassTable};
use crate::error::{Error, Location, Result};

pub use camera::{format_cameras, parse_cameras, CameraPose, Intrinsics};
pub use config::Config;
pub use mask::{decode_mask, read_mask, write_mask, LabelMask};
pub use ply::{
    decode_labeled_cloud, decode_point_cloud, read_labeled_cloud, read_point_cloud,
    write_labeled_cloud, write_point_cloud, PointCloud,
};

/// Cameras, the reconstructed cloud and the class taxonomy.
#[derive(Clone, Debug)]
pub struct Scene {
    pub cameras: Vec<CameraPose>,
    pub cloud: PointCloud,
    pub classes: ClassTable,
}

impl Scene {
    /// Validates every camera and camera-id uniqueness.
    pub fn new(cameras: Vec<CameraPose>, cloud: PointCloud, classes: ClassTable) -> Result<Scene> {
        let mut seen = HashSet::new();
        for cam in &cameras {
            cam.validate()?;
            if !seen.insert(cam.id.as_str()) {
                return Err(Error::DuplicateCamera(cam.id.clone()));
            }
        }
        Ok(Scene { cameras, cloud, classes })
    }

    /// Checks a per-camera mask list against camera sizes and the class table.
    pub fn check_masks(&self, masks: &[LabelMask]) -> Result<()> {
        if masks.len() != self.cameras.len() {
            return Err(Error::Domain(format!(
                "{} masks supplied for {} cameras",
                masks.len(),
                self.cameras.len()
            )));
        }
        for (cam, mask) in self.cameras.iter().zip(masks) {
            check_mask(cam, mask, &self.classes, &cam.mask_file)?;
        }
        Ok(())
    }
}

fn check_mask(cam: &CameraPose, mask: &LabelMask, classes: &ClassTable, source: &str) -> Result<()> {
    if (mask.width(), mask.height()) != (cam.width, cam.height) {
        return Err(Error::DimensionMismatch {
            camera: cam.id.clone(),
            expected: (cam.width, cam.height),
            found: (mask.width(), mask.height()),
        });
    }
    mask.validate_classes(classes, source)
}

pub fn read_cameras(path: &Path) -> Result<Vec<CameraPose>> {
    let bytes = std::fs::read(path).map_err(|e| Error::read(path, e))?;
    parse_cameras(&bytes, &path.display().to_string())
}

/// Loads each camera's mask from `mask_dir`, checking dimensions and class
/// indices. Masks are decoded in parallel; order follows `cameras`.
pub fn load_masks(cameras: &[CameraPose], mask_dir: &Path, classes: &ClassTable) -> Result<Vec<LabelMask>> {
    if !mask_dir.is_dir() {
        return Err(Error::read(
            mask_dir,
            std::io::Error::new(std::io::ErrorKind::NotFound, "mask directory does not exist"),
        ));
    }
    cameras
        .par_iter()
        .map(|cam| {
            let path = mask_dir.join(&cam.mask_file);
            let mask = read_mask(&path)?;
            check_mask(cam, &mask, classes, &path.display().to_string())?;
            Ok(mask)
        })
        .collect()
}

/// Parses one class index per line, as written by the synthetic scene
/// generator. Blank lines and `#` comments are skipped.
pub fn parse_label_list(bytes: &[u8], classes: &ClassTable, source_name: &str) -> Result<Vec<ClassId>> {
    let text = std::str::from_utf8(bytes).map_err(|e| {
        Error::malformed(source_name, Location::Byte(e.valid_up_to() as u64), "label list is not valid UTF-8")
    })?;
    let mut labels = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let token = line.split('#').next().unwrap_or("").trim();
        if token.is_empty() {
            continue;
        }
        let class = token
            .parse::<u8>()
            .ok()
            .map(ClassId)
            .filter(|&c| classes.contains(c))
            .ok_or_else(|| {
                Error::malformed(source_name, Location::Line(i + 1), format!("{token:?} is not a class index"))
            })?;
        labels.push(class);
    }
    Ok(labels)
}

pub fn read_label_list(path: &Path, classes: &ClassTable) -> Result<Vec<ClassId>> {
    let bytes = std::fs::read(path).map_err(|e| Error::read(path, e))?;
    parse_label_list(&bytes, classes, &path.display().to_string())
}

/// Reads and validates cameras, cloud and masks.
pub fn parse_scene(
    camera_file: &Path,
    cloud_file: &Path,
    mask_dir: &Path,
    classes: &ClassTable,
) -> Result<(Scene, Vec<LabelMask>)> {
    let cameras = read_cameras(camera_file)?;
    let cloud = read_point_cloud(cloud_file)?;
    let masks = load_masks(&cameras, mask_dir, classes)?;
    let scene = Scene::new(cameras, cloud, classes.clone())?;
    Ok((scene, masks))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Point3;

    fn write_minimal(dir: &Path, mask: &LabelMask) {
        std::fs::write(
            dir.join("cameras.txt"),
            "cam0 1 1 1 1 0 0 1 0 0 0 1 0 0 0 1 0 0 0 cam0.png\n",
        )
        .unwrap();
        write_point_cloud(&PointCloud::new(vec![Point3::new(0.0, 0.0, 1.0)]), &dir.join("cloud.ply")).unwrap();
        std::fs::create_dir_all(dir.join("masks")).unwrap();
        write_mask(mask, &dir.join("masks/cam0.png")).unwrap();
    }

    #[test]
    fn minimal_scene() {
        let dir = tempfile::tempdir().unwrap();
        write_minimal(dir.path(), &LabelMask::filled(1, 1, ClassId(2)));
        let (scene, masks) = parse_scene(
            &dir.path().join("cameras.txt"),
            &dir.path().join("cloud.ply"),
            &dir.path().join("masks"),
            &ClassTable::debris_default(),
        )
        .unwrap();
        assert_eq!(scene.cameras.len(), 1);
        assert_eq!(scene.cloud.len(), 1);
        assert_eq!(masks[0].get(0, 0), ClassId(2));
    }

    #[test]
    fn mask_dimension_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        write_minimal(dir.path(), &LabelMask::filled(64, 48, ClassId(0)));
        std::fs::write(
            dir.path().join("cameras.txt"),
            "cam0 640 480 500 500 320 240 1 0 0 0 1 0 0 0 1 0 0 0 cam0.png\n",
        )
        .unwrap();
        let err = parse_scene(
            &dir.path().join("cameras.txt"),
            &dir.path().join("cloud.ply"),
            &dir.path().join("masks"),
            &ClassTable::debris_default(),
        )
        .unwrap_err();
        assert!(matches!(
            err,
            Error::DimensionMismatch { expected: (640, 480), found: (64, 48), .. }
        ));
    }

    #[test]
    fn mask_with_unknown_class() {
        let dir = tempfile::tempdir().unwrap();
        write_minimal(dir.path(), &LabelMask::filled(1, 1, ClassId(9)));
        let err = parse_scene(
            &dir.path().join("cameras.txt"),
            &dir.path().join("cloud.ply"),
            &dir.path().join("masks"),
            &ClassTable::debris_default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::UnknownClassIndex { class: 9, .. }));
    }

    #[test]
    fn missing_mask_dir_is_read_error() {
        let dir = tempfile::tempdir().unwrap();
        write_minimal(dir.path(), &LabelMask::filled(1, 1, ClassId(0)));
        let err = parse_scene(
            &dir.path().join("cameras.txt"),
            &dir.path().join("cloud.ply"),
            &dir.path().join("nope"),
            &ClassTable::debris_default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Read { .. }));
    }

    #[test]
    fn label_list_rejects_unknown_classes_with_line() {
        let classes = ClassTable::debris_default();
        let ok = parse_label_list(b"0\n# note\n4\n\n5\n", &classes, "t").unwrap();
        assert_eq!(ok, vec![ClassId(0), ClassId(4), ClassId(5)]);
        let err = parse_label_list(b"0\n1\n9\n", &classes, "t").unwrap_err();
        assert!(matches!(err, Error::Malformed { location: Location::Line(3), .. }), "{err:?}");
    }
}
