//! Deterministic synthetic jobsites: a ground rectangle with boxes, vertical
//! cylinders and thin sheets, a ring of cameras, ray-cast label masks and
//! per-point ground truth.
//!
//! Masks are produced by casting one ray per pixel center against the
//! analytic solids; they never go through the projection module.

mod fixtures;
mod shapes;

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{Point3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classes::{ClassId, ClassTable, DEFAULT_CLASSES};
use crate::error::{Error, Result};
use crate::io::ply::write_bytes;
use crate::io::{format_cameras, write_mask, write_point_cloud, CameraPose, Intrinsics, LabelMask, PointCloud, Scene};

pub use fixtures::{occlusion_fixture, random_fixture, unit_box_fixture, OCCLUDED_PRIMITIVE};
use shapes::{sample_rect, Solid};

/// Upper bound on generated points.
pub const MAX_POINTS: f64 = 20e6;

fn default_density() -> f64 {
    4000.0
}

fn default_classes() -> Vec<String> {
    DEFAULT_CLASSES.iter().map(|s| s.to_string()).collect()
}

/// Scene description, usually read from `scene_spec.toml`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub seed: u64,
    /// Surface sampling density, points per m².
    #[serde(default = "default_density")]
    pub density: f64,
    /// Standard deviation of Gaussian jitter added to every coordinate, m.
    #[serde(default)]
    pub jitter_sigma: f64,
    #[serde(default = "default_classes")]
    pub classes: Vec<String>,
    pub ground: GroundSpec,
    pub cameras: CameraRing,
    #[serde(default)]
    pub primitives: Vec<Primitive>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundSpec {
    /// `[xmin, xmax, ymin, ymax]` of the ground rectangle at `z = 0`.
    pub extent: [f64; 4],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraRing {
    pub count: u32,
    pub radius: f64,
    /// Camera height above the ground, m.
    pub height: f64,
    pub look_at: [f64; 3],
    /// Azimuth of camera 0, degrees counter-clockwise from `+x`.
    #[serde(default)]
    pub start_angle_deg: f64,
    /// Image `[width, height]` in pixels.
    pub image: [u32; 2],
    /// Focal length in pixels; the principal point is the image center.
    pub focal: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase", deny_unknown_fields)]
pub enum Primitive {
    /// Axis-aligned box; `center` is the footprint center.
    Box {
        class: String,
        center: [f64; 2],
        size: [f64; 3],
        #[serde(default)]
        base: f64,
    },
    Cylinder {
        class: String,
        center: [f64; 2],
        radius: f64,
        height: f64,
        #[serde(default)]
        base: f64,
    },
    /// Thin horizontal panel, `size = [x, y]`.
    Sheet {
        class: String,
        center: [f64; 2],
        size: [f64; 2],
        thickness: f64,
        #[serde(default)]
        base: f64,
    },
}

impl Primitive {
    pub fn class_name(&self) -> &str {
        match self {
            Primitive::Box { class, .. } | Primitive::Cylinder { class, .. } | Primitive::Sheet { class, .. } => class,
        }
    }

    pub fn shape_name(&self) -> &'static str {
        match self {
            Primitive::Box { .. } => "box",
            Primitive::Cylinder { .. } => "cylinder",
            Primitive::Sheet { .. } => "sheet",
        }
    }

    fn solid(&self) -> Solid {
        match *self {
            Primitive::Box { center, size, base, .. } => Solid::Cuboid {
                min: Point3::new(center[0] - size[0] / 2.0, center[1] - size[1] / 2.0, base),
                max: Point3::new(center[0] + size[0] / 2.0, center[1] + size[1] / 2.0, base + size[2]),
            },
            Primitive::Sheet { center, size, thickness, base, .. } => Solid::Cuboid {
                min: Point3::new(center[0] - size[0] / 2.0, center[1] - size[1] / 2.0, base),
                max: Point3::new(center[0] + size[0] / 2.0, center[1] + size[1] / 2.0, base + thickness),
            },
            Primitive::Cylinder { center, radius, height, base, .. } => Solid::Cylinder {
                cx: center[0],
                cy: center[1],
                radius,
                z0: base,
                z1: base + height,
            },
        }
    }

    /// Closed-form volume, m³.
    pub fn volume(&self) -> f64 {
        self.solid().volume()
    }

    fn dimensions(&self) -> Vec<f64> {
        match *self {
            Primitive::Box { center, size, base, .. } => vec![center[0], center[1], size[0], size[1], size[2], base],
            Primitive::Cylinder { center, radius, height, base, .. } => vec![center[0], center[1], radius, height, base],
            Primitive::Sheet { center, size, thickness, base, .. } => {
                vec![center[0], center[1], size[0], size[1], thickness, base]
            }
        }
    }
}

impl SceneSpec {
    pub fn from_toml(text: &str) -> Result<SceneSpec> {
        let spec: SceneSpec = toml::from_str(text).map_err(|e| Error::InvalidSpec(e.message().to_owned()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<SceneSpec> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::read(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scene specs serialize")
    }

    pub fn class_table(&self) -> Result<ClassTable> {
        ClassTable::new(self.classes.iter().cloned()).map_err(|e| Error::InvalidSpec(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSpec(msg));
        let classes = self.class_table()?;
        if !(self.density > 0.0 && self.density.is_finite()) {
            return bad(format!("density {} must be positive", self.density));
        }
        if !(self.jitter_sigma >= 0.0 && self.jitter_sigma.is_finite()) {
            return bad("jitter_sigma must be non-negative".into());
        }
        let [x0, x1, y0, y1] = self.ground.extent;
        if !(x0.is_finite() && x1.is_finite() && y0.is_finite() && y1.is_finite() && x0 < x1 && y0 < y1) {
            return bad("ground extent must be [xmin, xmax, ymin, ymax] with min < max".into());
        }
        let mut area = (x1 - x0) * (y1 - y0);
        for (i, p) in self.primitives.iter().enumerate() {
            match classes.id_of(p.class_name()) {
                None => return bad(format!("primitive {i}: unknown class {:?}", p.class_name())),
                Some(c) if c.is_background() => return bad(format!("primitive {i}: class must not be background")),
                _ => {}
            }
            let dims = p.dimensions();
            if dims.iter().any(|d| !d.is_finite()) {
                return bad(format!("primitive {i}: dimensions must be finite"));
            }
            // Sizes are every entry but the center and the base.
            if dims[2..dims.len() - 1].iter().any(|&d| d <= 0.0) {
                return bad(format!("primitive {i}: sizes must be positive"));
            }
            if *dims.last().expect("base") < 0.0 {
                return bad(format!("primitive {i}: base must not be below the ground"));
            }
            area += surface_area(&p.solid());
        }
        if area * self.density > MAX_POINTS {
            return bad(format!("scene would hold about {:.0} points, above {MAX_POINTS}", area * self.density));
        }
        let r = &self.cameras;
        if r.count == 0 || r.count > 10_000 {
            return bad("camera count must be within 1..=10000".into());
        }
        if !(r.radius > 0.0 && r.radius.is_finite() && r.height.is_finite() && r.focal > 0.0 && r.focal.is_finite()) {
            return bad("camera radius and focal length must be positive, height finite".into());
        }
        if r.look_at.iter().any(|v| !v.is_finite()) || !r.start_angle_deg.is_finite() {
            return bad("camera look_at and start angle must be finite".into());
        }
        if r.image.iter().any(|&d| d == 0 || d > 16_384) {
            return bad("image dimensions must be within 1..=16384".into());
        }
        Ok(())
    }

    /// Camera poses around the ring, ids `cam000`, `cam001`, ...
    pub fn camera_poses(&self) -> Result<Vec<CameraPose>> {
        let r = &self.cameras;
        let [w, h] = r.image;
        let k = Intrinsics {
            fx: r.focal,
            fy: r.focal,
            cx: (w as f64 - 1.0) / 2.0,
            cy: (h as f64 - 1.0) / 2.0,
        };
        let target = Point3::from(r.look_at);
        (0..r.count)
            .map(|i| {
                let a = (r.start_angle_deg / 180.0 * PI) + 2.0 * PI * i as f64 / r.count as f64;
                let eye = Point3::new(target.x + r.radius * a.cos(), target.y + r.radius * a.sin(), r.height);
                CameraPose::looking_at(format!("cam{i:03}"), w, h, k, eye, target, Vector3::z())
                    .map_err(|e| Error::InvalidSpec(e.to_string()))
            })
            .collect()
    }
}

fn surface_area(s: &Solid) -> f64 {
    match *s {
        Solid::Cuboid { min, max } => {
            let d = max - min;
            2.0 * (d.x * d.y + d.x * d.z + d.y * d.z)
        }
        Solid::Cylinder { radius, z0, z1, .. } => 2.0 * PI * radius * (radius + z1 - z0),
    }
}

/// Analytic truth for one primitive.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PrimitiveTruth {
    pub shape: &'static str,
    pub class: ClassId,
    pub volume: f64,
    /// Indices into the cloud of points sampled on this primitive.
    pub points: std::ops::Range<usize>,
}

/// Generated scene with its masks and ground truth.
#[derive(Clone, Debug)]
pub struct SynthScene {
    pub spec: SceneSpec,
    pub scene: Scene,
    pub masks: Vec<LabelMask>,
    /// Class of the surface each point was sampled on.
    pub truth: Vec<ClassId>,
    pub primitives: Vec<PrimitiveTruth>,
}

/// Builds the scene. The cloud is sampled with one ChaCha8 stream seeded by
/// `spec.seed`; coordinates are rounded to `f32` so the in-memory cloud
/// equals what the PLY file stores.
pub fn generate(spec: &SceneSpec) -> Result<SynthScene> {
    spec.validate()?;
    let classes = spec.class_table()?;
    let solids: Vec<Solid> = spec.primitives.iter().map(Primitive::solid).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let [x0, x1, y0, y1] = spec.ground.extent;
    let mut ground = Vec::new();
    sample_rect(
        &mut rng,
        Point3::new(x0, y0, 0.0),
        Vector3::x() * (x1 - x0),
        Vector3::y() * (y1 - y0),
        spec.density,
        &mut ground,
    );
    ground.retain(|p| {
        !solids
            .iter()
            .any(|s| (s.base() <= 0.0 && s.footprint_contains(p.x, p.y)) || s.contains_strictly(p))
    });
    let mut points = ground;
    let mut truth = vec![ClassId::BACKGROUND; points.len()];
    let mut primitives = Vec::with_capacity(solids.len());
    for (i, (prim, solid)) in spec.primitives.iter().zip(&solids).enumerate() {
        let mut surface = Vec::new();
        solid.sample_surface(&mut rng, spec.density, &mut surface);
        surface.retain(|p| !solids.iter().enumerate().any(|(j, s)| j != i && s.contains_strictly(p)));
        let class = classes.id_of(prim.class_name()).expect("validated");
        let start = points.len();
        truth.extend(std::iter::repeat_n(class, surface.len()));
        points.extend(surface);
        primitives.push(PrimitiveTruth {
            shape: prim.shape_name(),
            class,
            volume: solid.volume(),
            points: start..points.len(),
        });
    }
    if spec.jitter_sigma > 0.0 {
        let normal = Normal::new(0.0, spec.jitter_sigma).expect("sigma validated");
        for p in &mut points {
            for i in 0..3 {
                p[i] += normal.sample(&mut rng);
            }
        }
    }
    for p in &mut points {
        *p = p.map(|c| c as f32 as f64);
    }

    let cameras = spec.camera_poses()?;
    let masks = cameras
        .par_iter()
        .map(|cam| render_mask(cam, spec, &solids, &classes))
        .collect();
    let scene = Scene::new(cameras, PointCloud::new(points), classes)?;
    Ok(SynthScene {
        spec: spec.clone(),
        scene,
        masks,
        truth,
        primitives,
    })
}

/// Labels every pixel with the class of the first surface its center ray
/// meets; ground and empty space are background.
fn render_mask(cam: &CameraPose, spec: &SceneSpec, solids: &[Solid], classes: &ClassTable) -> LabelMask {
    let rt = cam.rotation.transpose();
    let origin = cam.center();
    let k = cam.intrinsics;
    let ids: Vec<u8> = spec
        .primitives
        .iter()
        .map(|p| classes.id_of(p.class_name()).expect("validated").0)
        .collect();
    let mut labels = vec![0u8; cam.width as usize * cam.height as usize];
    for y in 0..cam.height {
        for x in 0..cam.width {
            let d_cam = Vector3::new((x as f64 - k.cx) / k.fx, (y as f64 - k.cy) / k.fy, 1.0);
            let dir = rt * d_cam;
            let mut best = f64::INFINITY;
            let mut label = 0u8;
            for (s, &id) in solids.iter().zip(&ids) {
                if let Some(t) = s.ray_hit(&origin, &dir) {
                    if t < best {
                        best = t;
                        label = id;
                    }
                }
            }
            // The ground hides anything it passes in front of.
            if dir.z < 0.0 {
                let t = -origin.z / dir.z;
                if t > 0.0 && t < best {
                    label = 0;
                }
            }
            labels[y as usize * cam.width as usize + x as usize] = label;
        }
    }
    LabelMask::new(cam.width, cam.height, labels)
}

impl SynthScene {
    /// Writes `cameras.txt`, `cloud.ply`, `masks/`, `truth_labels.txt`,
    /// `primitives.csv`, `scene_spec.toml` and a `config.toml` that runs
    /// the pipeline on them.
    pub fn write_to_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir.join("masks")).map_err(|e| Error::write(dir, e))?;
        write_bytes(&dir.join("cameras.txt"), format_cameras(&self.scene.cameras).as_bytes())?;
        write_point_cloud(&self.scene.cloud, &dir.join("cloud.ply"))?;
        self.scene
            .cameras
            .par_iter()
            .zip(&self.masks)
            .try_for_each(|(cam, mask)| write_mask(mask, &dir.join("masks").join(&cam.mask_file)))?;

        let mut labels = String::with_capacity(self.truth.len() * 2);
        for c in &self.truth {
            writeln!(labels, "{c}").expect("write to String");
        }
        write_bytes(&dir.join("truth_labels.txt"), labels.as_bytes())?;

        let mut csv = String::from("index,shape,class,volume_m3,first_point,point_count\n");
        for (i, p) in self.primitives.iter().enumerate() {
            let name = self.scene.classes.name(p.class).unwrap_or("?");
            writeln!(csv, "{i},{},{name},{},{},{}", p.shape, p.volume, p.points.start, p.points.len())
                .expect("write to String");
        }
        write_bytes(&dir.join("primitives.csv"), csv.as_bytes())?;
        write_bytes(&dir.join("scene_spec.toml"), self.spec.to_toml().as_bytes())?;
        write_bytes(&dir.join("config.toml"), self.config_toml().as_bytes())
    }

    fn config_toml(&self) -> String {
        let names: Vec<String> = self.spec.classes.iter().map(|n| format!("{n:?}")).collect();
        format!(
            "[paths]\ncameras = \"cameras.txt\"\ncloud = \"cloud.ply\"\nmasks = \"masks\"\noutdir = \"out\"\ntruth = \"truth_labels.txt\"\n\n\
             [classes]\nnames = [{}]\n",
            names.join(", ")
        )
    }
}
