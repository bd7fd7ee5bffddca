use nalgebra::Point3;
use rayon::prelude::*;

use super::project_point;
use crate::io::CameraPose;

/// Minimum camera-frame depth per `downsample × downsample` pixel patch.
/// Empty patches hold `+inf`.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthMap {
    camera_id: String,
    width: u32,
    height: u32,
    downsample: u32,
    grid_w: u32,
    grid_h: u32,
    values: Vec<f64>,
}

impl DepthMap {
    /// All-empty map for an image of `width × height`.
    pub fn empty(camera_id: impl Into<String>, width: u32, height: u32, downsample: u32) -> Self {
        assert!(downsample >= 1, "downsample factor must be at least 1");
        let grid_w = width.div_ceil(downsample);
        let grid_h = height.div_ceil(downsample);
        DepthMap {
            camera_id: camera_id.into(),
            width,
            height,
            downsample,
            grid_w,
            grid_h,
            values: vec![f64::INFINITY; grid_w as usize * grid_h as usize],
        }
    }

    /// Rebuilds a map from stored patch values. Returns `None` when the
    /// value count does not match the grid or a value is not a positive
    /// depth or `+inf`.
    pub fn from_values(
        camera_id: impl Into<String>,
        width: u32,
        height: u32,
        downsample: u32,
        values: Vec<f64>,
    ) -> Option<Self> {
        if downsample == 0 || width == 0 || height == 0 {
            return None;
        }
        let mut map = DepthMap::empty(camera_id, width, height, downsample);
        if values.len() != map.values.len() || !values.iter().all(|&d| d > 0.0 && !d.is_nan()) {
            return None;
        }
        map.values = values;
        Some(map)
    }

    pub fn camera_id(&self) -> &str {
        &self.camera_id
    }

    pub fn image_size(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn downsample(&self) -> u32 {
        self.downsample
    }

    pub fn grid_size(&self) -> (u32, u32) {
        (self.grid_w, self.grid_h)
    }

    /// Row-major patch values.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Patch holding pixel `(x, y)`.
    #[inline]
    pub fn patch_of_pixel(&self, x: u32, y: u32) -> usize {
        (y / self.downsample) as usize * self.grid_w as usize + (x / self.downsample) as usize
    }

    #[inline]
    pub fn depth_at_pixel(&self, x: u32, y: u32) -> f64 {
        self.values[self.patch_of_pixel(x, y)]
    }

    pub fn max_finite(&self) -> Option<f64> {
        self.values
            .iter()
            .copied()
            .filter(|d| d.is_finite())
            .reduce(f64::max)
    }
}

/// Z-buffers `points` into patches of `downsample` pixels for one view.
pub fn build_depth_map(points: &[Point3<f64>], cam: &CameraPose, downsample: u32) -> DepthMap {
    let mut map = DepthMap::empty(cam.id.clone(), cam.width, cam.height, downsample);
    for p in points {
        let Some(px) = project_point(p, cam).pixel() else {
            continue;
        };
        let Some((x, y)) = cam.pixel_at(px.u, px.v) else {
            continue;
        };
        let slot = map.patch_of_pixel(x, y);
        if px.depth < map.values[slot] {
            map.values[slot] = px.depth;
        }
    }
    map
}

/// One depth map per camera, built in parallel; order follows `cameras`.
pub fn build_depth_maps(points: &[Point3<f64>], cameras: &[CameraPose], downsample: u32) -> Vec<DepthMap> {
    cameras
        .par_iter()
        .map(|cam| build_depth_map(points, cam, downsample))
        .collect()
}

/// Pixel a point lands on if it is in front of the camera, inside the image
/// and no more than `eps` behind the nearest surface of its patch.
#[inline]
pub fn visible_pixel(point: &Point3<f64>, cam: &CameraPose, dmap: &DepthMap, eps: f64) -> Option<(u32, u32)> {
    let px = project_point(point, cam).pixel()?;
    let (x, y) = cam.pixel_at(px.u, px.v)?;
    (px.depth <= dmap.depth_at_pixel(x, y) + eps).then_some((x, y))
}

pub fn is_visible(point: &Point3<f64>, cam: &CameraPose, dmap: &DepthMap, eps: f64) -> bool {
    visible_pixel(point, cam, dmap, eps).is_some()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::Intrinsics;
    use nalgebra::{Matrix3, Vector3};

    fn camera(w: u32, h: u32, f: f64) -> CameraPose {
        CameraPose {
            id: "c".into(),
            width: w,
            height: h,
            intrinsics: Intrinsics {
                fx: f,
                fy: f,
                cx: (w as f64 - 1.0) / 2.0,
                cy: (h as f64 - 1.0) / 2.0,
            },
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
            mask_file: "m".into(),
        }
    }

    #[test]
    fn grid_dimensions_round_up() {
        let map = DepthMap::empty("c", 10, 7, 4);
        assert_eq!(map.grid_size(), (3, 2));
        assert_eq!(DepthMap::empty("c", 8, 8, 1).grid_size(), (8, 8));
    }

    #[test]
    fn empty_cloud_leaves_all_patches_infinite() {
        let map = build_depth_map(&[], &camera(16, 12, 10.0), 4);
        assert!(map.values().iter().all(|d| *d == f64::INFINITY));
        assert_eq!(map.max_finite(), None);
    }

    #[test]
    fn nearer_point_on_same_ray_wins() {
        let cam = camera(16, 12, 10.0);
        let pts = [Point3::new(0.1, 0.05, 3.0), Point3::new(0.1 / 3.0, 0.05 / 3.0, 1.0)];
        let map = build_depth_map(&pts, &cam, 4);
        let finite: Vec<f64> = map.values().iter().copied().filter(|d| d.is_finite()).collect();
        assert_eq!(finite, vec![1.0]);
    }

    #[test]
    fn plane_fills_frustum_at_its_depth() {
        // Plane z = 5 sampled much finer than one pixel's footprint (5/f = 0.05 m).
        let cam = camera(40, 30, 100.0);
        let mut pts = Vec::new();
        for i in -120..=120 {
            for j in -90..=90 {
                pts.push(Point3::new(i as f64 * 0.01, j as f64 * 0.01, 5.0));
            }
        }
        let map = build_depth_map(&pts, &cam, 4);
        assert!(map.values().iter().all(|&d| d == 5.0));
    }

    #[test]
    fn self_visibility_and_occlusion() {
        let cam = camera(16, 12, 10.0);
        let front = Point3::new(0.0, 0.0, 1.0);
        let back = Point3::new(0.0, 0.0, 3.0);
        let map = build_depth_map(&[front, back], &cam, 4);
        assert!(is_visible(&front, &cam, &map, 0.05));
        assert!(!is_visible(&back, &cam, &map, 0.05));
        assert!(is_visible(&back, &cam, &map, 2.5));
    }

    #[test]
    fn outside_image_is_not_visible() {
        let cam = camera(16, 12, 10.0);
        let map = DepthMap::empty("c", 16, 12, 4);
        assert!(!is_visible(&Point3::new(10.0, 0.0, 1.0), &cam, &map, 0.05));
        assert!(!is_visible(&Point3::new(0.0, 0.0, -1.0), &cam, &map, 0.05));
        // empty patch: visible
        assert!(is_visible(&Point3::new(0.0, 0.0, 1.0), &cam, &map, 0.05));
    }

    #[test]
    fn from_values_validates() {
        assert!(DepthMap::from_values("c", 4, 4, 2, vec![1.0, f64::INFINITY, 2.0, 3.0]).is_some());
        assert!(DepthMap::from_values("c", 4, 4, 2, vec![1.0; 3]).is_none());
        assert!(DepthMap::from_values("c", 4, 4, 2, vec![1.0, 0.0, 2.0, 3.0]).is_none());
        assert!(DepthMap::from_values("c", 4, 4, 2, vec![1.0, f64::NAN, 2.0, 3.0]).is_none());
    }
}
