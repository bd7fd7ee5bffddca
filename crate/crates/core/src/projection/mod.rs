//! World-to-pixel projection, per-view depth maps, occlusion-aware
//! visibility and multi-view label fusion.

mod depth;
mod fusion;
mod spacing;

use nalgebra::Point3;

use crate::io::CameraPose;

pub use depth::{build_depth_map, build_depth_maps, is_visible, visible_pixel, DepthMap};
pub use fusion::{fuse_votes, project_labels, project_labels_naive, SemanticCloud};
pub use spacing::{default_eps, median_spacing, EPS_SPACING_FACTOR, MAX_SPACING_SAMPLES};

/// Continuous image coordinates of a point in front of the camera.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PixelCoord {
    pub u: f64,
    pub v: f64,
    /// Camera-frame z, meters; always positive.
    pub depth: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Projection {
    Pixel(PixelCoord),
    BehindCamera,
}

impl Projection {
    pub fn pixel(self) -> Option<PixelCoord> {
        match self {
            Projection::Pixel(p) => Some(p),
            Projection::BehindCamera => None,
        }
    }
}

/// `x_cam = R·p + T`, then `u = fx·x/z + cx`, `v = fy·y/z + cy`.
#[inline]
pub fn project_point(point: &Point3<f64>, cam: &CameraPose) -> Projection {
    let x = cam.rotation * point.coords + cam.translation;
    // `!(z > 0)` also sends NaN behind the camera.
    if !(x.z > 0.0) {
        return Projection::BehindCamera;
    }
    let k = &cam.intrinsics;
    Projection::Pixel(PixelCoord {
        u: k.fx * x.x / x.z + k.cx,
        v: k.fy * x.y / x.z + k.cy,
        depth: x.z,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::Intrinsics;
    use nalgebra::{Matrix3, Vector3};

    fn camera(f: f64, c: f64) -> CameraPose {
        CameraPose {
            id: "c".into(),
            width: 101,
            height: 101,
            intrinsics: Intrinsics { fx: f, fy: f, cx: c, cy: c },
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
            mask_file: "m".into(),
        }
    }

    #[test]
    fn optical_axis_maps_to_principal_point() {
        let p = project_point(&Point3::new(0.0, 0.0, 1.0), &camera(1.0, 0.0));
        assert_eq!(p, Projection::Pixel(PixelCoord { u: 0.0, v: 0.0, depth: 1.0 }));
    }

    #[test]
    fn off_axis_point() {
        let p = project_point(&Point3::new(0.5, 0.0, 1.0), &camera(100.0, 50.0));
        assert_eq!(p, Projection::Pixel(PixelCoord { u: 100.0, v: 50.0, depth: 1.0 }));
    }

    #[test]
    fn behind_camera() {
        let cam = camera(1.0, 0.0);
        assert_eq!(project_point(&Point3::new(0.0, 0.0, -1.0), &cam), Projection::BehindCamera);
        assert_eq!(project_point(&Point3::new(1.0, 1.0, 0.0), &cam), Projection::BehindCamera);
    }

    #[test]
    fn matches_full_calibration_product() {
        // K [R | T] p in homogeneous form, then dehomogenise.
        let k = Intrinsics { fx: 520.0, fy: 515.0, cx: 320.0, cy: 240.0 };
        let cam = CameraPose::looking_at(
            "c",
            640,
            480,
            k,
            Point3::new(3.0, -4.0, 2.5),
            Point3::origin(),
            Vector3::z(),
        )
        .unwrap();
        let p = Point3::new(0.3, -0.2, 0.7);
        let h = k.matrix() * (cam.rotation * p.coords + cam.translation);
        let px = project_point(&p, &cam).pixel().unwrap();
        assert!((px.u - h.x / h.z).abs() < 1e-9);
        assert!((px.v - h.y / h.z).abs() < 1e-9);
        assert!((px.depth - h.z).abs() < 1e-12);
    }
}
