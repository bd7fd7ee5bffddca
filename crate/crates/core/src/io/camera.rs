//! Pinhole camera poses and the `cameras.txt` text format.
//!
//! One record per line:
//!
//! ```text
//! id width height fx fy cx cy r11 r12 r13 r21 r22 r23 r31 r32 r33 tx ty tz mask_filename
//! ```
//!
//! Tokens are whitespace separated and `#` starts a comment. `R` and `T`
//! map world points into the camera frame (`x_cam = R·p + T`); the camera
//! looks down `+z`, image `u` grows right and `v` grows down.

use std::collections::HashSet;
use std::fmt::Write as _;

use nalgebra::{Matrix3, Point3, Vector3};

use crate::error::{Error, Location, Result};

/// Tolerance on `|RᵀR - I|` and `|det R - 1|`.
pub const ROTATION_TOLERANCE: f64 = 1e-6;

const FIELDS: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl Intrinsics {
    /// The 3×3 calibration matrix (zero skew).
    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CameraPose {
    pub id: String,
    pub width: u32,
    pub height: u32,
    pub intrinsics: Intrinsics,
    /// World-to-camera rotation.
    pub rotation: Matrix3<f64>,
    /// World-to-camera translation, meters.
    pub translation: Vector3<f64>,
    /// Mask file name, relative to the mask directory.
    pub mask_file: String,
}

impl CameraPose {
    /// Camera at `eye` looking at `target`, with `up` pointing towards
    /// the top of the image.
    pub fn looking_at(
        id: impl Into<String>,
        width: u32,
        height: u32,
        intrinsics: Intrinsics,
        eye: Point3<f64>,
        target: Point3<f64>,
        up: Vector3<f64>,
    ) -> Result<Self> {
        let id = id.into();
        let forward = (target - eye)
            .try_normalize(1e-12)
            .ok_or_else(|| invalid(&id, "eye and target coincide"))?;
        let right = forward
            .cross(&up)
            .try_normalize(1e-12)
            .ok_or_else(|| invalid(&id, "view direction is parallel to up"))?;
        let down = forward.cross(&right);
        let rotation = Matrix3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
        let translation = -(rotation * eye.coords);
        let pose = CameraPose {
            mask_file: format!("{id}.png"),
            id,
            width,
            height,
            intrinsics,
            rotation,
            translation,
        };
        pose.validate()?;
        Ok(pose)
    }

    /// Checks the intrinsic bounds and that `R` is a proper rotation.
    pub fn validate(&self) -> Result<()> {
        let Intrinsics { fx, fy, cx, cy } = self.intrinsics;
        if self.width == 0 || self.height == 0 {
            return Err(invalid(&self.id, "image dimensions must be positive"));
        }
        if !(fx.is_finite() && fy.is_finite() && fx > 0.0 && fy > 0.0) {
            return Err(invalid(&self.id, "focal lengths must be positive"));
        }
        if !(cx >= 0.0 && cx < self.width as f64 && cy >= 0.0 && cy < self.height as f64) {
            return Err(invalid(&self.id, "principal point lies outside the image"));
        }
        if self.translation.iter().any(|t| !t.is_finite()) {
            return Err(invalid(&self.id, "translation must be finite"));
        }
        let r = &self.rotation;
        let orthogonality_error = (r.transpose() * r - Matrix3::identity()).amax();
        let determinant = r.determinant();
        // NaN entries fail both comparisons and are rejected here too.
        if !(orthogonality_error <= ROTATION_TOLERANCE
            && (determinant - 1.0).abs() <= ROTATION_TOLERANCE)
        {
            return Err(Error::NonOrthonormalRotation {
                camera: self.id.clone(),
                orthogonality_error,
                determinant,
            });
        }
        Ok(())
    }

    /// Camera centre in world coordinates.
    pub fn center(&self) -> Point3<f64> {
        Point3::from(-(self.rotation.transpose() * self.translation))
    }

    /// Nearest pixel to continuous image coordinates (pixel centres sit at
    /// integer coordinates), or `None` outside the image.
    #[inline]
    pub fn pixel_at(&self, u: f64, v: f64) -> Option<(u32, u32)> {
        let x = (u + 0.5).floor();
        let y = (v + 0.5).floor();
        if x >= 0.0 && y >= 0.0 && x < self.width as f64 && y < self.height as f64 {
            Some((x as u32, y as u32))
        } else {
            None
        }
    }
}

fn invalid(id: &str, reason: &str) -> Error {
    Error::InvalidCamera {
        camera: id.to_string(),
        reason: reason.to_string(),
    }
}

/// Parses and validates a camera file. `source_name` labels errors.
pub fn parse_cameras(bytes: &[u8], source_name: &str) -> Result<Vec<CameraPose>> {
    let text = std::str::from_utf8(bytes).map_err(|e| {
        Error::malformed(
            source_name,
            Location::Byte(e.valid_up_to() as u64),
            "camera file is not valid UTF-8",
        )
    })?;
    let mut cameras = Vec::new();
    let mut seen = HashSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("");
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        let at = Location::Line(line_no);
        if tokens.len() != FIELDS {
            return Err(Error::malformed(
                source_name,
                at,
                format!("expected {FIELDS} fields, found {}", tokens.len()),
            ));
        }
        let int = |i: usize, what: &str| -> Result<u32> {
            tokens[i].parse::<u32>().map_err(|_| {
                Error::malformed(source_name, at, format!("{what} {:?} is not an integer", tokens[i]))
            })
        };
        let float = |i: usize| -> Result<f64> {
            match tokens[i].parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(Error::malformed(
                    source_name,
                    at,
                    format!("field {} ({:?}) is not a finite number", i + 1, tokens[i]),
                )),
            }
        };
        let id = tokens[0].to_string();
        let width = int(1, "width")?;
        let height = int(2, "height")?;
        let mut vals = [0.0; 16];
        for (k, v) in vals.iter_mut().enumerate() {
            *v = float(3 + k)?;
        }
        let camera = CameraPose {
            id: id.clone(),
            width,
            height,
            intrinsics: Intrinsics {
                fx: vals[0],
                fy: vals[1],
                cx: vals[2],
                cy: vals[3],
            },
            rotation: Matrix3::from_row_slice(&vals[4..13]),
            translation: Vector3::new(vals[13], vals[14], vals[15]),
            mask_file: tokens[19].to_string(),
        };
        camera.validate()?;
        if !seen.insert(id.clone()) {
            return Err(Error::DuplicateCamera(id));
        }
        cameras.push(camera);
    }
    Ok(cameras)
}

/// Serializes cameras in the text format; floats use shortest round-trip form.
pub fn format_cameras(cameras: &[CameraPose]) -> String {
    let mut out = String::from(
        "# id width height fx fy cx cy r11 r12 r13 r21 r22 r23 r31 r32 r33 tx ty tz mask\n",
    );
    for c in cameras {
        let k = &c.intrinsics;
        let _ = write!(out, "{} {} {} {} {} {} {}", c.id, c.width, c.height, k.fx, k.fy, k.cx, k.cy);
        for row in 0..3 {
            for col in 0..3 {
                let _ = write!(out, " {}", c.rotation[(row, col)]);
            }
        }
        let t = &c.translation;
        let _ = writeln!(out, " {} {} {} {}", t.x, t.y, t.z, c.mask_file);
    }
    out
}
