//! Analytic solids: surface sampling, containment and ray intersection.

use std::f64::consts::TAU;

use nalgebra::{Point3, Vector3};
use rand::Rng;

const EDGE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) enum Solid {
    /// Axis-aligned box.
    Cuboid { min: Point3<f64>, max: Point3<f64> },
    /// Vertical cylinder.
    Cylinder { cx: f64, cy: f64, radius: f64, z0: f64, z1: f64 },
}

impl Solid {
    pub fn volume(&self) -> f64 {
        match *self {
            Solid::Cuboid { min, max } => (max.x - min.x) * (max.y - min.y) * (max.z - min.z),
            Solid::Cylinder { radius, z0, z1, .. } => std::f64::consts::PI * radius * radius * (z1 - z0),
        }
    }

    pub fn base(&self) -> f64 {
        match *self {
            Solid::Cuboid { min, .. } => min.z,
            Solid::Cylinder { z0, .. } => z0,
        }
    }

    /// Whether `(x, y)` lies in the closed footprint.
    pub fn footprint_contains(&self, x: f64, y: f64) -> bool {
        match *self {
            Solid::Cuboid { min, max } => x >= min.x && x <= max.x && y >= min.y && y <= max.y,
            Solid::Cylinder { cx, cy, radius, .. } => (x - cx).powi(2) + (y - cy).powi(2) <= radius * radius,
        }
    }

    /// Strict interior, shrunk by a small margin so surface points of
    /// touching solids are kept.
    pub fn contains_strictly(&self, p: &Point3<f64>) -> bool {
        match *self {
            Solid::Cuboid { min, max } => (0..3).all(|i| p[i] > min[i] + EDGE && p[i] < max[i] - EDGE),
            Solid::Cylinder { cx, cy, radius, z0, z1 } => {
                let r = radius - EDGE;
                p.z > z0 + EDGE && p.z < z1 - EDGE && (p.x - cx).powi(2) + (p.y - cy).powi(2) < r * r
            }
        }
    }

    /// Smallest positive ray parameter at which `origin + t·dir` meets the
    /// surface.
    pub fn ray_hit(&self, origin: &Point3<f64>, dir: &Vector3<f64>) -> Option<f64> {
        match *self {
            Solid::Cuboid { min, max } => {
                let (mut t0, mut t1) = (f64::NEG_INFINITY, f64::INFINITY);
                for i in 0..3 {
                    if dir[i] == 0.0 {
                        if origin[i] < min[i] || origin[i] > max[i] {
                            return None;
                        }
                        continue;
                    }
                    let a = (min[i] - origin[i]) / dir[i];
                    let b = (max[i] - origin[i]) / dir[i];
                    t0 = t0.max(a.min(b));
                    t1 = t1.min(a.max(b));
                }
                if t0 > t1 {
                    None
                } else if t0 > 0.0 {
                    Some(t0)
                } else if t1 > 0.0 {
                    Some(t1)
                } else {
                    None
                }
            }
            Solid::Cylinder { cx, cy, radius, z0, z1 } => {
                let mut best = f64::INFINITY;
                let (ox, oy) = (origin.x - cx, origin.y - cy);
                let a = dir.x * dir.x + dir.y * dir.y;
                if a > 0.0 {
                    let b = 2.0 * (ox * dir.x + oy * dir.y);
                    let c = ox * ox + oy * oy - radius * radius;
                    let disc = b * b - 4.0 * a * c;
                    if disc >= 0.0 {
                        let s = disc.sqrt();
                        for t in [(-b - s) / (2.0 * a), (-b + s) / (2.0 * a)] {
                            let z = origin.z + t * dir.z;
                            if t > 0.0 && z >= z0 && z <= z1 {
                                best = best.min(t);
                            }
                        }
                    }
                }
                if dir.z != 0.0 {
                    for zc in [z0, z1] {
                        let t = (zc - origin.z) / dir.z;
                        let (x, y) = (ox + t * dir.x, oy + t * dir.y);
                        if t > 0.0 && x * x + y * y <= radius * radius {
                            best = best.min(t);
                        }
                    }
                }
                best.is_finite().then_some(best)
            }
        }
    }

    /// Stratified jittered samples on the exposed surface: sides and top,
    /// plus the bottom when the solid does not rest on the ground.
    pub fn sample_surface(&self, rng: &mut impl Rng, density: f64, out: &mut Vec<Point3<f64>>) {
        match *self {
            Solid::Cuboid { min, max } => {
                let d = max - min;
                let (ex, ey, ez) = (Vector3::x() * d.x, Vector3::y() * d.y, Vector3::z() * d.z);
                sample_rect(rng, Point3::new(min.x, min.y, max.z), ex, ey, density, out);
                if min.z > 0.0 {
                    sample_rect(rng, min, ex, ey, density, out);
                }
                sample_rect(rng, min, ex, ez, density, out);
                sample_rect(rng, Point3::new(min.x, max.y, min.z), ex, ez, density, out);
                sample_rect(rng, min, ey, ez, density, out);
                sample_rect(rng, Point3::new(max.x, min.y, min.z), ey, ez, density, out);
            }
            Solid::Cylinder { cx, cy, radius, z0, z1 } => {
                sample_disc(rng, cx, cy, radius, z1, density, out);
                if z0 > 0.0 {
                    sample_disc(rng, cx, cy, radius, z0, density, out);
                }
                let k = density.sqrt();
                let na = strata(TAU * radius * k);
                let nz = strata((z1 - z0) * k);
                for i in 0..na {
                    for j in 0..nz {
                        let th = TAU * (i as f64 + rng.random::<f64>()) / na as f64;
                        let z = z0 + (z1 - z0) * (j as f64 + rng.random::<f64>()) / nz as f64;
                        out.push(Point3::new(cx + radius * th.cos(), cy + radius * th.sin(), z));
                    }
                }
            }
        }
    }
}

fn strata(cells: f64) -> usize {
    (cells.round() as usize).max(1)
}

/// One uniform sample per stratum of an `na × nb` split of the
/// parallelogram `origin + s·a + t·b`, `s, t ∈ [0, 1]`.
pub(crate) fn sample_rect(
    rng: &mut impl Rng,
    origin: Point3<f64>,
    a: Vector3<f64>,
    b: Vector3<f64>,
    density: f64,
    out: &mut Vec<Point3<f64>>,
) {
    let k = density.sqrt();
    let (na, nb) = (strata(a.norm() * k), strata(b.norm() * k));
    for i in 0..na {
        for j in 0..nb {
            let s = (i as f64 + rng.random::<f64>()) / na as f64;
            let t = (j as f64 + rng.random::<f64>()) / nb as f64;
            out.push(origin + a * s + b * t);
        }
    }
}

fn sample_disc(rng: &mut impl Rng, cx: f64, cy: f64, r: f64, z: f64, density: f64, out: &mut Vec<Point3<f64>>) {
    let mut square = Vec::new();
    let origin = Point3::new(cx - r, cy - r, z);
    sample_rect(rng, origin, Vector3::x() * 2.0 * r, Vector3::y() * 2.0 * r, density, &mut square);
    out.extend(square.into_iter().filter(|p| (p.x - cx).powi(2) + (p.y - cy).powi(2) <= r * r));
}
