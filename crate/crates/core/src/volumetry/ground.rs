use nalgebra::{Matrix3, Point3, SymmetricEigen, Vector3};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::projection::SemanticCloud;

/// Largest number of candidate points used to score plane hypotheses.
const MAX_SCORING_POINTS: usize = 50_000;

/// `n·x + d = 0`, with `n` oriented toward the debris side.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundPlane {
    pub normal: Vector3<f64>,
    pub offset: f64,
    /// Share of candidate points within the inlier threshold of the plane.
    pub inlier_fraction: f64,
}

impl GroundPlane {
    /// Builds a plane through `point` with the given normal (normalised here).
    pub fn through(point: &Point3<f64>, normal: Vector3<f64>) -> Self {
        let n = normal.normalize();
        GroundPlane {
            normal: n,
            offset: -n.dot(&point.coords) + 0.0,
            inlier_fraction: 1.0,
        }
    }

    #[inline]
    pub fn signed_height(&self, p: &Point3<f64>) -> f64 {
        self.normal.dot(&p.coords) + self.offset
    }

    /// Orthonormal in-plane axes `(u, v)` with `u × v = n`. `u` is the axis
    /// least aligned with `n` projected onto the plane; near-ties go to the
    /// lower axis so nearly level ground maps onto world x/y.
    pub fn tangent_basis(&self) -> (Vector3<f64>, Vector3<f64>) {
        let n = self.normal;
        let mut k = 0;
        for i in 1..3 {
            if n[i].abs() < n[k].abs() - 1e-9 {
                k = i;
            }
        }
        let e = Vector3::ith(k, 1.0);
        let u = (e - n * n.dot(&e)).normalize();
        let v = n.cross(&u);
        (u, v)
    }

    /// Coordinates of `p` in the in-plane frame.
    #[inline]
    pub fn plane_coords(&self, basis: &(Vector3<f64>, Vector3<f64>), p: &Point3<f64>) -> (f64, f64) {
        (basis.0.dot(&p.coords), basis.1.dot(&p.coords))
    }
}

/// Least-squares plane: centroid and the covariance eigenvector of smallest
/// eigenvalue. Also returns the eigenvalues in ascending order.
fn fit_plane<'a>(points: impl Iterator<Item = &'a Point3<f64>> + Clone) -> Option<(Point3<f64>, Vector3<f64>, [f64; 3])> {
    let mut n = 0usize;
    let mut sum = Vector3::zeros();
    for p in points.clone() {
        sum += p.coords;
        n += 1;
    }
    if n == 0 {
        return None;
    }
    let c = sum / n as f64;
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p.coords - c;
        cov += d * d.transpose();
    }
    cov /= n as f64;
    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let normal = eig.eigenvectors.column(order[0]).into_owned();
    let values = order.map(|i| eig.eigenvalues[i]);
    Some((Point3::from(c), normal, values))
}

fn hypothesis(a: &Point3<f64>, b: &Point3<f64>, c: &Point3<f64>) -> Option<(Vector3<f64>, f64)> {
    let ab = b - a;
    let ac = c - a;
    let n = ab.cross(&ac);
    let scale = ab.norm() * ac.norm();
    if !(n.norm() > 1e-12 * scale) {
        return None;
    }
    let n = n.normalize();
    Some((n, -n.dot(&a.coords)))
}

/// Ground plane by random-sample consensus over background points (all
/// points when fewer than three are background), refined by least squares
/// over the inliers of the best hypothesis.
///
/// Hypotheses are drawn from a ChaCha8 stream seeded with `seed` and scored
/// on an evenly strided subset of at most 50k candidates, so the result is
/// independent of thread count.
pub fn register_ground(
    cloud: &SemanticCloud,
    inlier_threshold: f64,
    max_iters: usize,
    seed: u64,
) -> Result<GroundPlane> {
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    if !(inlier_threshold > 0.0) || max_iters == 0 {
        return Err(Error::Domain(
            "ground fit needs a positive inlier threshold and at least one iteration".into(),
        ));
    }
    let background: Vec<Point3<f64>> = (0..cloud.len())
        .filter(|&i| cloud.fused_class(i).is_background())
        .map(|i| *cloud.position(i))
        .collect();
    let candidates: &[Point3<f64>] = if background.len() >= 3 {
        &background
    } else {
        cloud.positions()
    };
    if candidates.len() < 3 {
        return Err(Error::DegenerateGeometry(format!(
            "ground fit needs 3 points, found {}",
            candidates.len()
        )));
    }
    let (_, _, spread) = fit_plane(candidates.iter()).expect("non-empty");
    if !(spread[1] > 1e-12 * spread[2].max(f64::MIN_POSITIVE)) {
        return Err(Error::DegenerateGeometry(
            "ground candidate points are collinear or coincident".into(),
        ));
    }

    let stride = candidates.len().div_ceil(MAX_SCORING_POINTS);
    let scoring: Vec<Point3<f64>> = candidates.iter().step_by(stride).copied().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let triples: Vec<[usize; 3]> = (0..max_iters)
        .map(|_| {
            let s = sample(&mut rng, scoring.len(), 3);
            [s.index(0), s.index(1), s.index(2)]
        })
        .collect();
    let scores: Vec<usize> = triples
        .par_iter()
        .map(|t| match hypothesis(&scoring[t[0]], &scoring[t[1]], &scoring[t[2]]) {
            Some((n, d)) => scoring
                .iter()
                .filter(|p| (n.dot(&p.coords) + d).abs() <= inlier_threshold)
                .count(),
            None => 0,
        })
        .collect();
    // First maximum wins ties.
    let best = scores
        .iter()
        .enumerate()
        .fold((0usize, 0usize), |acc, (i, &s)| if s > acc.1 { (i, s) } else { acc });

    let (normal, offset) = if best.1 == 0 {
        // Every sampled triple was degenerate: fit all candidates.
        let (c, n, _) = fit_plane(candidates.iter()).expect("non-empty");
        (n, -n.dot(&c.coords))
    } else {
        let t = triples[best.0];
        let (n, d) = hypothesis(&scoring[t[0]], &scoring[t[1]], &scoring[t[2]]).expect("scored");
        let inliers: Vec<&Point3<f64>> = candidates
            .iter()
            .filter(|p| (n.dot(&p.coords) + d).abs() <= inlier_threshold)
            .collect();
        match fit_plane(inliers.iter().copied()) {
            Some((c, rn, ev)) if ev[1] > 1e-12 * ev[2].max(f64::MIN_POSITIVE) => (rn, -rn.dot(&c.coords)),
            _ => (n, d),
        }
    };

    let mut plane = GroundPlane {
        normal: normal.normalize(),
        offset,
        inlier_fraction: 0.0,
    };
    orient(&mut plane, cloud);
    plane.inlier_fraction = candidates
        .par_iter()
        .filter(|p| plane.signed_height(p).abs() <= inlier_threshold)
        .count() as f64
        / candidates.len() as f64;
    Ok(plane)
}

/// Flips the plane so most debris points sit above it. Without a debris
/// majority, prefers `+z`, then `+y`, then `+x`.
fn orient(plane: &mut GroundPlane, cloud: &SemanticCloud) {
    let (above, below) = (0..cloud.len())
        .filter(|&i| !cloud.fused_class(i).is_background())
        .fold((0usize, 0usize), |(a, b), i| {
            let h = plane.signed_height(cloud.position(i));
            (a + (h > 0.0) as usize, b + (h < 0.0) as usize)
        });
    let flip = match above.cmp(&below) {
        std::cmp::Ordering::Less => true,
        std::cmp::Ordering::Greater => false,
        std::cmp::Ordering::Equal => {
            let n = plane.normal;
            let lead = [n.z, n.y, n.x].into_iter().find(|c| *c != 0.0).unwrap_or(1.0);
            lead < 0.0
        }
    };
    if flip {
        plane.normal = -plane.normal;
        plane.offset = -plane.offset;
    }
    plane.offset += 0.0;
}
