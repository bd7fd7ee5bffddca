use std::num::NonZero;

use kiddo::{ImmutableKdTree, SquaredEuclidean};
use nalgebra::Point3;

/// Upper bound on query points used to estimate spacing.
pub const MAX_SPACING_SAMPLES: usize = 50_000;

/// Default visibility tolerance as a multiple of median spacing.
pub const EPS_SPACING_FACTOR: f64 = 3.0;

/// Used when spacing cannot be measured (fewer than two distinct points).
const FALLBACK_EPS: f64 = 0.05;

/// Median distance from a point to its nearest neighbour, estimated on an
/// evenly strided sample of at most `max_samples` query points searched
/// against the whole cloud. Coincident neighbours are ignored.
pub fn median_spacing(points: &[Point3<f64>], max_samples: usize) -> Option<f64> {
    if points.len() < 2 || max_samples == 0 {
        return None;
    }
    let coords: Vec<[f64; 3]> = points.iter().map(|p| [p.x, p.y, p.z]).collect();
    let tree: ImmutableKdTree<f64, 3> = ImmutableKdTree::new_from_slice(&coords);
    let stride = points.len().div_ceil(max_samples);
    // Enough neighbours to step past a handful of duplicates.
    let k = NonZero::new(8.min(points.len())).expect("k is positive");
    let mut spacings: Vec<f64> = coords
        .iter()
        .step_by(stride)
        .filter_map(|q| {
            tree.nearest_n::<SquaredEuclidean>(q, k)
                .into_iter()
                .map(|n| n.distance)
                .find(|&d| d > 0.0)
                .map(f64::sqrt)
        })
        .collect();
    if spacings.is_empty() {
        return None;
    }
    let mid = spacings.len() / 2;
    let (_, median, _) = spacings.select_nth_unstable_by(mid, f64::total_cmp);
    Some(*median)
}

/// `3 ×` the median nearest-neighbour spacing.
pub fn default_eps(points: &[Point3<f64>]) -> f64 {
    median_spacing(points, MAX_SPACING_SAMPLES)
        .map(|s| EPS_SPACING_FACTOR * s)
        .unwrap_or(FALLBACK_EPS)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regular_grid_spacing() {
        let mut pts = Vec::new();
        for i in 0..40 {
            for j in 0..40 {
                pts.push(Point3::new(i as f64 * 0.02, j as f64 * 0.02, 0.0));
            }
        }
        let s = median_spacing(&pts, MAX_SPACING_SAMPLES).unwrap();
        assert!((s - 0.02).abs() < 1e-12);
        assert!((default_eps(&pts) - 0.06).abs() < 1e-12);
        // strided sample gives the same answer on a regular lattice
        assert!((median_spacing(&pts, 100).unwrap() - 0.02).abs() < 1e-12);
    }

    #[test]
    fn duplicates_are_skipped() {
        let pts = vec![Point3::origin(), Point3::origin(), Point3::new(1.0, 0.0, 0.0)];
        assert_eq!(median_spacing(&pts, 10), Some(1.0));
    }

    #[test]
    fn degenerate_clouds_fall_back() {
        assert_eq!(median_spacing(&[], 10), None);
        assert_eq!(median_spacing(&[Point3::origin(); 3], 10), None);
        assert_eq!(default_eps(&[Point3::origin()]), FALLBACK_EPS);
    }
}
