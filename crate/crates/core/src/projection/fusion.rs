use nalgebra::Point3;
use rayon::prelude::*;

use super::depth::{visible_pixel, DepthMap};
use super::project_point;
use crate::classes::ClassId;
use crate::io::{CameraPose, LabelMask, Scene};

/// Points per parallel work unit during vote accumulation.
const CHUNK: usize = 8192;

/// Point cloud with one vote count per class per point and the fused class.
#[derive(Clone, Debug, PartialEq)]
pub struct SemanticCloud {
    positions: Vec<Point3<f64>>,
    class_count: usize,
    /// Row-major `positions.len() × class_count`.
    votes: Vec<u32>,
    fused: Vec<ClassId>,
}

impl SemanticCloud {
    pub fn from_votes(positions: Vec<Point3<f64>>, class_count: usize, votes: Vec<u32>) -> Self {
        assert!(
            (1..=256).contains(&class_count),
            "class count must be within 1..=256"
        );
        assert_eq!(votes.len(), positions.len() * class_count, "vote matrix shape");
        let fused = votes.chunks_exact(class_count).map(fuse_votes).collect();
        SemanticCloud {
            positions,
            class_count,
            votes,
            fused,
        }
    }

    /// One vote per point for its given label.
    pub fn from_labels(positions: Vec<Point3<f64>>, class_count: usize, labels: &[ClassId]) -> Self {
        assert_eq!(positions.len(), labels.len());
        let mut votes = vec![0u32; positions.len() * class_count];
        for (i, label) in labels.iter().enumerate() {
            assert!(label.index() < class_count, "label outside class table");
            votes[i * class_count + label.index()] = 1;
        }
        Self::from_votes(positions, class_count, votes)
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn positions(&self) -> &[Point3<f64>] {
        &self.positions
    }

    pub fn position(&self, i: usize) -> &Point3<f64> {
        &self.positions[i]
    }

    pub fn votes(&self, i: usize) -> &[u32] {
        &self.votes[i * self.class_count..(i + 1) * self.class_count]
    }

    pub fn fused_class(&self, i: usize) -> ClassId {
        self.fused[i]
    }

    pub fn fused_classes(&self) -> &[ClassId] {
        &self.fused
    }

    /// Number of views that voted for point `i`.
    pub fn support(&self, i: usize) -> u32 {
        self.votes(i).iter().sum()
    }

    /// Point count per fused class.
    pub fn class_histogram(&self) -> Vec<usize> {
        let mut hist = vec![0usize; self.class_count];
        for c in &self.fused {
            hist[c.index()] += 1;
        }
        hist
    }
}

/// Majority class. Among tied classes the smallest non-background index
/// wins; background wins only when it is the sole maximum or nothing voted.
pub fn fuse_votes(votes: &[u32]) -> ClassId {
    let max = votes.iter().copied().max().unwrap_or(0);
    if max == 0 {
        return ClassId::BACKGROUND;
    }
    votes
        .iter()
        .enumerate()
        .skip(1)
        .find(|(_, &v)| v == max)
        .map_or(ClassId::BACKGROUND, |(i, _)| ClassId(i as u8))
}

fn accumulate(
    points: &[Point3<f64>],
    cameras: &[CameraPose],
    masks: &[LabelMask],
    depth: Option<(&[DepthMap], f64)>,
    class_count: usize,
) -> Vec<u32> {
    assert_eq!(cameras.len(), masks.len(), "one mask per camera");
    if let Some((maps, _)) = depth {
        assert_eq!(cameras.len(), maps.len(), "one depth map per camera");
    }
    let mut votes = vec![0u32; points.len() * class_count];
    if class_count == 0 {
        return votes;
    }
    // Points are partitioned across workers and each worker walks every
    // view, so each vote slot has a single writer and the counts do not
    // depend on scheduling.
    votes
        .par_chunks_mut(CHUNK * class_count)
        .enumerate()
        .for_each(|(chunk_idx, slots)| {
            let start = chunk_idx * CHUNK;
            let pts = &points[start..start + slots.len() / class_count];
            for (c, (cam, mask)) in cameras.iter().zip(masks).enumerate() {
                for (j, p) in pts.iter().enumerate() {
                    let pixel = match depth {
                        Some((maps, eps)) => visible_pixel(p, cam, &maps[c], eps),
                        None => project_point(p, cam)
                            .pixel()
                            .and_then(|px| cam.pixel_at(px.u, px.v)),
                    };
                    if let Some((x, y)) = pixel {
                        let class = mask.get(x, y).index();
                        if class < class_count {
                            slots[j * class_count + class] += 1;
                        }
                    }
                }
            }
        });
    votes
}

/// Depth-aware label projection: each camera votes its mask class at the
/// nearest pixel for every cloud point that passes the visibility test.
pub fn project_labels(scene: &Scene, masks: &[LabelMask], dmaps: &[DepthMap], eps: f64) -> SemanticCloud {
    assert!(eps > 0.0, "visibility tolerance must be positive");
    let k = scene.classes.len();
    let votes = accumulate(&scene.cloud.points, &scene.cameras, masks, Some((dmaps, eps)), k);
    SemanticCloud::from_votes(scene.cloud.points.clone(), k, votes)
}

/// Label projection without an occlusion test: every in-frame point votes.
pub fn project_labels_naive(scene: &Scene, masks: &[LabelMask]) -> SemanticCloud {
    let k = scene.classes.len();
    let votes = accumulate(&scene.cloud.points, &scene.cameras, masks, None, k);
    SemanticCloud::from_votes(scene.cloud.points.clone(), k, votes)
}
