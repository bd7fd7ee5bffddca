use nalgebra::Vector3;
use rayon::prelude::*;

use super::GroundPlane;
use crate::classes::ClassId;
use crate::error::{Error, Result};
use crate::projection::SemanticCloud;

/// Upper bound on `cols × rows`; larger grids almost always mean a grid size
/// in the wrong unit.
pub const MAX_GRID_CELLS: usize = 1 << 24;

/// Debris heights above the ground plane on a square lattice in the plane's
/// own 2D frame. Cell `(col, row)` spans
/// `[x0 + col·GS, x0 + (col+1)·GS) × [y0 + row·GS, y0 + (row+1)·GS)`;
/// storage is row-major with row 0 at `y0`.
#[derive(Clone, Debug, PartialEq)]
pub struct HeightGrid {
    origin: (f64, f64),
    cell_size: f64,
    cols: usize,
    rows: usize,
    heights: Vec<f64>,
    classes: Vec<ClassId>,
    counts: Vec<u32>,
}

impl HeightGrid {
    /// Assembles a grid from per-cell arrays, checking shapes and that
    /// heights are finite and non-negative, and that empty cells are
    /// background with zero height.
    pub fn from_cells(
        origin: (f64, f64),
        cell_size: f64,
        cols: usize,
        rows: usize,
        heights: Vec<f64>,
        classes: Vec<ClassId>,
        counts: Vec<u32>,
    ) -> Result<Self> {
        if !(cell_size > 0.0 && cell_size.is_finite()) || !origin.0.is_finite() || !origin.1.is_finite() {
            return Err(Error::Domain("grid origin and cell size must be finite, cell size positive".into()));
        }
        if cols == 0 || rows == 0 || cols.saturating_mul(rows) > MAX_GRID_CELLS {
            return Err(Error::Domain(format!("grid of {cols}x{rows} cells is empty or too large")));
        }
        let n = cols * rows;
        if heights.len() != n || classes.len() != n || counts.len() != n {
            return Err(Error::Domain("grid arrays do not match grid shape".into()));
        }
        for i in 0..n {
            let z = heights[i];
            if !(z >= 0.0 && z.is_finite()) {
                return Err(Error::Domain(format!("cell {i} height {z} is not finite and non-negative")));
            }
            if counts[i] == 0 && (z != 0.0 || !classes[i].is_background()) {
                return Err(Error::Domain(format!("cell {i} has no points but carries data")));
            }
            if counts[i] > 0 && classes[i].is_background() {
                return Err(Error::Domain(format!("occupied cell {i} is labelled background")));
            }
        }
        Ok(HeightGrid {
            origin,
            cell_size,
            cols,
            rows,
            heights,
            classes,
            counts,
        })
    }

    pub fn origin(&self) -> (f64, f64) {
        self.origin
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn len(&self) -> usize {
        self.heights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heights.is_empty()
    }

    #[inline]
    pub fn index(&self, col: usize, row: usize) -> usize {
        row * self.cols + col
    }

    /// `(col, row)` of a flat cell index.
    #[inline]
    pub fn cell(&self, index: usize) -> (usize, usize) {
        (index % self.cols, index / self.cols)
    }

    pub fn heights(&self) -> &[f64] {
        &self.heights
    }

    pub fn classes(&self) -> &[ClassId] {
        &self.classes
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn height(&self, index: usize) -> f64 {
        self.heights[index]
    }

    pub fn class(&self, index: usize) -> ClassId {
        self.classes[index]
    }

    pub fn count(&self, index: usize) -> u32 {
        self.counts[index]
    }

    /// Whether any debris point fell into the cell.
    pub fn is_occupied(&self, index: usize) -> bool {
        self.counts[index] > 0
    }

    pub fn cell_center(&self, index: usize) -> (f64, f64) {
        let (c, r) = self.cell(index);
        (
            self.origin.0 + (c as f64 + 0.5) * self.cell_size,
            self.origin.1 + (r as f64 + 0.5) * self.cell_size,
        )
    }

    pub fn cell_area(&self) -> f64 {
        self.cell_size * self.cell_size
    }

    /// Site-wide debris volume, `GS² · Σ Z` over every cell.
    pub fn total_volume(&self) -> f64 {
        self.cell_area() * self.heights.iter().sum::<f64>()
    }
}

fn cell_count(span: f64, gs: f64) -> usize {
    // A span within the snap distance of a multiple of GS gains no sliver cell.
    ((span / gs - EDGE_SNAP).ceil() as usize).max(1)
}

/// Points this close to the anchored footprint, as a fraction of GS, fall
/// into its edge cells.
const EDGE_SNAP: f64 = 1e-3;

/// Cell lattice along one in-plane axis. `anchor..=far` spans `core`
/// cells whose last one is closed; whole cells are added on either side
/// to reach `lo..=hi`.
#[derive(Clone, Copy, Debug)]
struct Axis {
    anchor: f64,
    far: f64,
    gs: f64,
    before: usize,
    core: usize,
    n: usize,
}

impl Axis {
    fn new(anchor: f64, far: f64, lo: f64, hi: f64, gs: f64) -> Axis {
        let core = cell_count(far - anchor, gs);
        let before = ((anchor - lo) / gs).ceil().max(0.0) as usize;
        let after = if hi > far { ((hi - anchor) / gs).floor() as usize + 1 } else { 0 };
        Axis {
            anchor,
            far,
            gs,
            before,
            core,
            n: before + core.max(after),
        }
    }

    fn origin(&self) -> f64 {
        self.anchor - self.before as f64 * self.gs
    }

    fn index(&self, a: f64) -> usize {
        let snap = EDGE_SNAP * self.gs;
        let k = ((a - self.anchor) / self.gs).floor();
        let k = if a >= self.anchor - snap && a <= self.far + snap {
            k.clamp(0.0, self.core as f64 - 1.0)
        } else {
            k
        };
        ((k + self.before as f64).max(0.0) as usize).min(self.n - 1)
    }
}

type Bounds = ((f64, f64), (f64, f64));

fn bounds(cloud: &SemanticCloud, plane: &GroundPlane, basis: &(Vector3<f64>, Vector3<f64>), idx: &[usize]) -> Bounds {
    idx.par_iter()
        .map(|&i| {
            let (a, b) = plane.plane_coords(basis, cloud.position(i));
            ((a, b), (a, b))
        })
        .reduce(
            || ((f64::INFINITY, f64::INFINITY), (f64::NEG_INFINITY, f64::NEG_INFINITY)),
            |(l1, h1), (l2, h2)| ((l1.0.min(l2.0), l1.1.min(l2.1)), (h1.0.max(h2.0), h1.1.max(h2.1))),
        )
}

/// Resamples non-background points onto a height grid. The lattice is
/// anchored at the lower corner of the in-plane bounding box of debris
/// standing more than `lift` above the plane, and that box's far edges are
/// closed; lower debris extends the grid by whole cells. Each cell keeps
/// the largest height above the plane (negative heights clamp to 0), the
/// majority class (ties to the smaller index) and the contributing point
/// count. Without debris the grid spans the whole cloud and is all zeros.
pub fn resample(cloud: &SemanticCloud, plane: &GroundPlane, grid_size: f64, lift: f64) -> Result<HeightGrid> {
    if !(grid_size > 0.0 && grid_size.is_finite()) {
        return Err(Error::Domain(format!("grid size {grid_size} must be positive")));
    }
    if !(lift >= 0.0 && lift.is_finite()) {
        return Err(Error::Domain(format!("lift height {lift} must be non-negative")));
    }
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let basis = plane.tangent_basis();
    let debris: Vec<usize> = (0..cloud.len())
        .filter(|&i| !cloud.fused_class(i).is_background())
        .collect();
    let extent_of: Vec<usize> = if debris.is_empty() {
        (0..cloud.len()).collect()
    } else {
        debris.clone()
    };
    let raised: Vec<usize> = extent_of
        .iter()
        .copied()
        .filter(|&i| plane.signed_height(cloud.position(i)) > lift)
        .collect();
    let (lo, hi) = bounds(cloud, plane, &basis, &extent_of);
    let (alo, ahi) = if raised.is_empty() {
        (lo, hi)
    } else {
        bounds(cloud, plane, &basis, &raised)
    };
    let ax = Axis::new(alo.0, ahi.0, lo.0, hi.0, grid_size);
    let ay = Axis::new(alo.1, ahi.1, lo.1, hi.1, grid_size);
    let (cols, rows) = (ax.n, ay.n);
    if cols.saturating_mul(rows) > MAX_GRID_CELLS {
        return Err(Error::DegenerateGeometry(format!(
            "a {cols}x{rows} height grid exceeds {MAX_GRID_CELLS} cells; increase the grid size"
        )));
    }
    let n = cols * rows;

    // (cell, class, height) per debris point, sorted so each cell's points
    // are contiguous and grouped by class. Max and counts are
    // order-free, so the result does not depend on scheduling.
    let mut samples: Vec<(usize, u8, f64)> = debris
        .par_iter()
        .map(|&i| {
            let p = cloud.position(i);
            let (a, b) = plane.plane_coords(&basis, p);
            let cell = ay.index(b) * cols + ax.index(a);
            (cell, cloud.fused_class(i).0, plane.signed_height(p).max(0.0))
        })
        .collect();
    samples.par_sort_unstable_by(|x, y| (x.0, x.1).cmp(&(y.0, y.1)).then(x.2.total_cmp(&y.2)));

    let mut heights = vec![0.0f64; n];
    let mut classes = vec![ClassId::BACKGROUND; n];
    let mut counts = vec![0u32; n];
    let mut best_run = vec![0u32; n];
    let mut i = 0;
    while i < samples.len() {
        let (cell, class, _) = samples[i];
        let mut j = i;
        while j < samples.len() && samples[j].0 == cell && samples[j].1 == class {
            heights[cell] = heights[cell].max(samples[j].2);
            j += 1;
        }
        let run = (j - i) as u32;
        counts[cell] += run;
        // Classes arrive in ascending order, so strict `>` keeps the
        // smaller index on ties.
        if run > best_run[cell] {
            best_run[cell] = run;
            classes[cell] = ClassId(class);
        }
        i = j;
    }
    HeightGrid::from_cells((ax.origin(), ay.origin()), grid_size, cols, rows, heights, classes, counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Point3, Vector3};

    fn level() -> GroundPlane {
        GroundPlane::through(&Point3::origin(), Vector3::z())
    }

    #[test]
    fn single_point_single_cell() {
        let pts = vec![Point3::new(0.3, 0.2, 0.0), Point3::new(1.0, 1.0, 2.0), Point3::new(-1.0, 0.5, 0.0)];
        let cloud = SemanticCloud::from_labels(pts, 3, &[ClassId(0), ClassId(2), ClassId(0)]);
        let grid = resample(&cloud, &level(), 0.1, 0.0).unwrap();
        assert_eq!((grid.cols(), grid.rows()), (1, 1));
        assert_eq!(grid.heights(), &[2.0]);
        assert_eq!(grid.classes(), &[ClassId(2)]);
        assert_eq!(grid.origin(), (1.0, 1.0));
    }

    #[test]
    fn box_top_face_fills_ten_by_ten_cells() {
        let mut pts = Vec::new();
        for i in 0..40 {
            for j in 0..40 {
                pts.push(Point3::new(i as f64 / 39.0, j as f64 / 39.0, 1.0));
            }
        }
        let labels = vec![ClassId(1); pts.len()];
        let grid = resample(&SemanticCloud::from_labels(pts, 2, &labels), &level(), 0.1, 0.0).unwrap();
        assert_eq!((grid.cols(), grid.rows()), (10, 10));
        assert!(grid.heights().iter().all(|&z| z == 1.0));
        assert!((grid.total_volume() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn all_background_is_zero_grid_over_cloud_extent() {
        let pts = vec![Point3::new(0.0, 0.0, 0.3), Point3::new(0.95, 0.45, -0.1)];
        let cloud = SemanticCloud::from_labels(pts, 2, &[ClassId(0); 2]);
        let grid = resample(&cloud, &level(), 0.1, 0.0).unwrap();
        assert_eq!((grid.cols(), grid.rows()), (10, 5));
        assert!(grid.heights().iter().all(|&z| z == 0.0));
        assert!(grid.counts().iter().all(|&c| c == 0));
    }

    #[test]
    fn heights_below_ground_clamp_to_zero() {
        let pts = vec![Point3::new(0.0, 0.0, -0.4)];
        let grid = resample(&SemanticCloud::from_labels(pts, 2, &[ClassId(1)]), &level(), 0.5, 0.0).unwrap();
        assert_eq!(grid.heights(), &[0.0]);
        assert_eq!(grid.counts(), &[1]);
    }

    #[test]
    fn majority_class_ties_to_smaller_index() {
        let pts = vec![
            Point3::new(0.01, 0.01, 1.0),
            Point3::new(0.02, 0.01, 1.0),
            Point3::new(0.03, 0.01, 1.0),
            Point3::new(0.04, 0.01, 1.0),
            Point3::new(0.05, 0.01, 1.0),
        ];
        let labels = [ClassId(3), ClassId(2), ClassId(3), ClassId(2), ClassId(4)];
        let grid = resample(&SemanticCloud::from_labels(pts, 5, &labels), &level(), 1.0, 0.0).unwrap();
        assert_eq!(grid.classes(), &[ClassId(2)]);
        assert_eq!(grid.counts(), &[5]);
    }

    #[test]
    fn low_debris_extends_the_lattice_by_whole_cells() {
        let mut pts = Vec::new();
        for i in 0..=20 {
            for j in 0..=20 {
                pts.push(Point3::new(i as f64 * 0.05, j as f64 * 0.05, 1.0));
            }
        }
        let mut labels = vec![ClassId(1); pts.len()];
        let raised = resample(&SemanticCloud::from_labels(pts.clone(), 2, &labels), &level(), 0.1, 0.02).unwrap();
        // Stray labelled points at ground level on both sides.
        pts.push(Point3::new(-0.013, 0.5, 0.0));
        pts.push(Point3::new(1.004, 0.5, 0.0));
        labels.extend([ClassId(1); 2]);
        let grid = resample(&SemanticCloud::from_labels(pts, 2, &labels), &level(), 0.1, 0.02).unwrap();
        assert_eq!((raised.cols(), raised.rows()), (10, 10));
        assert_eq!((grid.cols(), grid.rows()), (12, 10));
        assert!((grid.origin().0 + 0.1).abs() < 1e-12);
        assert_eq!(grid.total_volume(), raised.total_volume());
        assert_eq!(grid.count(grid.index(0, 5)), 1);
        assert_eq!(grid.count(grid.index(11, 5)), 1);
        assert_eq!(grid.height(grid.index(11, 5)), 0.0);
    }

    #[test]
    fn oversized_grid_is_rejected() {
        let pts = vec![Point3::new(0.0, 0.0, 1.0), Point3::new(1000.0, 1000.0, 1.0)];
        let cloud = SemanticCloud::from_labels(pts, 2, &[ClassId(1); 2]);
        assert!(matches!(resample(&cloud, &level(), 0.01, 0.0), Err(Error::DegenerateGeometry(_))));
        assert!(resample(&cloud, &level(), 0.0, 0.0).is_err());
        assert!(resample(&cloud, &level(), 0.1, -1.0).is_err());
    }
}
