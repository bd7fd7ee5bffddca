use serde::Serialize;

use super::HeightGrid;
use crate::classes::ClassId;

/// Connected single-class footprint on a [`HeightGrid`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DebrisInstance {
    /// 1-based, in order of decreasing volume.
    pub id: u32,
    pub class: ClassId,
    /// Flat cell indices in ascending order.
    pub cells: Vec<usize>,
    /// Cubic meters (cubic scene units when unscaled).
    pub volume: f64,
    /// Mean of member-cell centers in the grid frame.
    pub centroid: (f64, f64),
    pub area: f64,
}

/// `GS² · Σ Z` over `cells`.
pub fn compute_volume(grid: &HeightGrid, cells: &[usize]) -> f64 {
    grid.cell_area() * cells.iter().map(|&c| grid.height(c)).sum::<f64>()
}

/// 8-connected components of occupied cells sharing one class. Components
/// smaller than `min_cells` are dropped; the rest are sorted by decreasing
/// volume (ties by lowest member cell) and numbered from 1.
pub fn cluster_instances(grid: &HeightGrid, min_cells: usize) -> Vec<DebrisInstance> {
    let (cols, rows) = (grid.cols(), grid.rows());
    let mut seen = vec![false; grid.len()];
    let mut stack = Vec::new();
    let mut found = Vec::new();
    for start in 0..grid.len() {
        if seen[start] || !grid.is_occupied(start) {
            continue;
        }
        let class = grid.class(start);
        let mut cells = Vec::new();
        seen[start] = true;
        stack.push(start);
        while let Some(i) = stack.pop() {
            cells.push(i);
            let (c, r) = grid.cell(i);
            for dr in -1i64..=1 {
                for dc in -1i64..=1 {
                    let (nc, nr) = (c as i64 + dc, r as i64 + dr);
                    if nc < 0 || nr < 0 || nc >= cols as i64 || nr >= rows as i64 {
                        continue;
                    }
                    let j = grid.index(nc as usize, nr as usize);
                    if !seen[j] && grid.is_occupied(j) && grid.class(j) == class {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        if cells.len() < min_cells.max(1) {
            continue;
        }
        cells.sort_unstable();
        let volume = compute_volume(grid, &cells);
        let (sx, sy) = cells.iter().fold((0.0, 0.0), |(x, y), &i| {
            let (cx, cy) = grid.cell_center(i);
            (x + cx, y + cy)
        });
        let k = cells.len() as f64;
        found.push(DebrisInstance {
            id: 0,
            class,
            centroid: (sx / k, sy / k),
            area: k * grid.cell_area(),
            volume,
            cells,
        });
    }
    found.sort_by(|a, b| b.volume.total_cmp(&a.volume).then(a.cells[0].cmp(&b.cells[0])));
    for (i, inst) in found.iter_mut().enumerate() {
        inst.id = i as u32 + 1;
    }
    found
}
