use std::fmt::Write as _;
use std::path::Path;

use image::{Rgba, RgbaImage};
use serde::Serialize;

use super::RiskMap;
use crate::classes::{ClassId, ClassTable};
use crate::error::Result;
use crate::io::ply::write_bytes;

/// Shared `log10(KE)` range so colours compare across categories.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KeScale {
    pub log_min: f64,
    pub log_max: f64,
}

impl KeScale {
    /// Range of positive cell energies over every map; `None` when all are 0.
    pub fn from_maps(maps: &[RiskMap]) -> Option<KeScale> {
        let (lo, hi) = maps
            .iter()
            .flat_map(|m| m.cell_energy.iter().copied())
            .filter(|&e| e > 0.0)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), e| (lo.min(e), hi.max(e)));
        (lo <= hi).then(|| KeScale {
            log_min: lo.log10(),
            log_max: hi.log10(),
        })
    }

    /// Position of `energy` on the ramp, in `[0, 1]`.
    pub fn position(&self, energy: f64) -> f64 {
        let span = self.log_max - self.log_min;
        if span > 0.0 {
            ((energy.log10() - self.log_min) / span).clamp(0.0, 1.0)
        } else {
            1.0
        }
    }
}

/// Top-down raster, north up, `pixels_per_cell` pixels per cell edge. Cells
/// with zero energy are fully transparent; others take the viridis colour of
/// their position on `scale`.
pub fn render_heatmap(map: &RiskMap, scale: Option<&KeScale>, pixels_per_cell: u32) -> RgbaImage {
    let ppc = pixels_per_cell.max(1);
    let mut img = RgbaImage::new(map.cols as u32 * ppc, map.rows as u32 * ppc);
    for row in 0..map.rows {
        let y0 = (map.rows - 1 - row) as u32 * ppc;
        for col in 0..map.cols {
            let e = map.cell_energy[row * map.cols + col];
            let px = match scale {
                Some(s) if e > 0.0 => {
                    let c = colorous::VIRIDIS.eval_continuous(s.position(e));
                    Rgba([c.r, c.g, c.b, 255])
                }
                _ => Rgba([0, 0, 0, 0]),
            };
            for dy in 0..ppc {
                for dx in 0..ppc {
                    img.put_pixel(col as u32 * ppc + dx, y0 + dy, px);
                }
            }
        }
    }
    img
}

pub fn encode_heatmap_png(img: &RgbaImage) -> Vec<u8> {
    let mut out = std::io::Cursor::new(Vec::new());
    img.write_to(&mut out, image::ImageFormat::Png)
        .expect("PNG encoding to memory");
    out.into_inner()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FlaggedCell {
    pub col: usize,
    pub row: usize,
    pub class: ClassId,
    pub kinetic_energy: f64,
}

/// Cells whose energy exceeds `threshold`; none without a threshold.
pub fn flagged_cells(map: &RiskMap, threshold: Option<f64>) -> Vec<FlaggedCell> {
    let Some(t) = threshold else {
        return Vec::new();
    };
    map.cell_energy
        .iter()
        .enumerate()
        .filter(|(_, &e)| e > t)
        .map(|(i, &e)| FlaggedCell {
            col: i % map.cols,
            row: i / map.cols,
            class: map.cell_class[i],
            kinetic_energy: e,
        })
        .collect()
}

/// `col,row,x,y,class,ke_j` with `(x, y)` the cell center in the grid frame.
pub fn format_flagged_csv(map: &RiskMap, cells: &[FlaggedCell], classes: &ClassTable) -> String {
    let mut out = String::from("col,row,x,y,class,ke_j\n");
    for c in cells {
        let x = map.origin.0 + (c.col as f64 + 0.5) * map.cell_size;
        let y = map.origin.1 + (c.row as f64 + 0.5) * map.cell_size;
        let name = classes.name(c.class).map_or_else(|| c.class.to_string(), str::to_owned);
        writeln!(out, "{},{},{},{},{},{}", c.col, c.row, x, y, name, c.kinetic_energy).expect("write to String");
    }
    out
}

/// Writes the heatmap PNG and its flagged-cell CSV next to it
/// (`<stem>_flagged.csv`).
pub fn write_heatmap(
    map: &RiskMap,
    scale: Option<&KeScale>,
    pixels_per_cell: u32,
    threshold: Option<f64>,
    classes: &ClassTable,
    png_path: &Path,
) -> Result<()> {
    write_bytes(png_path, &encode_heatmap_png(&render_heatmap(map, scale, pixels_per_cell)))?;
    let stem = png_path.file_stem().and_then(|s| s.to_str()).unwrap_or("risk");
    let csv = format_flagged_csv(map, &flagged_cells(map, threshold), classes);
    write_bytes(&png_path.with_file_name(format!("{stem}_flagged.csv")), csv.as_bytes())
}
