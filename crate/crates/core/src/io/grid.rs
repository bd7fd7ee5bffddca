//! Height-grid rasters in ESRI ASCII grid form and the instance table.
//!
//! A grid is written as three rasters with identical headers: heights in
//! meters, the cell class index and the contributing point count. Rows are
//! written top (largest y) first, as the format requires.

use std::fmt::Write as _;
use std::path::Path;

use super::ply::write_bytes;
use crate::classes::{ClassId, ClassTable};
use crate::error::{Error, Location, Result};
use crate::volumetry::{DebrisInstance, HeightGrid};

pub const NODATA: i32 = -9999;

fn header(grid: &HeightGrid) -> String {
    let (x0, y0) = grid.origin();
    format!(
        "ncols {}\nnrows {}\nxllcorner {}\nyllcorner {}\ncellsize {}\nNODATA_value {}\n",
        grid.cols(),
        grid.rows(),
        x0,
        y0,
        grid.cell_size(),
        NODATA
    )
}

fn raster<T: std::fmt::Display>(grid: &HeightGrid, value: impl Fn(usize) -> T) -> String {
    let mut out = header(grid);
    for row in (0..grid.rows()).rev() {
        for col in 0..grid.cols() {
            if col > 0 {
                out.push(' ');
            }
            write!(out, "{}", value(grid.index(col, row))).expect("write to String");
        }
        out.push('\n');
    }
    out
}

pub fn format_height_raster(grid: &HeightGrid) -> String {
    raster(grid, |i| grid.height(i))
}

pub fn format_class_raster(grid: &HeightGrid) -> String {
    raster(grid, |i| grid.class(i).0)
}

pub fn format_count_raster(grid: &HeightGrid) -> String {
    raster(grid, |i| grid.count(i))
}

/// Writes `height.asc`, `class.asc` and `count.asc` into `dir`.
pub fn write_height_grid(grid: &HeightGrid, dir: &Path) -> Result<()> {
    write_bytes(&dir.join("height.asc"), format_height_raster(grid).as_bytes())?;
    write_bytes(&dir.join("class.asc"), format_class_raster(grid).as_bytes())?;
    write_bytes(&dir.join("count.asc"), format_count_raster(grid).as_bytes())
}

/// Parsed ESRI ASCII raster with rows stored bottom-up.
#[derive(Clone, Debug, PartialEq)]
pub struct AsciiRaster {
    pub cols: usize,
    pub rows: usize,
    pub origin: (f64, f64),
    pub cell_size: f64,
    pub nodata: f64,
    pub values: Vec<f64>,
}

const MAX_RASTER_CELLS: usize = crate::volumetry::MAX_GRID_CELLS;

pub fn parse_ascii_raster(text: &str, source_name: &str) -> Result<AsciiRaster> {
    let err = |line: usize, msg: String| Error::malformed(source_name, Location::Line(line), msg);
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let keys = ["ncols", "nrows", "xllcorner", "yllcorner", "cellsize", "NODATA_value"];
    let mut head = [0.0f64; 6];
    for (slot, key) in keys.iter().enumerate() {
        let (n, line) = lines.next().ok_or_else(|| err(slot + 1, format!("missing `{key}` header")))?;
        let mut parts = line.split_whitespace();
        let (Some(k), Some(v), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(err(n, format!("expected `{key} <value>`")));
        };
        if !k.eq_ignore_ascii_case(key) {
            return Err(err(n, format!("expected `{key}`, found `{k}`")));
        }
        head[slot] = v
            .parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| err(n, format!("`{v}` is not a finite number")))?;
    }
    let dim = |x: f64, line: usize, what: &str| -> Result<usize> {
        if x.fract() == 0.0 && x >= 1.0 && x <= MAX_RASTER_CELLS as f64 {
            Ok(x as usize)
        } else {
            Err(err(line, format!("{what} {x} is not a positive integer in range")))
        }
    };
    let cols = dim(head[0], 1, "ncols")?;
    let rows = dim(head[1], 2, "nrows")?;
    if cols * rows > MAX_RASTER_CELLS {
        return Err(err(2, format!("{cols}x{rows} raster is too large")));
    }
    if !(head[4] > 0.0) {
        return Err(err(5, "cellsize must be positive".into()));
    }
    let mut values = vec![0.0; cols * rows];
    let mut last = 6;
    for r in 0..rows {
        let (n, line) = lines
            .next()
            .ok_or_else(|| err(last + 1, format!("expected {rows} data rows, found {r}")))?;
        last = n;
        let row = rows - 1 - r;
        let mut count = 0;
        for tok in line.split_whitespace() {
            if count == cols {
                return Err(err(n, format!("more than {cols} values")));
            }
            values[row * cols + count] = tok
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| err(n, format!("`{tok}` is not a finite number")))?;
            count += 1;
        }
        if count != cols {
            return Err(err(n, format!("expected {cols} values, found {count}")));
        }
    }
    if let Some((n, line)) = lines.find(|(_, l)| !l.trim().is_empty()) {
        return Err(err(n, format!("unexpected trailing data `{}`", line.trim())));
    }
    Ok(AsciiRaster {
        cols,
        rows,
        origin: (head[2], head[3]),
        cell_size: head[4],
        nodata: head[5],
        values,
    })
}

/// Rebuilds a grid from its three rasters.
pub fn parse_height_grid(height: &str, class: &str, count: &str, source_name: &str) -> Result<HeightGrid> {
    let h = parse_ascii_raster(height, &format!("{source_name}/height.asc"))?;
    let c = parse_ascii_raster(class, &format!("{source_name}/class.asc"))?;
    let n = parse_ascii_raster(count, &format!("{source_name}/count.asc"))?;
    let same = |r: &AsciiRaster| r.cols == h.cols && r.rows == h.rows && r.origin == h.origin && r.cell_size == h.cell_size;
    if !same(&c) || !same(&n) {
        return Err(Error::malformed(source_name, Location::Line(1), "raster headers disagree"));
    }
    let int = |v: f64, max: f64, what: &str| -> Result<f64> {
        if v.fract() == 0.0 && (0.0..=max).contains(&v) {
            Ok(v)
        } else {
            Err(Error::malformed(source_name, Location::Line(7), format!("{what} value {v} is out of range")))
        }
    };
    let mut classes = Vec::with_capacity(c.values.len());
    let mut counts = Vec::with_capacity(n.values.len());
    for (&cv, &nv) in c.values.iter().zip(&n.values) {
        classes.push(ClassId(int(cv, 255.0, "class")? as u8));
        counts.push(int(nv, u32::MAX as f64, "count")? as u32);
    }
    HeightGrid::from_cells(h.origin, h.cell_size, h.cols, h.rows, h.values, classes, counts)
        .map_err(|e| Error::malformed(source_name, Location::Line(7), e.to_string()))
}

pub fn read_height_grid(dir: &Path) -> Result<HeightGrid> {
    let load = |name: &str| {
        let path = dir.join(name);
        std::fs::read_to_string(&path).map_err(|e| Error::read(path, e))
    };
    parse_height_grid(&load("height.asc")?, &load("class.asc")?, &load("count.asc")?, &dir.display().to_string())
}

/// `id,class,volume_m3,centroid_x,centroid_y,area_m2`, one row per instance.
pub fn format_instances_csv(instances: &[DebrisInstance], classes: &ClassTable) -> String {
    let mut out = String::from("id,class,volume_m3,centroid_x,centroid_y,area_m2\n");
    for inst in instances {
        let name = classes.name(inst.class).map_or_else(|| inst.class.to_string(), str::to_owned);
        writeln!(
            out,
            "{},{},{},{},{},{}",
            inst.id, name, inst.volume, inst.centroid.0, inst.centroid.1, inst.area
        )
        .expect("write to String");
    }
    out
}

pub fn write_instances_csv(instances: &[DebrisInstance], classes: &ClassTable, path: &Path) -> Result<()> {
    write_bytes(path, format_instances_csv(instances, classes).as_bytes())
}
