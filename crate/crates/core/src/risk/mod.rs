//! Kinetic energy of wind-borne debris per grid cell and per instance, one
//! map per wind category, and heatmap rendering.

mod heatmap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classes::{ClassId, ClassTable, MaterialTable, WindScale};
use crate::error::{Error, Result};
use crate::volumetry::{DebrisInstance, HeightGrid};

pub use heatmap::{
    encode_heatmap_png, flagged_cells, format_flagged_csv, render_heatmap, write_heatmap, FlaggedCell, KeScale,
};

/// `½ · rho · volume · speed²` in joules.
pub fn kinetic_energy(rho: f64, volume: f64, speed: f64) -> Result<f64> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::Domain(format!("density {rho} must be positive and finite")));
    }
    if !(volume >= 0.0 && volume.is_finite()) {
        return Err(Error::Domain(format!("volume {volume} must be non-negative and finite")));
    }
    if !(speed >= 0.0 && speed.is_finite()) {
        return Err(Error::Domain(format!("wind speed {speed} must be non-negative and finite")));
    }
    // Grouped so that scaling `speed` by a power of two scales the result
    // exactly by its square.
    Ok(((0.5 * rho) * volume) * speed * speed)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceEnergy {
    pub id: u32,
    pub class: ClassId,
    pub volume: f64,
    pub kinetic_energy: f64,
}

/// Kinetic energy at one wind speed on the geometry of a [`HeightGrid`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskMap {
    pub category: u8,
    pub speed: f64,
    pub origin: (f64, f64),
    pub cell_size: f64,
    pub cols: usize,
    pub rows: usize,
    /// Row-major joules, row 0 at the grid origin.
    pub cell_energy: Vec<f64>,
    pub cell_class: Vec<ClassId>,
    pub instances: Vec<InstanceEnergy>,
}

impl RiskMap {
    pub fn max_energy(&self) -> f64 {
        self.cell_energy.iter().copied().fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("risk maps serialize")
    }

    pub fn from_json(text: &str) -> Result<RiskMap> {
        let map: RiskMap = serde_json::from_str(text).map_err(|e| Error::Malformed {
            source_name: "risk map".into(),
            location: crate::error::Location::Line(e.line()),
            message: e.to_string(),
        })?;
        let n = map.cols.checked_mul(map.rows);
        if n != Some(map.cell_energy.len()) || map.cell_class.len() != map.cell_energy.len() {
            return Err(Error::Domain("risk map arrays do not match its shape".into()));
        }
        Ok(map)
    }
}

fn density(materials: &MaterialTable, classes: &ClassTable, class: ClassId) -> Result<f64> {
    materials.density(class).ok_or_else(|| Error::MissingDensity {
        class: classes.name(class).map_or_else(|| class.to_string(), str::to_owned),
    })
}

/// One map per wind category. Cell energy uses the cell's class density and
/// volume `GS² · Z`; instance energy uses the instance volume.
pub fn build_risk_maps(
    grid: &HeightGrid,
    instances: &[DebrisInstance],
    materials: &MaterialTable,
    classes: &ClassTable,
    scale: &WindScale,
) -> Result<Vec<RiskMap>> {
    // Densities per occupied cell and per instance, resolved up front so a
    // missing one fails before any map is built.
    let cell_rho: Vec<Option<f64>> = (0..grid.len())
        .map(|i| {
            if grid.is_occupied(i) {
                density(materials, classes, grid.class(i)).map(Some)
            } else {
                Ok(None)
            }
        })
        .collect::<Result<_>>()?;
    let inst_rho: Vec<f64> = instances
        .iter()
        .map(|inst| density(materials, classes, inst.class))
        .collect::<Result<_>>()?;
    let area = grid.cell_area();

    scale
        .categories()
        .par_iter()
        .map(|cat| {
            let cell_energy = cell_rho
                .iter()
                .enumerate()
                .map(|(i, rho)| match rho {
                    Some(rho) => kinetic_energy(*rho, area * grid.height(i), cat.speed),
                    None => Ok(0.0),
                })
                .collect::<Result<Vec<f64>>>()?;
            let instances = instances
                .iter()
                .zip(&inst_rho)
                .map(|(inst, &rho)| {
                    Ok(InstanceEnergy {
                        id: inst.id,
                        class: inst.class,
                        volume: inst.volume,
                        kinetic_energy: kinetic_energy(rho, inst.volume, cat.speed)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(RiskMap {
                category: cat.category,
                speed: cat.speed,
                origin: grid.origin(),
                cell_size: grid.cell_size(),
                cols: grid.cols(),
                rows: grid.rows(),
                cell_energy,
                cell_class: grid.classes().to_vec(),
                instances,
            })
        })
        .collect()
}

/// Per-instance entry of the risk summary.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InstanceRisk {
    pub id: u32,
    pub class: String,
    pub volume_m3: f64,
    pub centroid: (f64, f64),
    pub area_m2: f64,
    pub kinetic_energy_j: Vec<CategoryEnergy>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CategoryEnergy {
    pub category: u8,
    pub speed: f64,
    pub kinetic_energy_j: f64,
}

/// Collects each instance's energy across all maps.
pub fn instance_risks(instances: &[DebrisInstance], maps: &[RiskMap], classes: &ClassTable) -> Vec<InstanceRisk> {
    instances
        .iter()
        .enumerate()
        .map(|(k, inst)| InstanceRisk {
            id: inst.id,
            class: classes.name(inst.class).map_or_else(|| inst.class.to_string(), str::to_owned),
            volume_m3: inst.volume,
            centroid: inst.centroid,
            area_m2: inst.area,
            kinetic_energy_j: maps
                .iter()
                .map(|m| CategoryEnergy {
                    category: m.category,
                    speed: m.speed,
                    kinetic_energy_j: m.instances[k].kinetic_energy,
                })
                .collect(),
        })
        .collect()
}
