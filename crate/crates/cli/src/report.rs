//! JSON documents written by the pipeline stages.

use debris_twin_core::classes::{ClassId, ClassTable};
use debris_twin_core::projection::SemanticCloud;
use debris_twin_core::risk::InstanceRisk;
use serde::Serialize;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassCount {
    pub class: String,
    pub index: u8,
    pub points: usize,
}

/// Agreement with reference labels for points of one reference class.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TruthClassScore {
    pub class: String,
    pub points: usize,
    pub correct: usize,
    /// Fused to a different non-background class.
    pub mislabeled: usize,
    /// Fused to background although the reference is debris.
    pub unlabeled: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TruthScore {
    pub mislabeled: usize,
    pub unlabeled: usize,
    pub per_class: Vec<TruthClassScore>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FuseSummary {
    pub points: usize,
    pub cameras: usize,
    pub downsample: u32,
    pub eps: f64,
    /// `"config"` or `"point_spacing"`.
    pub eps_source: &'static str,
    /// Points no camera saw.
    pub unsupported_points: usize,
    pub class_counts: Vec<ClassCount>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truth: Option<TruthScore>,
}

pub fn class_counts(cloud: &SemanticCloud, classes: &ClassTable) -> Vec<ClassCount> {
    cloud
        .class_histogram()
        .iter()
        .enumerate()
        .map(|(i, &points)| ClassCount {
            class: classes.name(ClassId(i as u8)).unwrap_or("?").to_owned(),
            index: i as u8,
            points,
        })
        .collect()
}

/// Scores fused labels against a reference labelling of the same points.
pub fn score_truth(cloud: &SemanticCloud, truth: &[ClassId], classes: &ClassTable) -> TruthScore {
    let mut per_class: Vec<TruthClassScore> = classes
        .names()
        .iter()
        .map(|name| TruthClassScore {
            class: name.clone(),
            points: 0,
            correct: 0,
            mislabeled: 0,
            unlabeled: 0,
        })
        .collect();
    for (i, &t) in truth.iter().enumerate() {
        let fused = cloud.fused_class(i);
        let row = &mut per_class[t.index()];
        row.points += 1;
        if fused == t {
            row.correct += 1;
        } else if fused.is_background() {
            row.unlabeled += 1;
        } else {
            row.mislabeled += 1;
        }
    }
    TruthScore {
        mislabeled: per_class.iter().map(|r| r.mislabeled).sum(),
        unlabeled: per_class.iter().map(|r| r.unlabeled).sum(),
        per_class,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Units {
    pub length: &'static str,
    pub volume: &'static str,
    pub energy: &'static str,
}

impl Units {
    pub fn for_scene(scaled: bool) -> Units {
        if scaled {
            Units {
                length: "m",
                volume: "m^3",
                energy: "J",
            }
        } else {
            Units {
                length: "model units",
                volume: "model units^3",
                energy: "J per (m/model unit)^3, relative only",
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GroundReport {
    pub normal: [f64; 3],
    pub offset: f64,
    pub inlier_fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridReport {
    pub origin: (f64, f64),
    pub cell_size: f64,
    pub cols: usize,
    pub rows: usize,
    pub occupied_cells: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CategoryReport {
    pub category: u8,
    pub speed: f64,
    pub max_cell_energy: f64,
    pub flagged_cells: usize,
    pub heatmap: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RiskSummary {
    pub scaled: bool,
    pub units: Units,
    pub ground: GroundReport,
    pub grid: GridReport,
    /// Volume over every grid cell.
    pub site_volume: f64,
    /// Volume over cells that belong to an instance.
    pub instance_volume: f64,
    pub threshold_j: Option<f64>,
    pub categories: Vec<CategoryReport>,
    pub instances: Vec<InstanceRisk>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StageTiming {
    pub stage: &'static str,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Timing {
    pub threads: usize,
    pub stages: Vec<StageTiming>,
    pub total_seconds: f64,
}
