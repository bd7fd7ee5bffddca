//! Label taxonomy, material densities and the wind scale.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index into a [`ClassTable`]. Index 0 is always background.
#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct ClassId(pub u8);

impl ClassId {
    pub const BACKGROUND: ClassId = ClassId(0);

    pub fn is_background(self) -> bool {
        self.0 == 0
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for ClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Debris classes recognised on construction jobsites, after background.
pub const DEFAULT_CLASSES: [&str; 6] = [
    "background",
    "metal_girder",
    "portable_toilet",
    "pvc_piping",
    "plywood",
    "metal_piping",
];

/// Ordered class names; position is the class index used in masks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClassTable {
    names: Vec<String>,
}

impl ClassTable {
    /// Masks are 8-bit, so at most 256 classes fit.
    pub const MAX_CLASSES: usize = 256;

    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Self> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.len() < 2 {
            return Err(Error::config(
                "classes",
                "class table needs background plus at least one debris class",
            ));
        }
        if names.len() > Self::MAX_CLASSES {
            return Err(Error::config(
                "classes",
                format!("at most {} classes are supported", Self::MAX_CLASSES),
            ));
        }
        for (i, name) in names.iter().enumerate() {
            if name.is_empty() || name.chars().any(char::is_whitespace) {
                return Err(Error::config(
                    "classes",
                    format!("class name {name:?} must be non-empty without whitespace"),
                ));
            }
            if names[..i].contains(name) {
                return Err(Error::config(
                    "classes",
                    format!("class name {name:?} is listed twice"),
                ));
            }
        }
        Ok(ClassTable { names })
    }

    pub fn debris_default() -> Self {
        ClassTable {
            names: DEFAULT_CLASSES.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn contains(&self, class: ClassId) -> bool {
        class.index() < self.names.len()
    }

    pub fn name(&self, class: ClassId) -> Option<&str> {
        self.names.get(class.index()).map(String::as_str)
    }

    pub fn id_of(&self, name: &str) -> Option<ClassId> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| ClassId(i as u8))
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn ids(&self) -> impl Iterator<Item = ClassId> + '_ {
        (0..self.names.len()).map(|i| ClassId(i as u8))
    }
}

/// Display colour of a class in labelled point clouds.
pub fn class_color(class: ClassId) -> [u8; 3] {
    const PALETTE: [[u8; 3]; 10] = [
        [160, 160, 160],
        [228, 26, 28],
        [55, 126, 184],
        [77, 175, 74],
        [255, 127, 0],
        [152, 78, 163],
        [255, 255, 51],
        [166, 86, 40],
        [247, 129, 191],
        [0, 206, 209],
    ];
    PALETTE[class.index() % PALETTE.len()]
}

/// Debris density in kg/m³ per class. Background never has an entry.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MaterialTable {
    densities: BTreeMap<ClassId, f64>,
}

impl MaterialTable {
    pub fn new(entries: impl IntoIterator<Item = (ClassId, f64)>) -> Result<Self> {
        let mut densities = BTreeMap::new();
        for (class, rho) in entries {
            if class.is_background() {
                return Err(Error::config(
                    "densities",
                    "background class must not have a density",
                ));
            }
            if !(rho.is_finite() && rho > 0.0) {
                return Err(Error::config(
                    "densities",
                    format!("density for class {class} must be positive, got {rho}"),
                ));
            }
            densities.insert(class, rho);
        }
        Ok(MaterialTable { densities })
    }

    /// Placeholder engineering densities for the default debris classes,
    /// matched by class name. Classes with unknown names get no entry.
    pub fn defaults_for(classes: &ClassTable) -> Self {
        let lookup = |name: &str| match name {
            "plywood" => Some(600.0),
            "pvc_piping" => Some(1400.0),
            "metal_girder" | "metal_piping" => Some(7850.0),
            // Effective density of a mostly hollow unit.
            "portable_toilet" => Some(150.0),
            _ => None,
        };
        let densities = classes
            .ids()
            .skip(1)
            .filter_map(|id| lookup(classes.name(id)?).map(|rho| (id, rho)))
            .collect();
        MaterialTable { densities }
    }

    pub fn density(&self, class: ClassId) -> Option<f64> {
        self.densities.get(&class).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ClassId, f64)> + '_ {
        self.densities.iter().map(|(&c, &rho)| (c, rho))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindCategory {
    pub category: u8,
    /// Representative sustained wind speed, m/s.
    pub speed: f64,
}

/// Wind categories ordered by strictly increasing speed.
#[derive(Clone, Debug, PartialEq)]
pub struct WindScale {
    categories: Vec<WindCategory>,
}

impl WindScale {
    pub fn new(categories: Vec<WindCategory>) -> Result<Self> {
        if categories.is_empty() {
            return Err(Error::config("wind", "wind scale needs at least one category"));
        }
        for (i, c) in categories.iter().enumerate() {
            if !(c.speed.is_finite() && c.speed >= 0.0) {
                return Err(Error::config(
                    "wind",
                    format!("category {} speed must be finite and non-negative", c.category),
                ));
            }
            if i > 0 {
                let prev = categories[i - 1];
                if c.speed <= prev.speed {
                    return Err(Error::config(
                        "wind",
                        "wind speeds must increase strictly with category",
                    ));
                }
                if c.category <= prev.category {
                    return Err(Error::config("wind", "category ids must increase"));
                }
            }
        }
        Ok(WindScale { categories })
    }

    /// Builds categories 1..=n from an ordered speed list.
    pub fn from_speeds(speeds: &[f64]) -> Result<Self> {
        if speeds.len() > u8::MAX as usize {
            return Err(Error::config("wind", "too many wind categories"));
        }
        Self::new(
            speeds
                .iter()
                .enumerate()
                .map(|(i, &speed)| WindCategory {
                    category: i as u8 + 1,
                    speed,
                })
                .collect(),
        )
    }

    /// Lower bounds of Saffir-Simpson categories 1-5 in m/s
    /// (74, 96, 111, 130 and 157 mph).
    pub fn saffir_simpson() -> Self {
        Self::from_speeds(&[33.0, 43.0, 50.0, 58.0, 70.0]).expect("static scale is valid")
    }

    pub fn categories(&self) -> &[WindCategory] {
        &self.categories
    }

    pub fn len(&self) -> usize {
        self.categories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.categories.is_empty()
    }
}
