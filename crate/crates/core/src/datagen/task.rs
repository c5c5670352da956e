//! Task descriptions: parameter ranges, mesh resolution, output fields and
//! the dominant parameter whose range partition defines the domain shift.

use super::{DataError, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamDescriptor {
    pub name: String,
    pub unit: String,
    pub min: f64,
    pub max: f64,
    #[serde(default)]
    pub dominant: bool,
}

/// Source/target boundaries over the dominant parameter, one per difficulty.
/// Hard moves the boundary toward the source side, enlarging the target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftBoundaries {
    pub easy: f64,
    pub medium: f64,
    pub hard: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Difficulty {
    Easy,
    Medium,
    Hard,
}

impl Difficulty {
    pub const ALL: [Difficulty; 3] = [Difficulty::Easy, Difficulty::Medium, Difficulty::Hard];

    pub fn as_str(&self) -> &'static str {
        match self {
            Difficulty::Easy => "easy",
            Difficulty::Medium => "medium",
            Difficulty::Hard => "hard",
        }
    }
}

impl std::str::FromStr for Difficulty {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "easy" => Ok(Difficulty::Easy),
            "medium" => Ok(Difficulty::Medium),
            "hard" => Ok(Difficulty::Hard),
            other => Err(format!("unknown difficulty '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub name: String,
    pub params: Vec<ParamDescriptor>,
    /// Plate: grid resolution per side. Rod: number of nodes.
    pub resolution: usize,
    pub field_names: Vec<String>,
    /// Field interpreted as a node displacement for the deformation metric.
    pub displacement_field: Option<String>,
    pub boundaries: ShiftBoundaries,
}

impl TaskSpec {
    /// Heat conduction on a notched unit square with a two-region
    /// conductivity field. The notch size is the dominant parameter.
    ///
    /// The temperature ranges are kept disjoint and narrow so per-sample
    /// field scales stay comparable across the corpus; the domain shift
    /// comes from geometry, not from output-scale drift.
    pub fn plate_heat() -> TaskSpec {
        TaskSpec {
            name: "plate-heat".into(),
            params: vec![
                ParamDescriptor { name: "t_left".into(), unit: "K".into(), min: 280.0, max: 300.0, dominant: false },
                ParamDescriptor { name: "t_right".into(), unit: "K".into(), min: 380.0, max: 400.0, dominant: false },
                ParamDescriptor { name: "conductivity_ratio".into(), unit: "-".into(), min: 0.5, max: 2.0, dominant: false },
                ParamDescriptor { name: "notch_size".into(), unit: "-".into(), min: 0.1, max: 0.5, dominant: true },
            ],
            resolution: 24,
            field_names: vec!["temperature".into(), "flux_x".into(), "flux_y".into()],
            displacement_field: None,
            // Source fractions mirror the reference shift ratios
            // (~86% / 75% / 64% of the dominant range).
            boundaries: ShiftBoundaries { easy: 0.44, medium: 0.40, hard: 0.36 },
        }
    }

    /// Cantilever beam with an end point load on a uniform 1D mesh. The
    /// thickness is the dominant parameter.
    pub fn rod_bending() -> TaskSpec {
        TaskSpec {
            name: "rod-bending".into(),
            params: vec![
                ParamDescriptor { name: "length".into(), unit: "m".into(), min: 0.9, max: 1.1, dominant: false },
                ParamDescriptor { name: "thickness".into(), unit: "m".into(), min: 0.02, max: 0.06, dominant: true },
                ParamDescriptor { name: "load".into(), unit: "N".into(), min: 90.0, max: 110.0, dominant: false },
                ParamDescriptor { name: "modulus".into(), unit: "Pa".into(), min: 1.8e9, max: 2.2e9, dominant: false },
            ],
            resolution: 200,
            field_names: vec!["deflection".into(), "stress".into()],
            displacement_field: Some("deflection".into()),
            boundaries: ShiftBoundaries { easy: 0.054, medium: 0.050, hard: 0.046 },
        }
    }

    pub fn by_name(name: &str) -> Result<TaskSpec> {
        match name {
            "plate-heat" => Ok(TaskSpec::plate_heat()),
            "rod-bending" => Ok(TaskSpec::rod_bending()),
            other => Err(DataError::InvalidTask(format!("unknown task '{other}'"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dominant = self.params.iter().filter(|p| p.dominant).count();
        if dominant != 1 {
            return Err(DataError::InvalidTask(format!(
                "exactly one dominant parameter required, found {dominant}"
            )));
        }
        for p in &self.params {
            if !(p.min < p.max) {
                return Err(DataError::InvalidTask(format!(
                    "parameter {} needs min < max, got [{}, {}]",
                    p.name, p.min, p.max
                )));
            }
        }
        if self.field_names.is_empty() {
            return Err(DataError::InvalidTask("no output fields".into()));
        }
        if let Some(d) = &self.displacement_field {
            if !self.field_names.contains(d) {
                return Err(DataError::InvalidTask(format!("displacement field '{d}' not among outputs")));
            }
        }
        let dom = self.dominant_param();
        let b = &self.boundaries;
        if !(dom.min < b.hard && b.hard < b.medium && b.medium < b.easy && b.easy < dom.max) {
            return Err(DataError::InvalidTask(format!(
                "boundaries must satisfy {} < hard < medium < easy < {} on '{}', got {:?}",
                dom.min, dom.max, dom.name, b
            )));
        }
        Ok(())
    }

    pub fn dominant_param(&self) -> &ParamDescriptor {
        self.params.iter().find(|p| p.dominant).expect("validated task has a dominant parameter")
    }

    pub fn dominant_index(&self) -> usize {
        self.params.iter().position(|p| p.dominant).expect("validated task has a dominant parameter")
    }

    pub fn boundary(&self, difficulty: Difficulty) -> f64 {
        match difficulty {
            Difficulty::Easy => self.boundaries.easy,
            Difficulty::Medium => self.boundaries.medium,
            Difficulty::Hard => self.boundaries.hard,
        }
    }

    pub fn param_index(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p.name == name)
    }

    /// Checks a raw parameter vector against the descriptor ranges.
    pub fn check_params(&self, params: &[f64]) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(DataError::InvalidTask(format!(
                "expected {} parameters, got {}",
                self.params.len(),
                params.len()
            )));
        }
        for (d, &v) in self.params.iter().zip(params) {
            if !v.is_finite() || v < d.min || v > d.max {
                return Err(DataError::ParamOutOfRange {
                    name: d.name.clone(),
                    value: v,
                    min: d.min,
                    max: d.max,
                });
            }
        }
        Ok(())
    }

    /// Scales a parameter vector to [0, 1] per coordinate by the descriptor
    /// ranges, the form consumed by the sinusoidal encoding.
    pub fn normalize_params(&self, params: &[f64]) -> Vec<f64> {
        self.params
            .iter()
            .zip(params)
            .map(|(d, &v)| (v - d.min) / (d.max - d.min))
            .collect()
    }

    /// Scale applied to node coordinates before sinusoidal encoding, so
    /// encoded positions live in [0, 1].
    pub fn coord_scale(&self) -> f64 {
        match self.name.as_str() {
            "rod-bending" => self.param_index("length").map(|i| self.params[i].max).unwrap_or(1.0),
            _ => 1.0,
        }
    }
}
