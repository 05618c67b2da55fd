//! Scenario configuration: JSON overlaid on per-scenario defaults.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use ymlab_core::compactification::CompactificationSpec;
use ymlab_core::transform::catalog;

use crate::{Result, ScenarioError};

pub const SCENARIOS: [&str; 8] = [
    "oscillation",
    "concentration",
    "counterexample",
    "area_strict",
    "reshetnyak",
    "characterisation",
    "inhomogenize_singular",
    "inhomogenize_ac",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub id: String,
    /// Coarse cells per axis; a power of two.
    pub resolution: usize,
    /// Quadrature atoms per cell and axis.
    pub sub: usize,
    /// Sequence indices.
    pub labels: Vec<usize>,
    /// `sphere` or `logsin`.
    pub spec: String,
    /// Catalog ids paired against the estimated limit.
    pub battery: Vec<String>,
    pub tol: f64,
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
    /// Refinement levels: mollifier exponents for the budget scenarios,
    /// scale exponents for the strict-convergence scenarios.
    pub levels: Vec<u32>,
    /// Cube exponent offset for the singular budget.
    pub inner_level: u32,
}

impl ScenarioConfig {
    pub fn default_for(id: &str) -> Result<Self> {
        let base = Self {
            id: id.to_string(),
            resolution: 128,
            sub: 8,
            labels: (64..=128).collect(),
            spec: "sphere".into(),
            battery: vec!["abs".into(), "area".into()],
            tol: 0.05,
            seed: 7,
            out_dir: None,
            levels: Vec::new(),
            inner_level: 8,
        };
        let cfg = match id {
            "oscillation" => Self { battery: vec!["abs".into(), "area".into(), "logsin".into()], ..base },
            "concentration" => {
                Self { resolution: 1 << 10, sub: 1, labels: (7..=10).map(|k| 1usize << k).collect(), ..base }
            }
            "counterexample" => Self { resolution: 256, labels: (2..=13).collect(), ..base },
            "area_strict" | "reshetnyak" => Self { resolution: 1 << 14, sub: 1, levels: (3..=8).collect(), ..base },
            "characterisation" => Self {
                resolution: 64,
                sub: 1,
                battery: ["abs", "area", "affine:0.5;2", "affine:-1;-3", "shift:1", "shift:-2"]
                    .map(String::from)
                    .to_vec(),
                tol: 1e-6,
                ..base
            },
            "inhomogenize_singular" => Self { levels: vec![4, 6, 8], ..base },
            "inhomogenize_ac" => Self { levels: (4..=11).collect(), ..base },
            other => return Err(ScenarioError::UnknownScenario(other.into())),
        };
        Ok(cfg)
    }

    /// Overlays the fields present in `json` on the defaults of its `id`
    /// (or of `id` when the JSON has none).
    pub fn from_json(json: &str, id: &str) -> Result<Self> {
        let overlay: Value = serde_json::from_str(json)?;
        let Value::Object(fields) = overlay else {
            return Err(ScenarioError::Config("expected a JSON object".into()));
        };
        let id = fields.get("id").and_then(Value::as_str).unwrap_or(id).to_string();
        let mut merged = serde_json::to_value(Self::default_for(&id)?)?;
        let target = merged.as_object_mut().expect("struct serializes to an object");
        for (k, v) in fields {
            target.insert(k, v);
        }
        let cfg: Self = serde_json::from_value(merged)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.resolution.is_power_of_two() {
            return Err(ScenarioError::Config(format!("resolution {} is not a power of two", self.resolution)));
        }
        if self.sub == 0 {
            return Err(ScenarioError::Config("sub must be positive".into()));
        }
        if self.labels.is_empty() {
            return Err(ScenarioError::Config("labels are empty".into()));
        }
        if !(self.tol > 0.0) {
            return Err(ScenarioError::Config(format!("tol {} must be positive", self.tol)));
        }
        Ok(())
    }

    pub fn compactification(&self, d: usize) -> Result<CompactificationSpec> {
        resolve_spec(&self.spec, d)
    }
}

pub fn resolve_spec(id: &str, d: usize) -> Result<CompactificationSpec> {
    match id {
        "sphere" => Ok(CompactificationSpec::sphere(d)),
        "logsin" => Ok(CompactificationSpec::new(d, 1.0, vec![catalog::logsin(d)?])?),
        other => Err(ScenarioError::Config(format!("unknown compactification '{other}'"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overlay_keeps_defaults() {
        let cfg = ScenarioConfig::from_json(r#"{"tol": 0.1, "labels": [3, 4]}"#, "oscillation").unwrap();
        assert_eq!(cfg.tol, 0.1);
        assert_eq!(cfg.labels, vec![3, 4]);
        assert_eq!(cfg.resolution, 128);
        assert_eq!(cfg.id, "oscillation");
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(ScenarioConfig::from_json(r#"{"resolution": 100}"#, "oscillation").is_err());
        assert!(ScenarioConfig::from_json(r#"{"typo": 1}"#, "oscillation").is_err());
        assert!(ScenarioConfig::from_json("[]", "oscillation").is_err());
        assert!(matches!(ScenarioConfig::default_for("nope"), Err(ScenarioError::UnknownScenario(_))));
        assert!(resolve_spec("torus", 1).is_err());
    }

    #[test]
    fn every_listed_scenario_has_defaults() {
        for id in SCENARIOS {
            ScenarioConfig::default_for(id).unwrap().validate().unwrap();
        }
    }
}
