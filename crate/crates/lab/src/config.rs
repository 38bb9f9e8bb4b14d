//! JSON experiment configuration.

use std::path::Path;

use cavlab_core::bdata::{DatumSpec, Preset};
use cavlab_core::estimator::MeasureOptions;
use cavlab_core::geometry::{CavityShape, DomainSpec, Point};
use cavlab_core::mesh::MeshOptions;
use serde::{Deserialize, Serialize};

use crate::LabError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub domain: DomainConfig,
    pub cavity: Option<CavityConfig>,
    pub datum: DatumConfig,
    pub fem: FemConfig,
    pub experiment: ExperimentConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DomainConfig {
    pub side: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CavityKind {
    Circle,
    Ellipse,
    Polygon,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavityConfig {
    pub kind: CavityKind,
    #[serde(default)]
    pub center: Option<[f64; 2]>,
    #[serde(default)]
    pub radius: Option<f64>,
    /// Ellipse semi-axes.
    #[serde(default)]
    pub semi_axes: Option<[f64; 2]>,
    /// Ellipse rotation in radians.
    #[serde(default)]
    pub angle: Option<f64>,
    #[serde(default)]
    pub vertices: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatumConfig {
    pub preset: String,
    pub amplitude: f64,
    /// Replace the preset by the zero-net-force combination of the default family.
    pub balance: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FemConfig {
    pub h: f64,
    pub min_angle: f64,
    pub mu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub positions: Vec<[f64; 2]>,
    pub fractions: Vec<f64>,
    /// Multiples of `d0_unit`.
    pub d0_values: Vec<f64>,
    /// Defaults to 0.05·side.
    pub d0_unit: Option<f64>,
    pub sweep: SweepConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub r_min: f64,
    pub r_max: f64,
    pub steps: usize,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            domain: DomainConfig::default(),
            cavity: None,
            datum: DatumConfig::default(),
            fem: FemConfig::default(),
            experiment: ExperimentConfig::default(),
        }
    }
}

impl Default for DomainConfig {
    fn default() -> Self {
        DomainConfig { side: 1.0 }
    }
}

impl Default for DatumConfig {
    fn default() -> Self {
        DatumConfig {
            preset: Preset::TangentialTop.name().into(),
            amplitude: 1.0,
            balance: false,
        }
    }
}

impl Default for FemConfig {
    fn default() -> Self {
        FemConfig {
            h: 0.01,
            min_angle: 25.0,
            mu: 1.0,
        }
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let mut positions = Vec::new();
        for y in [0.25, 0.5, 0.75] {
            for x in [0.25, 0.5, 0.75] {
                if (x, y) != (0.5, 0.5) {
                    positions.push([x, y]);
                }
            }
        }
        ExperimentConfig {
            positions,
            fractions: vec![0.002, 0.031, 0.071],
            d0_values: vec![5.0, 3.0, 2.0, 1.0],
            d0_unit: None,
            sweep: SweepConfig::default(),
        }
    }
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            r_min: 0.05,
            r_max: 0.45,
            steps: 9,
        }
    }
}

fn bad(msg: impl Into<String>) -> LabError {
    LabError::Config(msg.into())
}

impl Config {
    pub fn from_json(text: &str) -> Result<Config, LabError> {
        let cfg: Config = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Config, LabError> {
        let text = std::fs::read_to_string(path).map_err(|e| bad(format!("{}: {e}", path.display())))?;
        Config::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), LabError> {
        let side = self.domain.side;
        if !(side > 0.0 && side.is_finite()) {
            return Err(bad(format!("domain.side must be positive, got {side}")));
        }
        let f = &self.fem;
        if !(f.h > 0.0 && f.h.is_finite()) {
            return Err(bad(format!("fem.h must be positive, got {}", f.h)));
        }
        if !(f.min_angle > 0.0 && f.min_angle <= 33.0) {
            return Err(bad(format!("fem.min_angle must lie in (0, 33], got {}", f.min_angle)));
        }
        if !(f.mu > 0.0 && f.mu.is_finite()) {
            return Err(bad(format!("fem.mu must be positive, got {}", f.mu)));
        }
        self.datum
            .preset
            .parse::<Preset>()
            .map_err(|e| bad(format!("datum.preset: {e}")))?;
        if !self.datum.amplitude.is_finite() || self.datum.amplitude == 0.0 {
            return Err(bad("datum.amplitude must be finite and nonzero"));
        }
        let e = &self.experiment;
        for fr in &e.fractions {
            if !(*fr > 0.0 && *fr < 1.0) {
                return Err(bad(format!("experiment.fractions must lie in (0, 1), got {fr}")));
            }
        }
        for p in &e.positions {
            if !(p[0] > 0.0 && p[0] < side && p[1] > 0.0 && p[1] < side) {
                return Err(bad(format!("experiment.positions: {p:?} is not inside the domain")));
            }
        }
        for d in &e.d0_values {
            if !(*d > 0.0 && d.is_finite()) {
                return Err(bad(format!("experiment.d0_values must be positive, got {d}")));
            }
        }
        if let Some(u) = e.d0_unit {
            if !(u > 0.0 && u.is_finite()) {
                return Err(bad(format!("experiment.d0_unit must be positive, got {u}")));
            }
        }
        let s = &e.sweep;
        if s.steps == 0 || !(s.r_min > 0.0) || s.r_max < s.r_min || (s.steps == 1 && s.r_max != s.r_min) {
            return Err(bad("experiment.sweep needs 0 < r_min <= r_max and steps >= 1 (steps = 1 only with r_min = r_max)"));
        }
        if let Some(c) = &self.cavity {
            c.shape()?;
        }
        Ok(())
    }

    pub fn domain_spec(&self) -> DomainSpec<f64> {
        DomainSpec::new(self.domain.side, Point::new(0.0, 0.0)).expect("validated side")
    }

    pub fn d0_unit(&self) -> f64 {
        self.experiment.d0_unit.unwrap_or(0.05 * self.domain.side)
    }

    pub fn cavity_shape(&self) -> Result<Option<CavityShape<f64>>, LabError> {
        self.cavity.as_ref().map(CavityConfig::shape).transpose()
    }

    pub fn datum_spec(&self) -> DatumSpec<f64> {
        let preset = self.datum.preset.parse().expect("validated preset");
        DatumSpec::preset(preset, self.datum.amplitude)
    }

    /// Measurement options, with `h` and `refine` overriding the file.
    pub fn measure_options(&self, h: Option<f64>, refine: u32) -> Result<MeasureOptions<f64>, LabError> {
        let h = h.unwrap_or(self.fem.h);
        if !(h > 0.0 && h.is_finite()) {
            return Err(bad(format!("--h must be positive, got {h}")));
        }
        Ok(MeasureOptions {
            mesh: MeshOptions::new(h).with_min_angle(self.fem.min_angle),
            mu: self.fem.mu,
            refine,
        })
    }

    /// Equally spaced sweep radii, smallest first.
    pub fn sweep_radii(&self) -> Vec<f64> {
        let s = &self.experiment.sweep;
        if s.steps == 1 {
            return vec![s.r_min];
        }
        (0..s.steps)
            .map(|k| s.r_min + (s.r_max - s.r_min) * k as f64 / (s.steps - 1) as f64)
            .collect()
    }
}

impl CavityConfig {
    pub fn shape(&self) -> Result<CavityShape<f64>, LabError> {
        let center = || {
            self.center
                .map(|c| Point::new(c[0], c[1]))
                .ok_or_else(|| bad("cavity.center is required"))
        };
        let shape = match self.kind {
            CavityKind::Circle => {
                let r = self.radius.ok_or_else(|| bad("cavity.radius is required for a circle"))?;
                CavityShape::circle(center()?, r)
            }
            CavityKind::Ellipse => {
                let [a, b] = self.semi_axes.ok_or_else(|| bad("cavity.semi_axes is required for an ellipse"))?;
                CavityShape::Ellipse {
                    center: center()?,
                    a,
                    b,
                    angle: self.angle.unwrap_or(0.0),
                }
            }
            CavityKind::Polygon => {
                let v = self.vertices.as_ref().ok_or_else(|| bad("cavity.vertices is required for a polygon"))?;
                CavityShape::Polygon {
                    vertices: v.iter().map(|p| Point::new(p[0], p[1])).collect(),
                }
            }
        };
        shape.check().map_err(|e| bad(format!("cavity: {e}")))?;
        Ok(shape)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_gives_defaults() {
        let c = Config::from_json("{}").unwrap();
        assert_eq!(c, Config::default());
        assert_eq!(c.experiment.positions.len(), 8);
        assert!((c.d0_unit() - 0.05).abs() < 1e-15);
    }

    #[test]
    fn unknown_keys_rejected() {
        for text in [
            r#"{"domian": {"side": 1}}"#,
            r#"{"domain": {"side": 1, "corner": [0, 0]}}"#,
            r#"{"experiment": {"sweep": {"r_min": 0.1, "r_max": 0.2, "steps": 2, "log": true}}}"#,
        ] {
            assert!(matches!(Config::from_json(text), Err(LabError::Config(_))), "{text}");
        }
    }

    #[test]
    fn full_schema_parses() {
        let c = Config::from_json(
            r#"{"domain": {"side": 2.0},
                "cavity": {"kind": "circle", "center": [1.0, 1.0], "radius": 0.2},
                "datum": {"preset": "inflow-outflow", "amplitude": 2.0, "balance": true},
                "fem": {"h": 0.05, "min_angle": 20, "mu": 1.5},
                "experiment": {"positions": [[0.5, 0.5]], "fractions": [0.01], "d0_values": [1],
                               "d0_unit": 0.1, "sweep": {"r_min": 0.1, "r_max": 0.3, "steps": 3}}}"#,
        )
        .unwrap();
        assert_eq!(c.sweep_radii().len(), 3);
        assert!((c.sweep_radii()[2] - 0.3).abs() < 1e-15);
        assert!(c.cavity_shape().unwrap().is_some());
        assert!(c.datum.balance);
    }

    #[test]
    fn invalid_values_rejected() {
        for text in [
            r#"{"domain": {"side": 0}}"#,
            r#"{"fem": {"h": -1}}"#,
            r#"{"fem": {"min_angle": 40}}"#,
            r#"{"datum": {"preset": "swirl"}}"#,
            r#"{"experiment": {"fractions": [1.5]}}"#,
            r#"{"experiment": {"positions": [[2, 0.5]]}}"#,
            r#"{"cavity": {"kind": "circle", "center": [0.5, 0.5]}}"#,
            r#"{"cavity": {"kind": "blob"}}"#,
        ] {
            assert!(matches!(Config::from_json(text), Err(LabError::Config(_))), "{text}");
        }
    }
}
