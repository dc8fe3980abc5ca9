//! JSON configurations for the `crp` subcommands.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::fixtures::Example67Variant;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("cannot parse {path}: {source}")]
    Parse { path: String, source: serde_json::Error },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

pub fn load<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.display().to_string(), source })?;
    serde_json::from_str(&text).map_err(|source| ConfigError::Parse { path: path.display().to_string(), source })
}

/// Deterministic drivers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DriverSpec {
    /// `(sin 2t, t² − t, cos 3t − 1)` on `[0, horizon]`.
    Curved { n: usize, horizon: f64 },
    /// `t·direction` on `[0, 1]`.
    Line { n: usize, direction: Vec<f64> },
    PureArea { n: usize, a: f64 },
    /// Smooth planar path plus a pure-area term, `p = 2`.
    Area { n: usize, a: f64 },
    PiecewiseLinear { times: Vec<f64>, values: Vec<Vec<f64>>, p: f64 },
    #[serde(rename = "example-6.7")]
    Example67 { p: f64, variant: Example67Variant },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LiftConfig {
    pub driver: DriverSpec,
}

/// Named controlled paths on `S²`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SpherePathSpec {
    SphereCurve { n: usize },
    PolarLoop { n: usize, theta: f64, tilt: f64 },
    Latitude { n: usize, theta: f64, horizon: f64 },
    GreatCircle { n: usize, tilt: f64, horizon: f64 },
    RolledArea { n: usize, a: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FormSpec {
    /// A generic `R`-valued one-form.
    Generic,
    /// An `R²`-valued one-form.
    Vector,
    /// `d m_3`.
    Height,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GaugeSpec {
    LeviCivita,
    Chart,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegrateConfig {
    pub path: SpherePathSpec,
    pub form: FormSpec,
    #[serde(default = "default_gauges")]
    pub gauges: Vec<GaugeSpec>,
}

fn default_gauges() -> Vec<GaugeSpec> {
    vec![GaugeSpec::LeviCivita, GaugeSpec::Chart]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ManifoldSpec {
    Sphere,
    So3,
    Plane,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldKind {
    /// `F_w(m) = P(m) w` on `S²`.
    Projection,
    /// `F_a(g) = g â` on `SO(3)`; `F_a(m) = m × a` on `S²`.
    LeftInvariant,
    /// `F_w(y) = Σ w_i A_i y` on the plane, `A_i` from `params.matrices`.
    Custom,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldParams {
    #[serde(default)]
    pub matrices: Vec<Vec<Vec<f64>>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    pub kind: FieldKind,
    #[serde(default)]
    pub params: FieldParams,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeSpec {
    #[serde(default)]
    pub retraction: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RdeConfig {
    pub manifold: ManifoldSpec,
    pub field: FieldSpec,
    pub driver: DriverSpec,
    pub y0: Vec<f64>,
    /// `[a, b]`; defaults to the driver's whole interval.
    #[serde(default)]
    pub horizon: Option<(f64, f64)>,
    #[serde(default)]
    pub scheme: SchemeSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransportConfig {
    pub path: SpherePathSpec,
    /// Initial fibre `g0 = R(angle)`.
    #[serde(default)]
    pub g0_angle: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixtureListConfig {
    #[serde(default)]
    pub fixtures: Vec<String>,
    #[serde(default)]
    pub p: Option<f64>,
    #[serde(default)]
    pub levels: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    /// Criterion ids or names; all criteria when absent.
    #[serde(default)]
    pub criteria: Option<Vec<String>>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub p: Option<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rde_config_round_trips() {
        let text = r#"{
            "manifold": "sphere",
            "field": {"kind": "projection", "params": {}},
            "driver": {"kind": "curved", "n": 64, "horizon": 1.0},
            "y0": [0.0, 0.6, 0.8],
            "horizon": [0.0, 1.0],
            "scheme": {"retraction": false}
        }"#;
        let c: RdeConfig = serde_json::from_str(text).unwrap();
        assert_eq!(c.field.kind, FieldKind::Projection);
        let again: RdeConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(serde_json::from_str::<SuiteConfig>(r#"{"criterion": ["c1"]}"#).is_err());
        assert!(serde_json::from_str::<LiftConfig>(r#"{"driver": {"kind": "spiral", "n": 4}}"#).is_err());
    }

    #[test]
    fn example_driver_names() {
        let d: DriverSpec = serde_json::from_str(r#"{"kind": "example-6.7", "p": 2.0, "variant": "literal"}"#).unwrap();
        assert_eq!(d, DriverSpec::Example67 { p: 2.0, variant: Example67Variant::Literal });
    }
}
