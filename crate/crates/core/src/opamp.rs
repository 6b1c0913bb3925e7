//! Op-amp noise models and the name-keyed registry they are looked up in.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const BUILTIN_REGISTRY: &str = include_str!("../data/opamps.json");

/// Noise and power figures for one op amp.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpAmpModel {
    #[serde(default)]
    pub name: String,
    /// White input voltage noise, V/√Hz.
    pub v_white: f64,
    /// Optional 1/f corner of the voltage noise, Hz.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flicker_corner: Option<f64>,
    /// White input current noise ι, A/√Hz.
    #[serde(default)]
    pub i_white: f64,
    /// Coefficient q of the ω-proportional current noise, C/√Hz.
    #[serde(default)]
    pub q_slope: f64,
    /// Input capacitance per input, F.
    #[serde(default)]
    pub c_in: f64,
    /// Supply power, W.
    #[serde(default)]
    pub power: f64,
}

impl OpAmpModel {
    pub fn new(name: impl Into<String>, v_white: f64, i_white: f64) -> Self {
        Self {
            name: name.into(),
            v_white,
            flicker_corner: None,
            i_white,
            q_slope: 0.0,
            c_in: 0.0,
            power: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let nonneg = |name: &'static str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(name, format!("{v} must be finite and >= 0")))
            }
        };
        if !(self.v_white.is_finite() && self.v_white >= 0.0) {
            return Err(Error::invalid("v_white", "must be finite and >= 0"));
        }
        nonneg("i_white", self.i_white)?;
        nonneg("q_slope", self.q_slope)?;
        nonneg("c_in", self.c_in)?;
        nonneg("power", self.power)?;
        if let Some(fc) = self.flicker_corner {
            nonneg("flicker_corner", fc)?;
        }
        Ok(())
    }

    /// Voltage variance density v̅² at `f`, V²/Hz, including the optional
    /// (1 + f_c/f) flicker multiplier.
    pub fn voltage_density(&self, f: f64) -> f64 {
        let white = self.v_white * self.v_white;
        match self.flicker_corner {
            Some(fc) if fc > 0.0 => white * (1.0 + fc / f),
            _ => white,
        }
    }

    /// Current variance density ι² + ω²q² at `f`, A²/Hz.
    pub fn current_density(&self, f: f64) -> f64 {
        let w = 2.0 * PI * f;
        self.i_white * self.i_white + w * w * self.q_slope * self.q_slope
    }
}

/// Op amps keyed by part name.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Registry {
    parts: BTreeMap<String, OpAmpModel>,
}

impl Registry {
    /// LT1792, LTC6240, LTC6081, LTC6078 and AD8617.
    pub fn builtin() -> Self {
        Self::from_json(BUILTIN_REGISTRY).expect("builtin op-amp registry is valid")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: BTreeMap<String, OpAmpModel> = serde_json::from_str(text)?;
        let mut parts = BTreeMap::new();
        for (key, mut model) in raw {
            model.name = key.clone();
            model.validate()?;
            parts.insert(key, model);
        }
        Ok(Self { parts })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.parts)?)
    }

    pub fn get(&self, name: &str) -> Result<&OpAmpModel> {
        self.parts
            .get(name)
            .ok_or_else(|| Error::UnknownOpAmp(name.to_string()))
    }

    pub fn insert(&mut self, model: OpAmpModel) {
        self.parts.insert(model.name.clone(), model);
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.parts.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = &OpAmpModel> {
        self.parts.values()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_has_table_parts() {
        let reg = Registry::builtin();
        let names: Vec<_> = reg.names().collect();
        assert_eq!(names, ["AD8617", "LT1792", "LTC6078", "LTC6081", "LTC6240"]);
        let ltc = reg.get("LTC6240").unwrap();
        assert_eq!(ltc.v_white, 7e-9);
        assert_eq!(ltc.i_white, 0.56e-15);
        assert_eq!(ltc.c_in, 3.5e-12);
        assert_eq!(ltc.power, 6.7e-3);
        assert_eq!(reg.get("LTC6078").unwrap().power, 200e-6);
        assert_eq!(reg.get("AD8617").unwrap().v_white, 25e-9);
        assert!(reg.iter().all(|m| m.q_slope == 0.0 && m.flicker_corner.is_none()));
        assert!(matches!(reg.get("TL072"), Err(Error::UnknownOpAmp(_))));
    }

    #[test]
    fn current_density_structure() {
        let mut m = OpAmpModel::new("x", 1e-9, 0.0);
        m.q_slope = 1e-18;
        let r = m.current_density(2000.0) / m.current_density(1000.0);
        assert!((r - 4.0).abs() < 1e-12);
        m.i_white = 1e-15;
        m.q_slope = 0.0;
        assert_eq!(m.current_density(1.0), m.current_density(1e5));
    }

    #[test]
    fn flicker_multiplier() {
        let mut m = OpAmpModel::new("x", 10e-9, 0.0);
        assert!((m.voltage_density(10.0) - 1e-16).abs() < 1e-30);
        m.flicker_corner = Some(100.0);
        assert!((m.voltage_density(100.0) - 2e-16).abs() < 1e-30);
    }

    #[test]
    fn registry_json_round_trip() {
        let reg = Registry::builtin();
        let back = Registry::from_json(&reg.to_json().unwrap()).unwrap();
        assert_eq!(reg, back);
        assert!(Registry::from_json(r#"{"bad": {"v_white": -1.0}}"#).is_err());
    }
}
