//! Small-signal transfer functions of the differential charge amplifier.
//!
//! Two matched inverting input stages (R_f ∥ C_f feedback) feed a unity-gain
//! difference stage, a lead stage (R_a, R_b, C_b) and an output R_o/C_o
//! high-pass. Op amps are ideal, so the model has no upper band edge.

use std::f64::consts::{PI, SQRT_2};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::acoustics::SensitivitySpectrum;
use crate::error::{check_freq, Error, Result};
use crate::opamp::{OpAmpModel, Registry};
use crate::spectrum::{check_grid, TransferFunction};

/// Bracket searched for the -3 dB cut-on, Hz.
pub const CUTON_SEARCH_BAND: (f64, f64) = (1.0, 20_000.0);
/// Relative frequency tolerance of the cut-on bisection.
pub const CUTON_REL_TOL: f64 = 1e-6;

#[inline]
pub(crate) fn omega(f: f64) -> f64 {
    2.0 * PI * f
}

/// Component values of the amplifier, SI units throughout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AmplifierConfig {
    pub r_f: f64,
    pub c_f: f64,
    pub r_a: f64,
    pub r_b: f64,
    pub c_b: f64,
    pub r_o: f64,
    pub c_o: f64,
    /// Input-stage op amp (one per input).
    pub oa1: String,
    /// Difference-stage op amp.
    pub oa2: String,
    /// Kelvin.
    pub temperature: f64,
}

impl Default for AmplifierConfig {
    fn default() -> Self {
        Self {
            r_f: 10e9,
            c_f: 1e-12,
            r_a: 90e3,
            r_b: 10e3,
            c_b: 100e-9,
            r_o: 100e3,
            c_o: 100e-9,
            oa1: "LTC6240".into(),
            oa2: "AD8617".into(),
            temperature: 293.0,
        }
    }
}

impl AmplifierConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = |name: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(name, format!("{v} must be finite and > 0")))
            }
        };
        pos("r_f", self.r_f)?;
        pos("c_f", self.c_f)?;
        pos("r_a", self.r_a)?;
        pos("r_b", self.r_b)?;
        pos("c_b", self.c_b)?;
        pos("r_o", self.r_o)?;
        pos("c_o", self.c_o)?;
        pos("temperature", self.temperature)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Looks both op amps up in `registry`.
    pub fn resolve<'r>(&self, registry: &'r Registry) -> Result<(&'r OpAmpModel, &'r OpAmpModel)> {
        Ok((registry.get(&self.oa1)?, registry.get(&self.oa2)?))
    }
}

mod infinite_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_none()
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

/// Piezoelectric sensor with its parasitics.
///
/// `r_par = f64::INFINITY` (JSON `null`) means no leakage path at all.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorModel {
    pub c_piezo: f64,
    pub c_par: f64,
    #[serde(with = "infinite_as_null")]
    pub r_par: f64,
    pub c_gnd: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sensitivity: Option<SensitivitySpectrum>,
}

impl Default for SensorModel {
    /// Estimated values for the differential PVDF cantilever.
    fn default() -> Self {
        Self {
            c_piezo: 10e-12,
            c_par: 1e-12,
            r_par: 1e12,
            c_gnd: 0.6e-15,
            sensitivity: None,
        }
    }
}

impl SensorModel {
    /// Nothing attached to the amplifier inputs.
    pub fn unloaded() -> Self {
        Self {
            c_piezo: 0.0,
            c_par: 0.0,
            r_par: f64::INFINITY,
            c_gnd: 0.0,
            sensitivity: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let nonneg = |name: &'static str, v: f64| {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(name, format!("{v} must be finite and >= 0")))
            }
        };
        nonneg("c_piezo", self.c_piezo)?;
        nonneg("c_par", self.c_par)?;
        nonneg("c_gnd", self.c_gnd)?;
        if !(self.r_par > 0.0) || self.r_par.is_nan() {
            return Err(Error::invalid("r_par", "must be > 0 (null for no leakage)"));
        }
        Ok(())
    }

    pub fn has_leakage(&self) -> bool {
        self.r_par.is_finite()
    }

    /// Leakage conductance 1/R_par, S.
    pub fn leakage_conductance(&self) -> f64 {
        if self.has_leakage() {
            1.0 / self.r_par
        } else {
            0.0
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: Self = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Input charge for a given open-circuit piezo voltage: q = C_piezo·v.
pub fn charge_from_voltage(sensor: &SensorModel, v_piezo: f64) -> f64 {
    sensor.c_piezo * v_piezo
}

/// Charge-to-voltage gain of the two input stages plus the difference stage,
/// 2jωR_f / (1 + jωR_fC_f).
pub fn internal_gain(cfg: &AmplifierConfig, f: f64) -> Result<Complex64> {
    let w = omega(check_freq(f)?);
    let jw = Complex64::new(0.0, w);
    Ok(2.0 * jw * cfg.r_f / (1.0 + jw * cfg.r_f * cfg.c_f))
}

/// Lead stage and output high-pass:
/// (1 + jω(R_a+R_b)C_b)·jωR_oC_o / [(1 + jωR_bC_b)(1 + jωR_oC_o)].
pub fn stage2_factor(cfg: &AmplifierConfig, f: f64) -> Result<Complex64> {
    let w = omega(check_freq(f)?);
    let jw = Complex64::new(0.0, w);
    let lead = (1.0 + jw * (cfg.r_a + cfg.r_b) * cfg.c_b) / (1.0 + jw * cfg.r_b * cfg.c_b);
    let hp = jw * cfg.r_o * cfg.c_o / (1.0 + jw * cfg.r_o * cfg.c_o);
    Ok(lead * hp)
}

/// Overall charge-to-voltage gain v_out/q_in, V/C.
pub fn overall_gain(cfg: &AmplifierConfig, f: f64) -> Result<Complex64> {
    Ok(internal_gain(cfg, f)? * stage2_factor(cfg, f)?)
}

/// High-frequency plateau of |G_out|: 2(R_a+R_b)/(R_b·C_f).
pub fn midband_gain(cfg: &AmplifierConfig) -> f64 {
    2.0 * (cfg.r_a + cfg.r_b) / (cfg.r_b * cfg.c_f)
}

/// Dominant-pole estimate of the cut-on, 1/(2πR_bC_b).
pub fn dominant_cuton_hz(cfg: &AmplifierConfig) -> f64 {
    1.0 / (2.0 * PI * cfg.r_b * cfg.c_b)
}

/// Lowest frequency in `[lo, hi]` where `mag(f)` rises through `target`.
///
/// A coarse log scan locates the first sign change, then bisection in
/// log-frequency narrows it to a relative width of `rel_tol`.
pub fn find_rising_crossing<F>(mut mag: F, target: f64, lo: f64, hi: f64, rel_tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    const SCAN: usize = 256;
    let ratio = (hi / lo).powf(1.0 / SCAN as f64);
    let mut a = lo;
    let mut below = mag(a)? < target;
    if !below {
        return Err(Error::NoCrossing { lo, hi });
    }
    let mut b = None;
    for k in 1..=SCAN {
        let f = if k == SCAN { hi } else { lo * ratio.powi(k as i32) };
        if mag(f)? >= target {
            b = Some(f);
            break;
        }
        a = f;
    }
    let mut b = b.ok_or(Error::NoCrossing { lo, hi })?;
    while b / a - 1.0 > rel_tol {
        let m = (a * b).sqrt();
        below = mag(m)? < target;
        if below {
            a = m;
        } else {
            b = m;
        }
    }
    Ok((a * b).sqrt())
}

/// Full-chain -3 dB cut-on frequency, Hz.
pub fn cuton_frequency(cfg: &AmplifierConfig) -> Result<f64> {
    cfg.validate()?;
    let target = midband_gain(cfg) / SQRT_2;
    let (lo, hi) = CUTON_SEARCH_BAND;
    find_rising_crossing(|f| Ok(overall_gain(cfg, f)?.norm()), target, lo, hi, CUTON_REL_TOL)
}

/// Tabulates [`overall_gain`] over `freqs`.
pub fn bode(cfg: &AmplifierConfig, freqs: &[f64]) -> Result<TransferFunction> {
    check_grid(freqs)?;
    let values = freqs
        .iter()
        .map(|&f| overall_gain(cfg, f))
        .collect::<Result<Vec<_>>>()?;
    TransferFunction::new(freqs.to_vec(), values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::log_grid;
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn charge_from_voltage_examples() {
        let s = SensorModel::default();
        assert!(rel(charge_from_voltage(&s, 1e-3), 10e-15) < 1e-12);
        assert_eq!(charge_from_voltage(&s, 0.0), 0.0);
        let s = SensorModel {
            c_piezo: 25e-12,
            ..SensorModel::default()
        };
        assert!(rel(charge_from_voltage(&s, 2e-3), 50e-15) < 1e-12);
    }

    #[test]
    fn internal_gain_examples() {
        let cfg = AmplifierConfig::default();
        let hi = internal_gain(&cfg, 1e9).unwrap().norm();
        assert!(rel(hi, 2e12) < 1e-6);
        assert!(internal_gain(&cfg, 1e-6).unwrap().norm() < 1e6);
        // 2ωR_f/√(1+(ωR_fC_f)²) at 100 Hz
        let g = internal_gain(&cfg, 100.0).unwrap();
        assert!(rel(g.norm(), 1.975e12) < 1e-3, "{}", g.norm());
        assert!((g.arg().to_degrees() - 9.04).abs() < 0.01, "{}", g.arg().to_degrees());
        assert!(matches!(internal_gain(&cfg, 0.0), Err(Error::NonPositiveFrequency(_))));
        assert!(internal_gain(&cfg, -1.0).is_err());
    }

    #[test]
    fn overall_gain_examples() {
        let cfg = AmplifierConfig::default();
        assert!(rel(overall_gain(&cfg, 5e3).unwrap().norm(), 2e13) < 1e-3);
        let (lo, lower) = (overall_gain(&cfg, 1e-3).unwrap().norm(), overall_gain(&cfg, 1e-4).unwrap().norm());
        assert!(lo < 1e-8 * 2e13);
        // Two zeros at the origin: |G| ∝ f² far below cut-on.
        assert!(rel(lo / lower, 100.0) < 1e-3);
        let at160 = overall_gain(&cfg, 160.0).unwrap().norm();
        let drop_db = 20.0 * (2e13 / at160).log10();
        assert!(drop_db > 0.0 && drop_db < 3.2, "{drop_db}");
        assert!(overall_gain(&cfg, 0.0).is_err());
        assert_eq!(midband_gain(&cfg), 2e13);
    }

    #[test]
    fn cuton_examples() {
        let cfg = AmplifierConfig::default();
        assert!(rel(dominant_cuton_hz(&cfg), 159.154_943) < 1e-6);
        let fc = cuton_frequency(&cfg).unwrap();
        assert!(fc > 159.15 && fc < 175.0, "{fc}");
        let g = overall_gain(&cfg, fc).unwrap().norm();
        assert!(rel(g, 2e13 / SQRT_2) < 1e-5);

        let doubled = AmplifierConfig {
            c_b: 200e-9,
            ..cfg.clone()
        };
        assert!(rel(dominant_cuton_hz(&doubled), 79.577_47) < 1e-6);

        let coincident = AmplifierConfig {
            c_o: 10e-9,
            ..cfg.clone()
        };
        assert_eq!(coincident.r_o * coincident.c_o, coincident.r_b * coincident.c_b);
        let fc2 = cuton_frequency(&coincident).unwrap();
        assert!(fc2 > 160.0 && fc2 > fc, "{fc2}");
    }

    #[test]
    fn cuton_fails_without_crossing() {
        // Cut-on pushed above the search bracket.
        let cfg = AmplifierConfig {
            c_b: 1e-12,
            c_o: 1e-12,
            ..AmplifierConfig::default()
        };
        assert!(matches!(cuton_frequency(&cfg), Err(Error::NoCrossing { .. })));
    }

    #[test]
    fn bode_examples() {
        let cfg = AmplifierConfig::default();
        let grid = log_grid(10.0, 1e5, 20).unwrap();
        let tf = bode(&cfg, &grid).unwrap();
        assert_eq!(tf.freqs(), grid.as_slice());
        let mags = tf.magnitudes();
        // Flat within 0.1 % above 5 kHz.
        for (f, m) in grid.iter().zip(&mags) {
            if *f >= 5e3 {
                assert!(rel(*m, 2e13) < 1e-3);
            }
        }
        // Rises steeply well below the cut-on: at least 20 dB/decade.
        assert!(mags[0] * 10.0 < mags[20]);

        let one = bode(&cfg, &[1000.0]).unwrap();
        assert_eq!(one.values()[0], overall_gain(&cfg, 1000.0).unwrap());

        // Measured hardware gain 19.1 V/pC is within 5 % of the model.
        assert!(rel(19.1e12, midband_gain(&cfg)) < 0.05);
        assert!(bode(&cfg, &[]).is_err());
    }

    #[test]
    fn gain_ignores_sensor_parasitics() {
        // overall_gain has no sensor argument at all; bode output is a pure
        // function of the amplifier config.
        let cfg = AmplifierConfig::default();
        let grid = log_grid(10.0, 1e5, 10).unwrap();
        assert_eq!(bode(&cfg, &grid).unwrap(), bode(&cfg.clone(), &grid).unwrap());
    }

    #[test]
    fn config_json_round_trip() {
        let cfg = AmplifierConfig::default();
        assert_eq!(AmplifierConfig::from_json(&cfg.to_json().unwrap()).unwrap(), cfg);
        let s = SensorModel::unloaded();
        let text = s.to_json().unwrap();
        assert!(text.contains("\"r_par\": null"));
        assert_eq!(SensorModel::from_json(&text).unwrap(), s);
        assert!(AmplifierConfig::from_json(r#"{"r_f": 1}"#).is_err());
        let mut bad = cfg.clone();
        bad.c_f = 0.0;
        assert!(bad.validate().is_err());
        let mut bad = SensorModel::default();
        bad.c_par = -1.0;
        assert!(bad.validate().is_err());
    }

    proptest! {
        #[test]
        fn internal_gain_monotone_and_bounded(f1 in 0.1f64..1e6, k in 1.0f64..100.0) {
            let cfg = AmplifierConfig::default();
            let a = internal_gain(&cfg, f1).unwrap().norm();
            let b = internal_gain(&cfg, f1 * k).unwrap().norm();
            prop_assert!(b >= a);
            prop_assert!(b <= 2.0 / cfg.c_f * (1.0 + 1e-12));
        }

        #[test]
        fn overall_over_internal_is_stage2(f in 0.1f64..1e6) {
            let cfg = AmplifierConfig::default();
            let ratio = overall_gain(&cfg, f).unwrap() / internal_gain(&cfg, f).unwrap();
            let s2 = stage2_factor(&cfg, f).unwrap();
            prop_assert!((ratio - s2).norm() <= 1e-12 * s2.norm());
        }
    }

    #[test]
    fn stage2_asymptote_is_ten() {
        let cfg = AmplifierConfig::default();
        let s = stage2_factor(&cfg, 1e8).unwrap().norm();
        assert!(rel(s, (cfg.r_a + cfg.r_b) / cfg.r_b) < 1e-6);
    }
}
