//! Input-referred noise budget of the sensor + charge amplifier.
//!
//! Five sources are modeled as independent: Johnson noise of both R_f and of
//! R_par, voltage and current noise of the input-stage op amps (oa1), and the
//! voltage noise of the difference-stage op amp (oa2). Each is referred to
//! the input as a current variance density (A²/Hz); dividing the sum by ω²
//! gives the charge variance density q̅²_in (C²/Hz).

use num_complex::Complex64;

use crate::circuit::{internal_gain, omega, overall_gain, AmplifierConfig, SensorModel};
use crate::error::{check_freq, Error, Result};
use crate::opamp::OpAmpModel;
use crate::quad;
use crate::spectrum::{check_grid, Spectrum, Unit};

/// Boltzmann constant, J/K.
pub const BOLTZMANN: f64 = 1.380_649e-23;
/// Relative tolerance of the ENC band integral.
pub const ENC_REL_TOL: f64 = 1e-6;
/// Elementary charge, C (for reporting ENC in electrons).
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;

/// Sensor with each oa1 input capacitance added between its input and AC
/// ground, i.e. in parallel with C_gnd.
pub fn with_opamp_input_capacitance(sensor: &SensorModel, oa1: &OpAmpModel) -> SensorModel {
    SensorModel {
        c_gnd: sensor.c_gnd + oa1.c_in,
        ..sensor.clone()
    }
}

/// Differential sensor admittance 1/R_par + jω(C_piezo + C_par + C_gnd/2).
pub fn y_diff(sensor: &SensorModel, f: f64) -> Result<Complex64> {
    let w = omega(check_freq(f)?);
    let c = sensor.c_piezo + sensor.c_par + 0.5 * sensor.c_gnd;
    Ok(Complex64::new(sensor.leakage_conductance(), w * c))
}

/// Differential sensor impedance R_par ∥ 1/(jω(C_piezo + C_par + C_gnd/2)).
/// Infinite when the sensor is absent.
pub fn z_diff(sensor: &SensorModel, f: f64) -> Result<Complex64> {
    let y = y_diff(sensor, f)?;
    if y == Complex64::new(0.0, 0.0) {
        return Ok(Complex64::new(f64::INFINITY, 0.0));
    }
    Ok(y.inv())
}

/// Feedback impedance R_f ∥ 1/(jωC_f).
pub fn z_f(cfg: &AmplifierConfig, f: f64) -> Result<Complex64> {
    let w = omega(check_freq(f)?);
    Ok(cfg.r_f / Complex64::new(1.0, w * cfg.r_f * cfg.c_f))
}

/// (2R_f) ∥ R_par as a conductance.
fn johnson_conductance(cfg: &AmplifierConfig, sensor: &SensorModel) -> f64 {
    1.0 / (2.0 * cfg.r_f) + sensor.leakage_conductance()
}

/// C_piezo + C_par + C_f/2 + C_gnd/2.
pub fn c_tot(cfg: &AmplifierConfig, sensor: &SensorModel) -> f64 {
    sensor.c_piezo + sensor.c_par + 0.5 * cfg.c_f + 0.5 * sensor.c_gnd
}

/// 4k_BT / ((2R_f) ∥ R_par), A²/Hz.
pub fn johnson_current_density(cfg: &AmplifierConfig, sensor: &SensorModel) -> f64 {
    4.0 * BOLTZMANN * cfg.temperature * johnson_conductance(cfg, sensor)
}

/// Input-referred current density of the two oa1 voltage-noise sources,
/// ω²·|(Z_diff + 2Z_f)/(G_int·Z_diff)|²·2v̅², A²/Hz.
pub fn oa1_voltage_noise_density(
    cfg: &AmplifierConfig,
    sensor: &SensorModel,
    oa1: &OpAmpModel,
    f: f64,
) -> Result<f64> {
    let w = omega(check_freq(f)?);
    // (Z_diff + 2Z_f)/Z_diff written with Y_diff so an absent sensor stays finite.
    let ratio = 1.0 + 2.0 * z_f(cfg, f)? * y_diff(sensor, f)?;
    let k = ratio / internal_gain(cfg, f)?;
    Ok(w * w * k.norm_sqr() * 2.0 * oa1.voltage_density(f))
}

/// Differential oa1 current noise (ι² + ω²q²)/2, A²/Hz.
pub fn oa1_current_noise_density(oa1: &OpAmpModel, f: f64) -> Result<f64> {
    Ok(0.5 * oa1.current_density(check_freq(f)?))
}

/// Difference-stage contribution v̅²_oa2(1/R_f² + ω²C_f²), A²/Hz.
pub fn oa2_noise_density(cfg: &AmplifierConfig, oa2: &OpAmpModel, f: f64) -> Result<f64> {
    let w = omega(check_freq(f)?);
    let v2 = oa2.voltage_density(f);
    Ok(v2 * (1.0 / (cfg.r_f * cfg.r_f) + w * w * cfg.c_f * cfg.c_f))
}

/// The four input-referred current densities at one frequency, A²/Hz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseTerms {
    pub freq: f64,
    pub johnson: f64,
    pub oa1_voltage: f64,
    pub oa1_current: f64,
    pub oa2_voltage: f64,
}

impl NoiseTerms {
    pub fn compute(
        cfg: &AmplifierConfig,
        sensor: &SensorModel,
        oa1: &OpAmpModel,
        oa2: &OpAmpModel,
        f: f64,
    ) -> Result<Self> {
        Ok(Self {
            freq: check_freq(f)?,
            johnson: johnson_current_density(cfg, sensor),
            oa1_voltage: oa1_voltage_noise_density(cfg, sensor, oa1, f)?,
            oa1_current: oa1_current_noise_density(oa1, f)?,
            oa2_voltage: oa2_noise_density(cfg, oa2, f)?,
        })
    }

    /// Total input current variance density, A²/Hz.
    pub fn total_current(&self) -> f64 {
        self.johnson + self.oa1_voltage + self.oa1_current + self.oa2_voltage
    }

    /// Total input charge variance density, C²/Hz.
    pub fn total_charge(&self) -> f64 {
        let w = omega(self.freq);
        self.total_current() / (w * w)
    }

    /// Terms as `(label, A²/Hz)` pairs, largest first.
    pub fn ranked(&self) -> Vec<(&'static str, f64)> {
        let mut v = vec![
            ("johnson", self.johnson),
            ("oa1_voltage", self.oa1_voltage),
            ("oa1_current", self.oa1_current),
            ("oa2_voltage", self.oa2_voltage),
        ];
        v.sort_by(|a, b| b.1.total_cmp(&a.1));
        v
    }
}

/// q̅²_in at `f`: the summed source densities divided by ω², C²/Hz.
pub fn input_charge_noise_density(
    cfg: &AmplifierConfig,
    sensor: &SensorModel,
    oa1: &OpAmpModel,
    oa2: &OpAmpModel,
    f: f64,
) -> Result<f64> {
    Ok(NoiseTerms::compute(cfg, sensor, oa1, oa2, f)?.total_charge())
}

/// q̅²_in at `f` from the collected form
/// 2v̅²C_tot² + q²/2 + v̅²_oa2C_f² + (4kT/R_eq + ι²/2 + 2v̅²/R_eq² + v̅²_oa2/R_f²)/ω²,
/// with R_eq = (2R_f) ∥ R_par.
pub fn collected_charge_density(
    cfg: &AmplifierConfig,
    sensor: &SensorModel,
    oa1: &OpAmpModel,
    oa2: &OpAmpModel,
    f: f64,
) -> Result<f64> {
    let w = omega(check_freq(f)?);
    let v1 = oa1.voltage_density(f);
    let v2 = oa2.voltage_density(f);
    let g_eq = johnson_conductance(cfg, sensor);
    let ct = c_tot(cfg, sensor);
    let white = 2.0 * v1 * ct * ct + 0.5 * oa1.q_slope * oa1.q_slope + v2 * cfg.c_f * cfg.c_f;
    let low = 4.0 * BOLTZMANN * cfg.temperature * g_eq
        + 0.5 * oa1.i_white * oa1.i_white
        + 2.0 * v1 * g_eq * g_eq
        + v2 / (cfg.r_f * cfg.r_f);
    Ok(white + low / (w * w))
}

/// Equivalent noise charge √(∫ q̅²_in df) over `[f_lo, f_hi]`, C.
pub fn enc_over_band(
    cfg: &AmplifierConfig,
    sensor: &SensorModel,
    oa1: &OpAmpModel,
    oa2: &OpAmpModel,
    f_lo: f64,
    f_hi: f64,
) -> Result<f64> {
    if !(f_lo > 0.0 && f_hi >= f_lo && f_hi.is_finite()) {
        return Err(Error::EmptyBand { lo: f_lo, hi: f_hi });
    }
    cfg.validate()?;
    sensor.validate()?;
    if f_hi == f_lo {
        return Ok(0.0);
    }
    let density = |f: f64| input_charge_noise_density(cfg, sensor, oa1, oa2, f).unwrap_or(f64::NAN);
    let variance = quad::integrate_log(density, f_lo, f_hi, ENC_REL_TOL)?;
    Ok(variance.max(0.0).sqrt())
}

/// q̅²_in tabulated on `freqs`, C²/Hz.
pub fn charge_noise_spectrum(
    cfg: &AmplifierConfig,
    sensor: &SensorModel,
    oa1: &OpAmpModel,
    oa2: &OpAmpModel,
    freqs: &[f64],
) -> Result<Spectrum> {
    check_grid(freqs)?;
    let values = freqs
        .iter()
        .map(|&f| input_charge_noise_density(cfg, sensor, oa1, oa2, f))
        .collect::<Result<Vec<_>>>()?;
    Spectrum::new(freqs.to_vec(), values, Unit::CoulombsSqPerHz)
}

/// Output voltage noise q̅²_in·|G_out|² tabulated on `freqs`, V²/Hz.
pub fn output_noise_spectrum(
    cfg: &AmplifierConfig,
    sensor: &SensorModel,
    oa1: &OpAmpModel,
    oa2: &OpAmpModel,
    freqs: &[f64],
) -> Result<Spectrum> {
    check_grid(freqs)?;
    let values = freqs
        .iter()
        .map(|&f| {
            let q2 = input_charge_noise_density(cfg, sensor, oa1, oa2, f)?;
            Ok(q2 * overall_gain(cfg, f)?.norm_sqr())
        })
        .collect::<Result<Vec<_>>>()?;
    Spectrum::new(freqs.to_vec(), values, Unit::VoltsSqPerHz)
}
