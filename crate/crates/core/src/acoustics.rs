//! Acoustic figures: third-octave bands, A-weighting, equivalent input noise
//! in dB SPL, and outer-ear gain applied to a sensitivity curve.

use std::f64::consts::LN_2;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{check_freq, Error, Result};
use crate::spectrum::{check_grid, expect_headers, interp_log_freq, interp_log_log, parse_field, Spectrum, Unit};

/// Reference pressure for dB SPL, Pa RMS.
pub const P_REF: f64 = 20e-6;

/// Half a third-octave step, 2^(1/6).
fn half_step() -> f64 {
    2f64.powf(1.0 / 6.0)
}

/// Charge sensitivity (C/Pa) against frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSensitivity", into = "RawSensitivity")]
pub struct SensitivitySpectrum {
    freqs: Vec<f64>,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawSensitivity {
    freqs: Vec<f64>,
    values: Vec<f64>,
}

impl TryFrom<RawSensitivity> for SensitivitySpectrum {
    type Error = Error;

    fn try_from(r: RawSensitivity) -> Result<Self> {
        SensitivitySpectrum::new(r.freqs, r.values)
    }
}

impl From<SensitivitySpectrum> for RawSensitivity {
    fn from(s: SensitivitySpectrum) -> Self {
        RawSensitivity { freqs: s.freqs, values: s.values }
    }
}

impl SensitivitySpectrum {
    pub fn new(freqs: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        check_grid(&freqs)?;
        if freqs.len() != values.len() {
            return Err(Error::invalid("sensitivity", "length differs from frequency grid"));
        }
        if values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::invalid("sensitivity", "values must be finite and > 0"));
        }
        Ok(Self { freqs, values })
    }

    /// Same value at every grid frequency.
    pub fn flat(freqs: Vec<f64>, value: f64) -> Result<Self> {
        let values = vec![value; freqs.len()];
        Self::new(freqs, values)
    }

    pub fn freqs(&self) -> &[f64] {
        &self.freqs
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Sensitivity at `f`, interpolated as a power law.
    pub fn at(&self, f: f64) -> Result<f64> {
        interp_log_log(&self.freqs, &self.values, f).ok_or_else(|| self.coverage(f, f))
    }

    fn coverage(&self, lo: f64, hi: f64) -> Error {
        Error::Coverage {
            what: "sensitivity",
            lo,
            hi,
            have_lo: self.freqs[0],
            have_hi: self.freqs[self.freqs.len() - 1],
        }
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.freqs.clone(), self.values.iter().map(|v| v * factor).collect())
    }

    /// Writes `freq_hz,coulombs_per_pascal`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["freq_hz", "coulombs_per_pascal"])?;
        for (f, v) in self.freqs.iter().zip(&self.values) {
            wtr.write_record([format!("{f:e}"), format!("{v:e}")])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let (freqs, values) = read_two_columns(r, &["freq_hz", "coulombs_per_pascal"])?;
        Self::new(freqs, values)
    }
}

fn read_two_columns<R: Read>(r: R, header: &[&str]) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(r);
    expect_headers(&mut rdr, header)?;
    let mut a = Vec::new();
    let mut b = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        a.push(parse_field(&rec, 0)?);
        b.push(parse_field(&rec, 1)?);
    }
    Ok((a, b))
}

/// Free-field to ear-canal pressure gain, dB against frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PinnaGainTable {
    freqs: Vec<f64>,
    gain_db: Vec<f64>,
}

impl PinnaGainTable {
    pub fn new(freqs: Vec<f64>, gain_db: Vec<f64>) -> Result<Self> {
        check_grid(&freqs)?;
        if freqs.len() != gain_db.len() {
            return Err(Error::invalid("gain_db", "length differs from frequency grid"));
        }
        if gain_db.iter().any(|g| !g.is_finite()) {
            return Err(Error::invalid("gain_db", "values must be finite"));
        }
        Ok(Self { freqs, gain_db })
    }

    /// Constant gain over `[f_lo, f_hi]`.
    pub fn uniform(gain_db: f64, f_lo: f64, f_hi: f64) -> Result<Self> {
        Self::new(vec![f_lo, f_hi], vec![gain_db; 2])
    }

    /// Gain at `f`, linear in dB against log-frequency.
    pub fn gain_db_at(&self, f: f64) -> Result<f64> {
        interp_log_freq(&self.freqs, &self.gain_db, f).ok_or(Error::Coverage {
            what: "pinna gain table",
            lo: f,
            hi: f,
            have_lo: self.freqs[0],
            have_hi: self.freqs[self.freqs.len() - 1],
        })
    }

    pub fn freqs(&self) -> &[f64] {
        &self.freqs
    }

    pub fn gain_db(&self) -> &[f64] {
        &self.gain_db
    }

    /// Writes `freq_hz,gain_db`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["freq_hz", "gain_db"])?;
        for (f, g) in self.freqs.iter().zip(&self.gain_db) {
            wtr.write_record([format!("{f:e}"), format!("{g:e}")])?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Reads `freq_hz,gain_db`; lines starting with `#` are ignored.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let (freqs, gain) = read_two_columns(r, &["freq_hz", "gain_db"])?;
        Self::new(freqs, gain)
    }
}

/// One third-octave band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub center: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Band {
    /// Base-2 band `k` steps of 2^(1/3) from 1 kHz.
    pub fn third_octave(k: i32) -> Self {
        let center = 1000.0 * 2f64.powf(k as f64 / 3.0);
        let h = half_step();
        Band { center, lo: center / h, hi: center * h }
    }

    pub fn bandwidth(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Base-2 third-octave bands (1 kHz anchor) overlapping `(f_lo, f_hi)`.
pub fn third_octave_bands(f_lo: f64, f_hi: f64) -> Result<Vec<Band>> {
    if !(f_lo > 0.0 && f_hi > f_lo && f_hi.is_finite()) {
        return Err(Error::EmptyBand { lo: f_lo, hi: f_hi });
    }
    let k_lo = (3.0 * (f_lo / 1000.0).log2()).floor() as i32 - 1;
    let k_hi = (3.0 * (f_hi / 1000.0).log2()).ceil() as i32 + 1;
    Ok((k_lo..=k_hi)
        .map(Band::third_octave)
        .filter(|b| b.hi > f_lo && b.lo < f_hi)
        .collect())
}

/// ∫ density over [a, b] inside one grid segment, treating the density as
/// a power law between the segment's end points (linear if either is zero).
fn segment_integral(f0: f64, f1: f64, v0: f64, v1: f64, a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    if f0 <= 0.0 || v0 <= 0.0 || v1 <= 0.0 {
        let at = |f: f64| v0 + (v1 - v0) * (f - f0) / (f1 - f0);
        return 0.5 * (at(a) + at(b)) * (b - a);
    }
    let alpha = (v1 / v0).ln() / (f1 / f0).ln();
    let va = v0 * (a / f0).powf(alpha);
    let p = alpha + 1.0;
    let l = (b / a).ln();
    if (p * l).abs() < 1e-12 {
        va * a * l
    } else {
        va * a * (p * l).exp_m1() / p
    }
}

/// ∫ density df over `[lo, hi]`.
pub fn integrate_density(density: &Spectrum, lo: f64, hi: f64) -> Result<f64> {
    let f = density.freqs();
    let v = density.values();
    let n = f.len();
    if n < 2 || lo < f[0] || hi > f[n - 1] {
        return Err(Error::Coverage {
            what: "spectrum",
            lo,
            hi,
            have_lo: f[0],
            have_hi: f[n - 1],
        });
    }
    let start = f.partition_point(|&x| x <= lo).clamp(1, n - 1) - 1;
    let mut total = 0.0;
    for i in start..n - 1 {
        if f[i] >= hi {
            break;
        }
        total += segment_integral(f[i], f[i + 1], v[i], v[i + 1], lo.max(f[i]), hi.min(f[i + 1]));
    }
    Ok(total)
}

/// Per-band RMS √(∫ density df).
pub fn band_integrate(density: &Spectrum, bands: &[Band]) -> Result<Vec<f64>> {
    bands
        .iter()
        .map(|b| integrate_density(density, b.lo, b.hi).map(f64::sqrt))
        .collect()
}

fn a_response(f: f64) -> f64 {
    let f2 = f * f;
    let (p1, p2, p3, p4) = (20.6f64, 107.7f64, 737.9f64, 12194.0f64);
    p4 * p4 * f2 * f2
        / ((f2 + p1 * p1) * ((f2 + p2 * p2) * (f2 + p3 * p3)).sqrt() * (f2 + p4 * p4))
}

/// A-weighting in dB, normalised to exactly 0 dB at 1 kHz.
pub fn a_weight_db(f: f64) -> Result<f64> {
    check_freq(f)?;
    Ok(20.0 * (a_response(f) / a_response(1000.0)).log10())
}

/// EIN of one band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EinBand {
    pub center: f64,
    pub ein_db_spl: f64,
    pub a_weight_db: f64,
}

/// Per-band EIN: band RMS charge over the band-centre sensitivity, in dB
/// re 20 µPa.
pub fn ein_spectrum(noise: &Spectrum, sens: &SensitivitySpectrum, bands: &[Band]) -> Result<Vec<EinBand>> {
    noise.expect_unit(Unit::CoulombsSqPerHz)?;
    let rms = band_integrate(noise, bands)?;
    bands
        .iter()
        .zip(rms)
        .map(|(b, q)| {
            let s = sens.at(b.center)?;
            Ok(EinBand {
                center: b.center,
                ein_db_spl: 20.0 * (q / s / P_REF).log10(),
                a_weight_db: a_weight_db(b.center)?,
            })
        })
        .collect()
}

fn power_sum_db(levels: impl Iterator<Item = f64>) -> f64 {
    10.0 * levels.map(|l| 10f64.powf(l / 10.0)).sum::<f64>().log10()
}

/// A-weighted total 10·log10 Σ 10^((EIN + A)/10).
pub fn ein_aweighted_total(bands: &[EinBand]) -> Result<f64> {
    if bands.is_empty() {
        return Err(Error::invalid("ein_bands", "no bands"));
    }
    Ok(power_sum_db(bands.iter().map(|b| b.ein_db_spl + b.a_weight_db)))
}

/// Unweighted power sum of the bands.
pub fn ein_flat_total(bands: &[EinBand]) -> Result<f64> {
    if bands.is_empty() {
        return Err(Error::invalid("ein_bands", "no bands"));
    }
    Ok(power_sum_db(bands.iter().map(|b| b.ein_db_spl)))
}

/// Sensitivity referred to free-field pressure: sens × 10^(gain/20).
pub fn apply_pinna(sens: &SensitivitySpectrum, pinna: &PinnaGainTable) -> Result<SensitivitySpectrum> {
    let values = sens
        .freqs
        .iter()
        .zip(&sens.values)
        .map(|(&f, &s)| Ok(s * 10f64.powf(pinna.gain_db_at(f)? / 20.0)))
        .collect::<Result<Vec<_>>>()?;
    SensitivitySpectrum::new(sens.freqs.clone(), values)
}

/// Charge density (C²/Hz) produced by a pressure field whose level is
/// `spl_db` in every third-octave band, seen through `sens`. The field's
/// pressure density is P²/(f·ln 2^(1/3)), so each band integrates to P².
pub fn charge_density_for_flat_spl(spl_db: f64, sens: &SensitivitySpectrum) -> Result<Spectrum> {
    let p2 = (P_REF * 10f64.powf(spl_db / 20.0)).powi(2);
    let per_log = LN_2 / 3.0;
    let values = sens
        .freqs
        .iter()
        .zip(&sens.values)
        .map(|(&f, &s)| p2 / (f * per_log) * s * s)
        .collect();
    Spectrum::new(sens.freqs.clone(), values, Unit::CoulombsSqPerHz)
}

/// Writes `band_center_hz,ein_db_spl,a_weight_db`.
pub fn write_ein_csv<W: Write>(bands: &[EinBand], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["band_center_hz", "ein_db_spl", "a_weight_db"])?;
    for b in bands {
        wtr.write_record([
            format!("{:e}", b.center),
            format!("{:e}", b.ein_db_spl),
            format!("{:e}", b.a_weight_db),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::log_grid;

    #[test]
    fn band_layout() {
        let b = Band::third_octave(0);
        assert!((b.bandwidth() - 231.56).abs() < 0.01);
        assert!((b.bandwidth() / b.center - 0.23156).abs() < 1e-5);
        let one = third_octave_bands(891.0, 1122.0).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].center, 1000.0);
        let bands = third_octave_bands(100.0, 7000.0).unwrap();
        assert_eq!(bands.len(), 19);
        for w in bands.windows(2) {
            assert!((w[1].lo / w[0].hi - 1.0).abs() < 1e-12);
            assert!((w[1].center / w[0].center - 2f64.powf(1.0 / 3.0)).abs() < 1e-12);
        }
        assert!(third_octave_bands(10.0, 10.0).is_err());
    }

    #[test]
    fn integrate_white_and_inverse_square() {
        let grid = log_grid(10.0, 1e5, 20).unwrap();
        let white = Spectrum::new(grid.clone(), vec![3.0; grid.len()], Unit::VoltsSqPerHz).unwrap();
        let b = Band::third_octave(0);
        let rms = band_integrate(&white, &[b]).unwrap()[0];
        assert!((rms - (3.0 * b.bandwidth()).sqrt()).abs() < 1e-12);

        let d0 = 2.0;
        let (f1, f2) = (100.0, 1000.0);
        let v: Vec<f64> = grid.iter().map(|f| d0 * f1 * f2 / (f * f)).collect();
        let pink = Spectrum::new(grid.clone(), v, Unit::VoltsSqPerHz).unwrap();
        let got = band_integrate(&pink, &[b]).unwrap()[0];
        let exact = (d0 * f1 * f2 * (1.0 / b.lo - 1.0 / b.hi)).sqrt();
        assert!((got - exact).abs() / exact < 1e-12);

        let zero = Spectrum::new(grid.clone(), vec![0.0; grid.len()], Unit::VoltsSqPerHz).unwrap();
        assert_eq!(band_integrate(&zero, &[b]).unwrap()[0], 0.0);
        assert!(matches!(
            band_integrate(&white, &[Band::third_octave(30)]),
            Err(Error::Coverage { .. })
        ));
    }

    #[test]
    fn a_weighting_values() {
        assert!(a_weight_db(1000.0).unwrap().abs() < 1e-12);
        assert!((a_weight_db(100.0).unwrap() + 19.1).abs() < 0.2);
        assert!((a_weight_db(10_000.0).unwrap() + 2.5).abs() < 0.2);
        assert!(a_weight_db(0.0).is_err());
    }

    #[test]
    fn ein_reference_and_log_rule() {
        let grid = log_grid(50.0, 20_000.0, 50).unwrap();
        let sens = SensitivitySpectrum::flat(grid.clone(), 1e-12).unwrap();
        let b = Band::third_octave(0);
        // Density chosen so that the band RMS charge equals sens·20 µPa.
        let d = (1e-12 * P_REF).powi(2) / b.bandwidth();
        let noise = Spectrum::new(grid.clone(), vec![d; grid.len()], Unit::CoulombsSqPerHz).unwrap();
        let e = ein_spectrum(&noise, &sens, &[b]).unwrap();
        assert!(e[0].ein_db_spl.abs() < 1e-9);
        let half = ein_spectrum(&noise, &sens.scaled(0.5).unwrap(), &[b]).unwrap();
        assert!((half[0].ein_db_spl - 6.0206).abs() < 1e-3);
        let n = grid.len();
        let volts = Spectrum::new(grid, vec![d; n], Unit::VoltsSqPerHz).unwrap();
        assert!(matches!(ein_spectrum(&volts, &sens, &[b]), Err(Error::UnitMismatch { .. })));
    }

    #[test]
    fn totals() {
        let one = [EinBand { center: 1000.0, ein_db_spl: 12.0, a_weight_db: 0.0 }];
        assert!((ein_aweighted_total(&one).unwrap() - 12.0).abs() < 1e-12);
        let two = [one[0], EinBand { ein_db_spl: 12.0, ..one[0] }];
        assert!((ein_aweighted_total(&two).unwrap() - 15.0103).abs() < 1e-3);
        assert!(ein_aweighted_total(&[]).is_err());
    }

    #[test]
    fn flat_field_round_trip_and_pinna() {
        let grid = log_grid(50.0, 20_000.0, 40).unwrap();
        let sens = SensitivitySpectrum::new(grid.clone(), grid.iter().map(|f| 1e-13 * (f / 1e3).sqrt()).collect()).unwrap();
        let noise = charge_density_for_flat_spl(40.0, &sens).unwrap();
        let bands = third_octave_bands(100.0, 7000.0).unwrap();
        let ein = ein_spectrum(&noise, &sens, &bands).unwrap();
        for b in &ein {
            assert!((b.ein_db_spl - 40.0).abs() < 0.1, "{b:?}");
        }
        let pinna = PinnaGainTable::uniform(20.0, 10.0, 30_000.0).unwrap();
        let boosted = apply_pinna(&sens, &pinna).unwrap();
        let ein2 = ein_spectrum(&noise, &boosted, &bands).unwrap();
        let shift = ein_aweighted_total(&ein2).unwrap() - ein_aweighted_total(&ein).unwrap();
        assert!((shift + 20.0).abs() < 1e-9);
    }

    #[test]
    fn csv_round_trips() {
        let s = SensitivitySpectrum::new(vec![100.0, 1000.0], vec![1e-12, 2e-12]).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        assert_eq!(SensitivitySpectrum::read_csv(&buf[..]).unwrap(), s);
        let p = PinnaGainTable::read_csv("# sample\nfreq_hz,gain_db\n100,0\n3000,20\n".as_bytes()).unwrap();
        assert_eq!(p.gain_db(), &[0.0, 20.0]);
        assert!(SensitivitySpectrum::new(vec![100.0], vec![0.0]).is_err());
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(serde_json::from_str::<SensitivitySpectrum>(&json).unwrap(), s);
        assert!(serde_json::from_str::<SensitivitySpectrum>(r#"{"freqs":[1.0],"values":[-1.0]}"#).is_err());
    }
}
