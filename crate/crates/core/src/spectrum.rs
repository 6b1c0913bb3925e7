//! Frequency-domain containers: real variance densities and complex transfer
//! functions on strictly increasing frequency grids, with their CSV forms.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Unit tag carried by a [`Spectrum`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Unit {
    #[serde(rename = "A^2/Hz")]
    AmpsSqPerHz,
    #[serde(rename = "C^2/Hz")]
    CoulombsSqPerHz,
    #[serde(rename = "V^2/Hz")]
    VoltsSqPerHz,
    #[serde(rename = "Pa^2/Hz")]
    PascalsSqPerHz,
}

impl Unit {
    pub fn as_str(self) -> &'static str {
        match self {
            Unit::AmpsSqPerHz => "A^2/Hz",
            Unit::CoulombsSqPerHz => "C^2/Hz",
            Unit::VoltsSqPerHz => "V^2/Hz",
            Unit::PascalsSqPerHz => "Pa^2/Hz",
        }
    }
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Unit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "A^2/Hz" | "A2/Hz" => Ok(Unit::AmpsSqPerHz),
            "C^2/Hz" | "C2/Hz" => Ok(Unit::CoulombsSqPerHz),
            "V^2/Hz" | "V2/Hz" => Ok(Unit::VoltsSqPerHz),
            "Pa^2/Hz" | "Pa2/Hz" => Ok(Unit::PascalsSqPerHz),
            other => Err(Error::Parse(format!("unknown unit `{other}`"))),
        }
    }
}

fn check_increasing(freqs: &[f64], allow_zero: bool) -> Result<()> {
    if freqs.is_empty() {
        return Err(Error::BadGrid);
    }
    let first_ok = if allow_zero {
        freqs[0] >= 0.0
    } else {
        freqs[0] > 0.0
    };
    if !first_ok || freqs.iter().any(|f| !f.is_finite()) {
        return Err(Error::BadGrid);
    }
    if freqs.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::BadGrid);
    }
    Ok(())
}

/// Validates a grid of strictly positive, strictly increasing frequencies.
pub fn check_grid(freqs: &[f64]) -> Result<()> {
    check_increasing(freqs, false)
}

/// Logarithmic grid from `f_min` to `f_max` inclusive with a fixed number of
/// points per decade. Both endpoints are present exactly.
pub fn log_grid(f_min: f64, f_max: f64, points_per_decade: usize) -> Result<Vec<f64>> {
    if !(f_min > 0.0 && f_max > f_min && f_max.is_finite()) {
        return Err(Error::EmptyBand { lo: f_min, hi: f_max });
    }
    if points_per_decade == 0 {
        return Err(Error::invalid("points_per_decade", "must be at least 1"));
    }
    let decades = (f_max / f_min).log10();
    let n = ((decades * points_per_decade as f64).round() as usize).max(1) + 1;
    log_space(f_min, f_max, n)
}

/// `n` logarithmically spaced points from `f_min` to `f_max` inclusive.
pub fn log_space(f_min: f64, f_max: f64, n: usize) -> Result<Vec<f64>> {
    if !(f_min > 0.0 && f_max >= f_min && f_max.is_finite()) {
        return Err(Error::EmptyBand { lo: f_min, hi: f_max });
    }
    match n {
        0 => Err(Error::BadGrid),
        1 => Ok(vec![f_min]),
        _ => {
            let (a, b) = (f_min.ln(), f_max.ln());
            let step = (b - a) / (n - 1) as f64;
            let mut out: Vec<f64> = (0..n).map(|i| (a + step * i as f64).exp()).collect();
            out[0] = f_min;
            out[n - 1] = f_max;
            check_grid(&out)?;
            Ok(out)
        }
    }
}

/// Index `i` such that `freqs[i] <= f <= freqs[i + 1]`.
fn bracket(freqs: &[f64], f: f64) -> Option<usize> {
    let n = freqs.len();
    if n < 2 || f < freqs[0] || f > freqs[n - 1] {
        return None;
    }
    let i = freqs.partition_point(|&x| x <= f);
    Some(i.clamp(1, n - 1) - 1)
}

/// Interpolates `values` at `f`, linear in value against log-frequency.
pub fn interp_log_freq(freqs: &[f64], values: &[f64], f: f64) -> Option<f64> {
    if freqs.len() == 1 {
        return (f == freqs[0]).then_some(values[0]);
    }
    let i = bracket(freqs, f)?;
    let (f0, f1) = (freqs[i], freqs[i + 1]);
    let t = if f0 > 0.0 {
        (f / f0).ln() / (f1 / f0).ln()
    } else {
        (f - f0) / (f1 - f0)
    };
    Some(values[i] + t * (values[i + 1] - values[i]))
}

/// Interpolates strictly positive `values` at `f` as a power law between
/// neighbouring points (linear in log-value against log-frequency).
pub fn interp_log_log(freqs: &[f64], values: &[f64], f: f64) -> Option<f64> {
    if freqs.len() == 1 {
        return (f == freqs[0]).then_some(values[0]);
    }
    let i = bracket(freqs, f)?;
    let (f0, f1, v0, v1) = (freqs[i], freqs[i + 1], values[i], values[i + 1]);
    if f0 <= 0.0 || v0 <= 0.0 || v1 <= 0.0 {
        let t = (f - f0) / (f1 - f0);
        return Some(v0 + t * (v1 - v0));
    }
    let t = (f / f0).ln() / (f1 / f0).ln();
    Some(v0 * (v1 / v0).powf(t))
}

/// Real-valued spectrum (variance density) on a frequency grid.
///
/// The grid may start at 0 Hz so that periodogram output keeps its DC bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    freqs: Vec<f64>,
    values: Vec<f64>,
    unit: Unit,
}

impl Spectrum {
    pub fn new(freqs: Vec<f64>, values: Vec<f64>, unit: Unit) -> Result<Self> {
        check_increasing(&freqs, true)?;
        if freqs.len() != values.len() {
            return Err(Error::invalid("values", "length differs from frequency grid"));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::invalid("values", "densities must be finite and >= 0"));
        }
        Ok(Self { freqs, values, unit })
    }

    pub fn freqs(&self) -> &[f64] {
        &self.freqs
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn unit(&self) -> Unit {
        self.unit
    }

    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    pub fn expect_unit(&self, unit: Unit) -> Result<()> {
        if self.unit == unit {
            Ok(())
        } else {
            Err(Error::UnitMismatch {
                expected: unit.to_string(),
                got: self.unit.to_string(),
            })
        }
    }

    /// Density at `f` by power-law interpolation.
    pub fn at(&self, f: f64) -> Option<f64> {
        interp_log_log(&self.freqs, &self.values, f)
    }

    /// Replaces the values inside `f ± half_width` for every listed
    /// frequency by a straight line between the nearest bins outside the
    /// window. Intended for mains spurs (60/180/300 Hz).
    pub fn with_exclusions(&self, centers: &[f64], half_width: f64) -> Spectrum {
        let mut values = self.values.clone();
        let n = self.freqs.len();
        for &fc in centers {
            let lo = fc - half_width;
            let hi = fc + half_width;
            let start = self.freqs.partition_point(|&f| f < lo);
            let end = self.freqs.partition_point(|&f| f <= hi);
            if start >= end {
                continue;
            }
            let left = start.checked_sub(1);
            let right = (end < n).then_some(end);
            for k in start..end {
                values[k] = match (left, right) {
                    (Some(l), Some(r)) => {
                        let t = (self.freqs[k] - self.freqs[l]) / (self.freqs[r] - self.freqs[l]);
                        values[l] + t * (values[r] - values[l])
                    }
                    (Some(l), None) => values[l],
                    (None, Some(r)) => values[r],
                    (None, None) => 0.0,
                };
            }
        }
        Spectrum {
            freqs: self.freqs.clone(),
            values,
            unit: self.unit,
        }
    }

    /// Writes `freq_hz,density,unit`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["freq_hz", "density", "unit"])?;
        for (f, v) in self.freqs.iter().zip(&self.values) {
            wtr.write_record([format!("{f:e}"), format!("{v:e}"), self.unit.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        expect_headers(&mut rdr, &["freq_hz", "density", "unit"])?;
        let mut freqs = Vec::new();
        let mut values = Vec::new();
        let mut unit = None;
        for rec in rdr.records() {
            let rec = rec?;
            freqs.push(parse_field(&rec, 0)?);
            values.push(parse_field(&rec, 1)?);
            let u: Unit = rec.get(2).unwrap_or("").parse()?;
            match unit {
                None => unit = Some(u),
                Some(prev) if prev != u => {
                    return Err(Error::Parse("mixed units in one spectrum".into()))
                }
                _ => {}
            }
        }
        let unit = unit.ok_or_else(|| Error::Parse("empty spectrum".into()))?;
        Spectrum::new(freqs, values, unit)
    }
}

/// Complex transfer function on a strictly positive frequency grid (V/C for
/// the charge amplifier).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferFunction {
    freqs: Vec<f64>,
    values: Vec<Complex64>,
}

impl TransferFunction {
    pub fn new(freqs: Vec<f64>, values: Vec<Complex64>) -> Result<Self> {
        check_grid(&freqs)?;
        if freqs.len() != values.len() {
            return Err(Error::invalid("values", "length differs from frequency grid"));
        }
        Ok(Self { freqs, values })
    }

    pub fn freqs(&self) -> &[f64] {
        &self.freqs
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm()).collect()
    }

    /// Writes `freq_hz,mag_v_per_c,phase_deg`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["freq_hz", "mag_v_per_c", "phase_deg"])?;
        for (f, v) in self.freqs.iter().zip(&self.values) {
            wtr.write_record([
                format!("{f:e}"),
                format!("{:e}", v.norm()),
                format!("{:e}", v.arg().to_degrees()),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        expect_headers(&mut rdr, &["freq_hz", "mag_v_per_c", "phase_deg"])?;
        let mut freqs = Vec::new();
        let mut values = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            freqs.push(parse_field(&rec, 0)?);
            let mag = parse_field(&rec, 1)?;
            let phase = parse_field(&rec, 2)?.to_radians();
            values.push(Complex64::from_polar(mag, phase));
        }
        TransferFunction::new(freqs, values)
    }
}

pub(crate) fn expect_headers<R: Read>(rdr: &mut csv::Reader<R>, want: &[&str]) -> Result<()> {
    let headers = rdr.headers()?;
    let got: Vec<&str> = headers.iter().collect();
    if got != want {
        return Err(Error::Parse(format!(
            "expected header `{}`, found `{}`",
            want.join(","),
            got.join(",")
        )));
    }
    Ok(())
}

pub(crate) fn parse_field(rec: &csv::StringRecord, idx: usize) -> Result<f64> {
    let raw = rec
        .get(idx)
        .ok_or_else(|| Error::Parse(format!("missing column {idx} in record {rec:?}")))?;
    raw.parse::<f64>()
        .map_err(|e| Error::Parse(format!("bad number `{raw}`: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_grid_counts_and_endpoints() {
        let g = log_grid(10.0, 100_000.0, 200).unwrap();
        assert_eq!(g.len(), 801);
        assert_eq!(g[0], 10.0);
        assert_eq!(*g.last().unwrap(), 100_000.0);
        check_grid(&g).unwrap();
    }

    #[test]
    fn grid_validation() {
        assert!(check_grid(&[]).is_err());
        assert!(check_grid(&[0.0, 1.0]).is_err());
        assert!(check_grid(&[1.0, 1.0]).is_err());
        assert!(check_grid(&[2.0, 1.0]).is_err());
        assert!(Spectrum::new(vec![0.0, 1.0], vec![0.0, 1.0], Unit::VoltsSqPerHz).is_ok());
        assert!(Spectrum::new(vec![1.0, 2.0], vec![-1.0, 1.0], Unit::VoltsSqPerHz).is_err());
    }

    #[test]
    fn power_law_interpolation_is_exact() {
        let freqs = [10.0, 1000.0];
        let vals = [1.0 / 100.0, 1.0 / 1_000_000.0];
        let v = interp_log_log(&freqs, &vals, 100.0).unwrap();
        assert!((v - 1e-4).abs() < 1e-16);
        assert!(interp_log_log(&freqs, &vals, 5.0).is_none());
    }

    #[test]
    fn exclusions_bridge_spurs() {
        let freqs: Vec<f64> = (0..10).map(|i| 50.0 + 5.0 * i as f64).collect();
        let mut vals = vec![1.0; 10];
        vals[2] = 100.0;
        let s = Spectrum::new(freqs, vals, Unit::VoltsSqPerHz).unwrap();
        let cleaned = s.with_exclusions(&[60.0], 1.0);
        assert_eq!(cleaned.values()[2], 1.0);
    }

    #[test]
    fn csv_round_trip() {
        let tf = TransferFunction::new(
            vec![1.0, 10.0],
            vec![Complex64::new(1.0, 1.0), Complex64::new(-2.0, 0.5)],
        )
        .unwrap();
        let mut buf = Vec::new();
        tf.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("freq_hz,mag_v_per_c,phase_deg\n"));
        let back = TransferFunction::read_csv(buf.as_slice()).unwrap();
        for (a, b) in tf.values().iter().zip(back.values()) {
            assert!((a - b).norm() < 1e-12);
        }

        let s = Spectrum::new(vec![1.0, 2.0], vec![3.0, 4.0], Unit::CoulombsSqPerHz).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("freq_hz,density,unit\n"));
        assert_eq!(Spectrum::read_csv(buf.as_slice()).unwrap(), s);
    }
}
