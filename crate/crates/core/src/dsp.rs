//! Analysis of recorded waveforms and level sweeps.

use std::f64::consts::PI;
use std::io::{BufRead, BufReader, Read, Write};

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::acoustics::{band_integrate, Band};
use crate::error::{Error, Result};
use crate::spectrum::{expect_headers, parse_field, Spectrum, TransferFunction, Unit};

/// Uniformly sampled real record, volts.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub sample_rate: f64,
    pub samples: Vec<f64>,
    pub label: String,
}

impl TimeSeries {
    pub fn new(sample_rate: f64, samples: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return Err(Error::invalid("sample_rate", "must be > 0"));
        }
        if samples.len() < 2 {
            return Err(Error::TooShort(format!("{} samples", samples.len())));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::invalid("samples", "must be finite"));
        }
        Ok(Self { sample_rate, samples, label: label.into() })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }

    /// `# sample_rate_hz=<fs>` then one sample per line.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# sample_rate_hz={:e}", self.sample_rate)?;
        for s in &self.samples {
            writeln!(w, "{s:e}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R, label: impl Into<String>) -> Result<Self> {
        let mut lines = BufReader::new(r).lines();
        let first = lines
            .next()
            .transpose()?
            .ok_or_else(|| Error::Parse("empty time series".into()))?;
        let rate = first
            .trim()
            .strip_prefix('#')
            .and_then(|s| s.trim().strip_prefix("sample_rate_hz="))
            .ok_or_else(|| Error::Parse(format!("expected `# sample_rate_hz=<value>`, found `{first}`")))?;
        let sample_rate = rate
            .trim()
            .parse::<f64>()
            .map_err(|e| Error::Parse(format!("bad sample rate `{rate}`: {e}")))?;
        let mut samples = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            samples.push(
                t.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("line {}: bad sample `{t}`: {e}", i + 2)))?,
            );
        }
        Self::new(sample_rate, samples, label)
    }
}

/// Response level against stimulus level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSweep {
    pub stimulus_db_spl: Vec<f64>,
    pub response_rms_v: Vec<f64>,
}

impl LevelSweep {
    pub fn new(stimulus_db_spl: Vec<f64>, response_rms_v: Vec<f64>) -> Result<Self> {
        if stimulus_db_spl.len() != response_rms_v.len() {
            return Err(Error::invalid("response_rms_v", "length differs from stimulus list"));
        }
        if stimulus_db_spl.iter().any(|s| !s.is_finite()) || stimulus_db_spl.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("stimulus_db_spl", "must be finite and strictly increasing"));
        }
        if response_rms_v.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return Err(Error::invalid("response_rms_v", "must be finite and >= 0"));
        }
        Ok(Self { stimulus_db_spl, response_rms_v })
    }

    /// Writes `stimulus_db_spl,response_rms_v`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["stimulus_db_spl", "response_rms_v"])?;
        for (s, r) in self.stimulus_db_spl.iter().zip(&self.response_rms_v) {
            wtr.write_record([format!("{s:e}"), format!("{r:e}")])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        expect_headers(&mut rdr, &["stimulus_db_spl", "response_rms_v"])?;
        let mut s = Vec::new();
        let mut v = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            s.push(parse_field(&rec, 0)?);
            v.push(parse_field(&rec, 1)?);
        }
        Self::new(s, v)
    }
}

fn hann(n: usize) -> Vec<f64> {
    // Periodic form; sums to exactly n/2.
    (0..n).map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos()).collect()
}

/// Welch estimate of the one-sided power spectral density, V²/Hz.
///
/// Each segment has its mean removed and is Hann-windowed; the density is
/// scaled by 1/(f_s·Σw²) so integrating it over frequency returns the
/// variance of the record.
pub fn power_spectrum(ts: &TimeSeries, segment_length: usize, overlap: f64) -> Result<Spectrum> {
    if !(0.0..1.0).contains(&overlap) {
        return Err(Error::invalid("overlap", "must be in [0, 1)"));
    }
    if segment_length < 2 {
        return Err(Error::invalid("segment_length", "must be at least 2"));
    }
    if segment_length > ts.len() {
        return Err(Error::TooShort(format!(
            "segment of {segment_length} samples exceeds record of {}",
            ts.len()
        )));
    }
    let n = segment_length;
    let step = (n - (overlap * n as f64).round() as usize).max(1);
    let w = hann(n);
    let w2: f64 = w.iter().map(|x| x * x).sum();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n);
    let bins = n / 2 + 1;
    let mut acc = vec![0.0; bins];
    let mut count = 0usize;
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    let mut start = 0;
    while start + n <= ts.len() {
        let seg = &ts.samples[start..start + n];
        let mean = seg.iter().sum::<f64>() / n as f64;
        for (b, (x, wi)) in buf.iter_mut().zip(seg.iter().zip(&w)) {
            *b = Complex64::new((x - mean) * wi, 0.0);
        }
        fft.process(&mut buf);
        for (a, x) in acc.iter_mut().zip(&buf) {
            *a += x.norm_sqr();
        }
        count += 1;
        start += step;
    }
    let scale = 1.0 / (ts.sample_rate * w2 * count as f64);
    let values: Vec<f64> = acc
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let one_sided = if k == 0 || (n.is_multiple_of(2) && k == n / 2) { 1.0 } else { 2.0 };
            p * scale * one_sided
        })
        .collect();
    let df = ts.sample_rate / n as f64;
    let freqs = (0..bins).map(|k| k as f64 * df).collect();
    Spectrum::new(freqs, values, Unit::VoltsSqPerHz)
}

/// Band RMS of a density over third-octave bands.
pub fn smooth_third_octave(spec: &Spectrum, bands: &[Band]) -> Result<Vec<f64>> {
    band_integrate(spec, bands)
}

/// Default number of harmonics (fundamental included) used by [`thd`].
pub const THD_HARMONICS: usize = 5;

/// Total harmonic distortion √(Σ_{k=2..n} P_k / P_1).
///
/// Uses a single Hann-windowed periodogram of the whole record. Each
/// harmonic's peak is searched within ±1 bin of k·f0 and its power summed
/// over ±2 bins of that peak (the window's main lobe).
pub fn thd(ts: &TimeSeries, f0: f64, n_harmonics: usize) -> Result<f64> {
    if !(f0 > 0.0 && f0.is_finite()) {
        return Err(Error::invalid("f0", "must be > 0"));
    }
    if n_harmonics < 2 {
        return Err(Error::invalid("n_harmonics", "must be at least 2"));
    }
    let nyquist = ts.sample_rate / 2.0;
    let top = f0 * n_harmonics as f64;
    if top >= nyquist {
        return Err(Error::AboveNyquist { harmonic: n_harmonics, freq: top, nyquist });
    }
    if ts.duration() * f0 < 10.0 {
        return Err(Error::TooShort(format!("{:.2} cycles of {f0} Hz, need 10", ts.duration() * f0)));
    }
    let spec = power_spectrum(ts, ts.len(), 0.0)?;
    let v = spec.values();
    let df = spec.freqs()[1];
    let last = v.len() - 1;
    let harmonic_power = |k: usize| {
        let centre = (k as f64 * f0 / df).round() as usize;
        let (lo, hi) = (centre.saturating_sub(1), (centre + 1).min(last));
        let peak = (lo..=hi).max_by(|&a, &b| v[a].total_cmp(&v[b])).unwrap_or(centre);
        let sum: f64 = v[peak.saturating_sub(2)..=(peak + 2).min(last)].iter().sum();
        (peak, sum * df)
    };
    let (p1_bin, p1) = harmonic_power(1);
    let mut sorted = v.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    if !(v[p1_bin] > 10.0 * median && p1 > 0.0) {
        return Err(Error::FundamentalNotFound(f0));
    }
    let ph: f64 = (2..=n_harmonics).map(|k| harmonic_power(k).1).sum();
    Ok((ph / p1).sqrt())
}

/// Straight-line fit of response level (dB) against stimulus level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearityFit {
    pub slope_db_per_db: f64,
    pub intercept_db: f64,
    pub max_deviation_db: f64,
}

pub fn linearity_fit(sweep: &LevelSweep) -> Result<LinearityFit> {
    let n = sweep.stimulus_db_spl.len();
    if n < 3 {
        return Err(Error::Degenerate(format!("{n} points, need at least 3")));
    }
    if sweep.response_rms_v.iter().any(|&r| r <= 0.0) {
        return Err(Error::invalid("response_rms_v", "zero response has no level"));
    }
    let x = &sweep.stimulus_db_spl;
    let y: Vec<f64> = sweep.response_rms_v.iter().map(|r| 20.0 * r.log10()).collect();
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Degenerate("all stimulus levels equal".into()));
    }
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let max_dev = x
        .iter()
        .zip(&y)
        .map(|(a, b)| (b - (intercept + slope * a)).abs())
        .fold(0.0, f64::max);
    Ok(LinearityFit { slope_db_per_db: slope, intercept_db: intercept, max_deviation_db: max_dev })
}

/// 20·log10|G_diff / G_cm| per frequency.
pub fn cmrr_db(diff_gain: &TransferFunction, cm_gain: &TransferFunction) -> Result<Vec<f64>> {
    if diff_gain.freqs() != cm_gain.freqs() {
        return Err(Error::GridMismatch);
    }
    Ok(diff_gain
        .values()
        .iter()
        .zip(cm_gain.values())
        .map(|(d, c)| 20.0 * (d.norm() / c.norm()).log10())
        .collect())
}

/// Coupling capacitance v_out / (gain · v_applied), F.
pub fn emi_capacitance(v_out_rms: f64, v_applied_rms: f64, charge_gain: f64) -> Result<f64> {
    if !(v_out_rms >= 0.0 && v_out_rms.is_finite()) {
        return Err(Error::invalid("v_out_rms", "must be finite and >= 0"));
    }
    if !(v_applied_rms > 0.0 && v_applied_rms.is_finite()) {
        return Err(Error::invalid("v_applied_rms", "must be > 0"));
    }
    if !(charge_gain > 0.0 && charge_gain.is_finite()) {
        return Err(Error::invalid("charge_gain", "must be > 0"));
    }
    Ok(v_out_rms / (charge_gain * v_applied_rms))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    const FS: f64 = 48_000.0;

    fn tone(parts: &[(f64, f64)], n: usize) -> TimeSeries {
        let s = (0..n)
            .map(|i| {
                let t = i as f64 / FS;
                parts.iter().map(|(f, a)| a * (2.0 * PI * f * t).sin()).sum()
            })
            .collect();
        TimeSeries::new(FS, s, "tone").unwrap()
    }

    fn integrate(spec: &Spectrum) -> f64 {
        spec.values().iter().sum::<f64>() * spec.freqs()[1]
    }

    #[test]
    fn sine_power_is_half_amplitude_squared() {
        let a = 0.7;
        let ts = tone(&[(1000.0, a)], 48_000);
        let spec = power_spectrum(&ts, 4800, 0.5).unwrap();
        assert!((integrate(&spec) / (a * a / 2.0) - 1.0).abs() < 0.01);
    }

    #[test]
    fn white_noise_is_flat() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let s: Vec<f64> = (0..1 << 18).map(|_| StandardNormal.sample(&mut rng)).collect();
        let ts = TimeSeries::new(FS, s, "noise").unwrap();
        let spec = power_spectrum(&ts, 1024, 0.5).unwrap();
        let v = &spec.values()[1..spec.len() - 1];
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        assert!((mean / (2.0 / FS) - 1.0).abs() < 0.05);
        // Parseval: integrated density equals the variance.
        let var = ts.samples.iter().map(|x| x * x).sum::<f64>() / ts.len() as f64;
        assert!((integrate(&spec) / var - 1.0).abs() < 0.01);
    }

    #[test]
    fn dc_record_has_no_ac_content() {
        let ts = TimeSeries::new(FS, vec![1.5; 4096], "dc").unwrap();
        let spec = power_spectrum(&ts, 1024, 0.5).unwrap();
        assert!(spec.values()[1..].iter().all(|&v| v < 1e-25));
        assert!(power_spectrum(&ts, 8192, 0.5).is_err());
        assert!(power_spectrum(&ts, 1024, 1.0).is_err());
    }

    #[test]
    fn thd_examples() {
        let n = 48_000;
        let ts = tone(&[(1000.0, 1.0), (2000.0, 0.001)], n);
        let d = thd(&ts, 1000.0, THD_HARMONICS).unwrap();
        assert!((d / 0.001 - 1.0).abs() < 0.02, "{d}");
        assert!(thd(&tone(&[(1000.0, 1.0)], n), 1000.0, 5).unwrap() < 1e-4);
        let mixed = tone(&[(1000.0, 1.0), (2000.0, 0.005), (3000.0, 0.01)], n);
        let d = thd(&mixed, 1000.0, 5).unwrap();
        assert!((d - (0.01f64.powi(2) + 0.005f64.powi(2)).sqrt()).abs() / d < 0.02);
        // Scaling the record leaves the ratio alone.
        let mut loud = ts.clone();
        loud.samples.iter_mut().for_each(|x| *x *= 30.0);
        assert!((thd(&loud, 1000.0, 5).unwrap() / thd(&ts, 1000.0, 5).unwrap() - 1.0).abs() < 1e-9);
        assert!(matches!(thd(&ts, 5000.0, 5), Err(Error::AboveNyquist { .. })));
        assert!(matches!(thd(&tone(&[(1000.0, 1.0)], 240), 1000.0, 5), Err(Error::TooShort(_))));
        let silent = TimeSeries::new(FS, vec![0.0; n], "zero").unwrap();
        assert!(matches!(thd(&silent, 1000.0, 5), Err(Error::FundamentalNotFound(_))));
    }

    #[test]
    fn linearity_examples() {
        let x: Vec<f64> = (0..10).map(|i| 10.0 * i as f64).collect();
        let prop: Vec<f64> = x.iter().map(|s| 1e-3 * 10f64.powf(s / 20.0)).collect();
        let fit = linearity_fit(&LevelSweep::new(x.clone(), prop.clone()).unwrap()).unwrap();
        assert!((fit.slope_db_per_db - 1.0).abs() < 1e-12);
        assert!(fit.max_deviation_db < 1e-9);
        let mut comp = prop.clone();
        *comp.last_mut().unwrap() *= 10f64.powf(-1.0 / 20.0);
        let fit = linearity_fit(&LevelSweep::new(x.clone(), comp).unwrap()).unwrap();
        assert!(fit.max_deviation_db > 0.6 && fit.max_deviation_db <= 1.0);
        let scaled: Vec<f64> = prop.iter().map(|r| r * 7.0).collect();
        let a = linearity_fit(&LevelSweep::new(x.clone(), scaled).unwrap()).unwrap();
        assert!((a.slope_db_per_db - 1.0).abs() < 1e-12);
        assert!(linearity_fit(&LevelSweep::new(vec![1.0, 2.0], vec![1.0, 1.0]).unwrap()).is_err());
        assert!(LevelSweep::new(vec![1.0, 1.0, 1.0], vec![1.0; 3]).is_err());
    }

    #[test]
    fn cmrr_and_emi() {
        let f = vec![100.0, 1000.0];
        let d = TransferFunction::new(f.clone(), vec![Complex64::new(2.0, 1.0); 2]).unwrap();
        let c = TransferFunction::new(f.clone(), vec![Complex64::new(0.02, 0.01); 2]).unwrap();
        assert!(cmrr_db(&d, &d).unwrap().iter().all(|v| v.abs() < 1e-12));
        let r = cmrr_db(&d, &c).unwrap();
        assert!((r[0] - 40.0).abs() < 1e-9);
        assert!((cmrr_db(&c, &d).unwrap()[0] + r[0]).abs() < 1e-12);
        let other = TransferFunction::new(vec![100.0, 2000.0], vec![Complex64::new(1.0, 0.0); 2]).unwrap();
        assert!(matches!(cmrr_db(&d, &other), Err(Error::GridMismatch)));

        assert!((emi_capacitance(12e-3, 1.0, 2e13).unwrap() - 0.6e-15).abs() < 1e-24);
        assert_eq!(emi_capacitance(0.0, 1.0, 2e13).unwrap(), 0.0);
        assert!((emi_capacitance(12e-3, 2.0, 2e13).unwrap() - 0.3e-15).abs() < 1e-24);
        assert!(emi_capacitance(1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn csv_round_trips() {
        let ts = TimeSeries::new(8000.0, vec![0.25, -1.0, 3e-9], "x").unwrap();
        let mut buf = Vec::new();
        ts.write_csv(&mut buf).unwrap();
        assert_eq!(TimeSeries::read_csv(&buf[..], "x").unwrap(), ts);
        assert!(TimeSeries::read_csv("0.1\n0.2\n".as_bytes(), "x").is_err());
        let sw = LevelSweep::new(vec![10.0, 20.0], vec![1e-6, 1e-5]).unwrap();
        let mut buf = Vec::new();
        sw.write_csv(&mut buf).unwrap();
        assert_eq!(LevelSweep::read_csv(&buf[..]).unwrap(), sw);
    }
}
