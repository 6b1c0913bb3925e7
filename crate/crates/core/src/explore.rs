//! Grid sweeps over feedback components and input op amp, with a
//! (ENC, power) Pareto filter.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::acoustics::{ein_aweighted_total, ein_spectrum, third_octave_bands};
use crate::circuit::{cuton_frequency, midband_gain, AmplifierConfig, SensorModel};
use crate::error::{Error, Result};
use crate::noise::{charge_noise_spectrum, enc_over_band};
use crate::opamp::Registry;
use crate::spectrum::log_grid;

/// Default limit on the number of grid points.
pub const DEFAULT_GRID_CAP: usize = 100_000;

/// Figures of merit of one design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub enc_c: f64,
    pub midband_gain_v_per_c: f64,
    pub cuton_hz: f64,
    pub power_w: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ein_db_spl: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignPoint {
    pub cfg: AmplifierConfig,
    pub metrics: Metrics,
}

impl DesignPoint {
    pub fn oa1(&self) -> &str {
        &self.cfg.oa1
    }

    pub fn oa2(&self) -> &str {
        &self.cfg.oa2
    }
}

/// Candidate values per axis. A missing axis keeps the fixed config value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axes {
    #[serde(default)]
    pub r_f: Option<Vec<f64>>,
    #[serde(default)]
    pub c_f: Option<Vec<f64>>,
    #[serde(default)]
    pub oa1: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default)]
    pub axes: Axes,
    #[serde(default)]
    pub fixed: AmplifierConfig,
    pub band: (f64, f64),
    #[serde(default)]
    pub sensor: SensorModel,
    #[serde(default = "default_cap")]
    pub cap: usize,
}

fn default_cap() -> usize {
    DEFAULT_GRID_CAP
}

impl SweepSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Every configuration of the grid, r_f outermost and oa1 innermost.
    pub fn configs(&self) -> Result<Vec<AmplifierConfig>> {
        fn axis<T: Clone>(name: &'static str, v: &Option<Vec<T>>, fixed: T) -> Result<Vec<T>> {
            match v {
                Some(v) if v.is_empty() => Err(Error::EmptyAxis(name)),
                Some(v) => Ok(v.clone()),
                None => Ok(vec![fixed]),
            }
        }
        let r_f = axis("r_f", &self.axes.r_f, self.fixed.r_f)?;
        let c_f = axis("c_f", &self.axes.c_f, self.fixed.c_f)?;
        let oa1 = axis("oa1", &self.axes.oa1, self.fixed.oa1.clone())?;
        for (name, v) in [("r_f", &r_f), ("c_f", &c_f)] {
            if v.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
                return Err(Error::invalid(name, "sweep candidates must be > 0"));
            }
        }
        let size = r_f.len().saturating_mul(c_f.len()).saturating_mul(oa1.len());
        if size > self.cap {
            return Err(Error::GridTooLarge { size, cap: self.cap });
        }
        let mut out = Vec::with_capacity(size);
        for &r in &r_f {
            for &c in &c_f {
                for o in &oa1 {
                    out.push(AmplifierConfig { r_f: r, c_f: c, oa1: o.clone(), ..self.fixed.clone() });
                }
            }
        }
        Ok(out)
    }
}

/// Computes all metrics of one configuration.
pub fn evaluate(cfg: &AmplifierConfig, sensor: &SensorModel, registry: &Registry, band: (f64, f64)) -> Result<DesignPoint> {
    cfg.validate()?;
    let (oa1, oa2) = cfg.resolve(registry)?;
    let enc_c = enc_over_band(cfg, sensor, oa1, oa2, band.0, band.1)?;
    let ein_db_spl = match &sensor.sensitivity {
        Some(sens) => {
            let bands = third_octave_bands(band.0, band.1)?;
            let grid = log_grid(bands[0].lo, bands[bands.len() - 1].hi, 50)?;
            let noise = charge_noise_spectrum(cfg, sensor, oa1, oa2, &grid)?;
            Some(ein_aweighted_total(&ein_spectrum(&noise, sens, &bands)?)?)
        }
        None => None,
    };
    Ok(DesignPoint {
        cfg: cfg.clone(),
        metrics: Metrics {
            enc_c,
            midband_gain_v_per_c: midband_gain(cfg),
            cuton_hz: cuton_frequency(cfg)?,
            power_w: 2.0 * oa1.power + oa2.power,
            ein_db_spl,
        },
    })
}

/// Evaluates the whole grid in parallel; output order is grid order.
pub fn sweep(spec: &SweepSpec, registry: &Registry) -> Result<Vec<DesignPoint>> {
    let configs = spec.configs()?;
    spec.sensor.validate()?;
    configs
        .par_iter()
        .map(|cfg| evaluate(cfg, &spec.sensor, registry, spec.band))
        .collect()
}

fn dominates(a: &Metrics, b: &Metrics) -> bool {
    a.enc_c <= b.enc_c && a.power_w <= b.power_w && (a.enc_c < b.enc_c || a.power_w < b.power_w)
}

/// Indices of the non-dominated points (minimising ENC and power), sorted
/// by ENC. Points with identical objectives are reported once.
pub fn pareto_indices(points: &[DesignPoint]) -> Vec<usize> {
    let mut front: Vec<usize> = (0..points.len())
        .filter(|&i| !points.iter().any(|q| dominates(&q.metrics, &points[i].metrics)))
        .collect();
    front.sort_by(|&a, &b| {
        let (ma, mb) = (&points[a].metrics, &points[b].metrics);
        ma.enc_c.total_cmp(&mb.enc_c).then(ma.power_w.total_cmp(&mb.power_w)).then(a.cmp(&b))
    });
    front.dedup_by(|a, b| {
        let (ma, mb) = (&points[*a].metrics, &points[*b].metrics);
        ma.enc_c == mb.enc_c && ma.power_w == mb.power_w
    });
    front
}

pub fn pareto_front(points: &[DesignPoint]) -> Vec<DesignPoint> {
    pareto_indices(points).into_iter().map(|i| points[i].clone()).collect()
}

/// Writes `r_f_ohm,c_f_f,oa1,oa2,enc_c,midband_gain_v_per_c,cuton_hz,power_w,pareto`.
/// Every point whose objectives match a front member is marked.
pub fn write_csv<W: Write>(points: &[DesignPoint], w: W) -> Result<()> {
    let front = pareto_indices(points);
    let on_front = |p: &DesignPoint| {
        front.iter().any(|&i| {
            let m = &points[i].metrics;
            m.enc_c == p.metrics.enc_c && m.power_w == p.metrics.power_w
        })
    };
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record([
        "r_f_ohm",
        "c_f_f",
        "oa1",
        "oa2",
        "enc_c",
        "midband_gain_v_per_c",
        "cuton_hz",
        "power_w",
        "pareto",
    ])?;
    for p in points {
        let m = &p.metrics;
        wtr.write_record([
            format!("{:e}", p.cfg.r_f),
            format!("{:e}", p.cfg.c_f),
            p.cfg.oa1.clone(),
            p.cfg.oa2.clone(),
            format!("{:e}", m.enc_c),
            format!("{:e}", m.midband_gain_v_per_c),
            format!("{:e}", m.cuton_hz),
            format!("{:e}", m.power_w),
            on_front(p).to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::enc_over_band;

    const BAND: (f64, f64) = (200.0, 20_000.0);

    fn spec(axes: Axes) -> SweepSpec {
        SweepSpec {
            axes,
            fixed: AmplifierConfig::default(),
            band: BAND,
            sensor: SensorModel::default(),
            cap: DEFAULT_GRID_CAP,
        }
    }

    fn point(enc: f64, power: f64) -> DesignPoint {
        DesignPoint {
            cfg: AmplifierConfig::default(),
            metrics: Metrics { enc_c: enc, midband_gain_v_per_c: 1.0, cuton_hz: 1.0, power_w: power, ein_db_spl: None },
        }
    }

    #[test]
    fn evaluate_delegates_to_noise_model() {
        let reg = Registry::builtin();
        let cfg = AmplifierConfig::default();
        let s = SensorModel::default();
        let p = evaluate(&cfg, &s, &reg, BAND).unwrap();
        let (a, b) = cfg.resolve(&reg).unwrap();
        assert_eq!(p.metrics.enc_c, enc_over_band(&cfg, &s, a, b, BAND.0, BAND.1).unwrap());
        assert_eq!(p.metrics.power_w, 2.0 * 6.7e-3);
        assert_eq!(evaluate(&cfg, &s, &reg, BAND).unwrap(), p);
    }

    #[test]
    fn larger_c_f_does_not_lower_enc() {
        let reg = Registry::builtin();
        let s = SensorModel::default();
        let small = evaluate(&AmplifierConfig::default(), &s, &reg, BAND).unwrap();
        let big_cfg = AmplifierConfig { c_f: 10e-12, ..Default::default() };
        let big = evaluate(&big_cfg, &s, &reg, BAND).unwrap();
        assert!(big.metrics.enc_c >= small.metrics.enc_c);
    }

    #[test]
    fn r_f_axis_ordering() {
        let reg = Registry::builtin();
        let pts = sweep(&spec(Axes { r_f: Some(vec![1e9, 10e9, 100e9]), ..Default::default() }), &reg).unwrap();
        let e: Vec<f64> = pts.iter().map(|p| p.metrics.enc_c).collect();
        assert!(e[0] >= e[1] && e[1] >= e[2]);
        assert!((e[1] - e[2]) / e[1] < 0.15, "{e:?}");
        assert!((e[0] - e[1]) > (e[1] - e[2]));
    }

    #[test]
    fn single_point_grid_matches_evaluate() {
        let reg = Registry::builtin();
        let s = spec(Axes::default());
        let pts = sweep(&s, &reg).unwrap();
        assert_eq!(pts.len(), 1);
        assert_eq!(pts[0], evaluate(&s.fixed, &s.sensor, &reg, BAND).unwrap());
    }

    #[test]
    fn opamp_axis_front() {
        let reg = Registry::builtin();
        let names = ["LT1792", "LTC6240", "LTC6081", "LTC6078"].map(String::from).to_vec();
        let pts = sweep(&spec(Axes { oa1: Some(names), ..Default::default() }), &reg).unwrap();
        let best = pts.iter().min_by(|a, b| a.metrics.enc_c.total_cmp(&b.metrics.enc_c)).unwrap();
        assert_eq!(best.oa1(), "LTC6240");
        let front: Vec<String> = pareto_front(&pts).iter().map(|p| p.cfg.oa1.clone()).collect();
        assert_eq!(front, ["LTC6240", "LTC6081", "LTC6078"]);
        let mut buf = Vec::new();
        write_csv(&pts, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("r_f_ohm,c_f_f,oa1,oa2,enc_c,midband_gain_v_per_c,cuton_hz,power_w,pareto\n"));
        assert_eq!(text.matches(",true").count(), 3);
    }

    #[test]
    fn pareto_basics() {
        assert_eq!(pareto_indices(&[point(1.0, 1.0)]), [0]);
        assert_eq!(pareto_indices(&[point(2.0, 2.0), point(1.0, 1.0)]), [1]);
        let pts = [point(1.0, 3.0), point(2.0, 2.0), point(3.0, 1.0), point(2.5, 2.5)];
        assert_eq!(pareto_indices(&pts), [0, 1, 2]);
        let mut dup = pts.to_vec();
        dup.push(pts[1].clone());
        dup.reverse();
        let a: Vec<_> = pareto_front(&pts).iter().map(|p| p.metrics.enc_c).collect();
        let b: Vec<_> = pareto_front(&dup).iter().map(|p| p.metrics.enc_c).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn grid_errors() {
        let reg = Registry::builtin();
        let empty = spec(Axes { r_f: Some(vec![]), ..Default::default() });
        assert!(matches!(sweep(&empty, &reg), Err(Error::EmptyAxis("r_f"))));
        let mut big = spec(Axes { r_f: Some(vec![1e9; 400]), c_f: Some(vec![1e-12; 400]), ..Default::default() });
        assert!(matches!(big.configs(), Err(Error::GridTooLarge { size: 160_000, .. })));
        big.cap = 200_000;
        assert_eq!(big.configs().unwrap().len(), 160_000);
        let json = r#"{"axes": {"oa1": ["LTC6240"]}, "band": [200, 20000]}"#;
        let s = SweepSpec::from_json(json).unwrap();
        assert_eq!(s.cap, DEFAULT_GRID_CAP);
        assert_eq!(SweepSpec::from_json(&s.to_json().unwrap()).unwrap(), s);
    }
}
