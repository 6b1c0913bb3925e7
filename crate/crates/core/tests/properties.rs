use chargeamp_core::acoustics::{ein_aweighted_total, third_octave_bands, EinBand};
use chargeamp_core::circuit::{overall_gain, AmplifierConfig, SensorModel};
use chargeamp_core::dsp::{cmrr_db, linearity_fit, thd, LevelSweep, TimeSeries};
use chargeamp_core::explore::{pareto_indices, DesignPoint, Metrics};
use chargeamp_core::noise::input_charge_noise_density;
use chargeamp_core::opamp::Registry;
use chargeamp_core::spectrum::TransferFunction;
use num_complex::Complex64;
use proptest::prelude::*;

fn log_uniform(lo: f64, hi: f64) -> impl Strategy<Value = f64> {
    (lo.ln()..hi.ln()).prop_map(f64::exp)
}

fn config() -> impl Strategy<Value = (AmplifierConfig, SensorModel, String, f64)> {
    (
        log_uniform(1e8, 1e12),
        log_uniform(0.1e-12, 10e-12),
        0.0..100e-12f64,
        0.0..10e-12f64,
        0.0..10e-12f64,
        prop_oneof![Just(f64::INFINITY), log_uniform(1e9, 1e14)],
        prop::sample::select(vec!["LT1792", "LTC6240", "LTC6081", "LTC6078"]),
        log_uniform(10.0, 1e5),
    )
        .prop_map(|(r_f, c_f, c_piezo, c_par, c_gnd, r_par, oa1, f)| {
            let cfg = AmplifierConfig { r_f, c_f, oa1: oa1.to_string(), ..Default::default() };
            let sensor = SensorModel { c_piezo, c_par, r_par, c_gnd, sensitivity: None };
            (cfg, sensor, oa1.to_string(), f)
        })
}

fn density(cfg: &AmplifierConfig, s: &SensorModel, f: f64) -> f64 {
    let reg = Registry::builtin();
    let (a, b) = cfg.resolve(&reg).unwrap();
    input_charge_noise_density(cfg, s, a, b, f).unwrap()
}

fn point(enc: f64, power: f64) -> DesignPoint {
    DesignPoint {
        cfg: AmplifierConfig::default(),
        metrics: Metrics { enc_c: enc, midband_gain_v_per_c: 0.0, cuton_hz: 0.0, power_w: power, ein_db_spl: None },
    }
}

fn objectives(points: &[DesignPoint], idx: &[usize]) -> Vec<(f64, f64)> {
    idx.iter().map(|&i| (points[i].metrics.enc_c, points[i].metrics.power_w)).collect()
}

proptest! {
    #[test]
    fn noise_grows_with_any_capacitance_or_leakage((cfg, s, _oa1, f) in config(), bump in 1e-15..10e-12f64) {
        let base = density(&cfg, &s, f);
        let tol = base * 1e-12;
        let g = if s.r_par.is_finite() { 1.0 / s.r_par } else { 0.0 };
        let variants = [
            SensorModel { c_piezo: s.c_piezo + bump, ..s.clone() },
            SensorModel { c_par: s.c_par + bump, ..s.clone() },
            SensorModel { c_gnd: s.c_gnd + bump, ..s.clone() },
            SensorModel { r_par: 1.0 / (g + bump * 1e-3), ..s.clone() },
        ];
        for v in &variants {
            prop_assert!(density(&cfg, v, f) >= base - tol);
        }
        let wider = AmplifierConfig { c_f: cfg.c_f + bump, ..cfg.clone() };
        prop_assert!(density(&wider, &s, f) >= base - tol);
    }

    #[test]
    fn gain_magnitude_rises_below_plateau(f in log_uniform(1.0, 1e4), k in 1.001..2.0f64) {
        let cfg = AmplifierConfig::default();
        prop_assert!(overall_gain(&cfg, f * k).unwrap().norm() > overall_gain(&cfg, f).unwrap().norm());
    }

    #[test]
    fn pareto_is_order_and_duplicate_invariant(
        pts in prop::collection::vec((1.0..100.0f64, 1.0..100.0f64), 1..30),
        dup in any::<prop::sample::Index>(),
        seed in any::<u64>(),
    ) {
        let points: Vec<DesignPoint> = pts.iter().map(|&(e, p)| point(e, p)).collect();
        let front = objectives(&points, &pareto_indices(&points));
        // Brute force: nothing in the input dominates a front member.
        for &(e, p) in &front {
            prop_assert!(!pts.iter().any(|&(e2, p2)| e2 <= e && p2 <= p && (e2 < e || p2 < p)));
        }
        let mut shuffled = points.clone();
        shuffled.push(points[dup.index(points.len())].clone());
        let n = shuffled.len();
        for i in 0..n {
            shuffled.swap(i, (seed as usize).wrapping_mul(i + 7) % n);
        }
        prop_assert_eq!(objectives(&shuffled, &pareto_indices(&shuffled)), front);
    }

    #[test]
    fn ein_total_is_monotone(levels in prop::collection::vec(-20.0..80.0f64, 1..20), which in any::<prop::sample::Index>(), up in 0.0..30.0f64) {
        let bands: Vec<EinBand> = levels.iter().enumerate()
            .map(|(i, &l)| EinBand { center: 100.0 * (i + 1) as f64, ein_db_spl: l, a_weight_db: -(i as f64) })
            .collect();
        let before = ein_aweighted_total(&bands).unwrap();
        let mut raised = bands.clone();
        raised[which.index(bands.len())].ein_db_spl += up;
        prop_assert!(ein_aweighted_total(&raised).unwrap() >= before);
    }

    #[test]
    fn third_octave_bands_tile(lo in log_uniform(20.0, 2000.0), span in 1.5..100.0f64) {
        let bands = third_octave_bands(lo, lo * span).unwrap();
        prop_assert!(bands[0].lo <= lo && bands[bands.len() - 1].hi >= lo * span);
        for w in bands.windows(2) {
            prop_assert!((w[1].lo / w[0].hi - 1.0).abs() < 1e-12);
            prop_assert!((w[1].hi / w[0].hi - 2f64.powf(1.0 / 3.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn thd_ignores_amplitude(scale in log_uniform(1e-6, 1e3), h2 in 1e-4..1e-2f64) {
        let fs = 8000.0;
        let s: Vec<f64> = (0..8000).map(|i| {
            let t = i as f64 / fs;
            (2.0 * std::f64::consts::PI * 250.0 * t).sin() + h2 * (2.0 * std::f64::consts::PI * 500.0 * t).sin()
        }).collect();
        let a = TimeSeries::new(fs, s.clone(), "a").unwrap();
        let b = TimeSeries::new(fs, s.iter().map(|x| x * scale).collect(), "b").unwrap();
        let (ta, tb) = (thd(&a, 250.0, 5).unwrap(), thd(&b, 250.0, 5).unwrap());
        prop_assert!((ta / tb - 1.0).abs() < 1e-9);
    }

    #[test]
    fn linearity_slope_ignores_gain(resp in prop::collection::vec(1e-6..1.0f64, 3..12), k in log_uniform(1e-3, 1e3)) {
        let stim: Vec<f64> = (0..resp.len()).map(|i| 10.0 * i as f64).collect();
        let a = linearity_fit(&LevelSweep::new(stim.clone(), resp.clone()).unwrap()).unwrap();
        let b = linearity_fit(&LevelSweep::new(stim, resp.iter().map(|r| r * k).collect()).unwrap()).unwrap();
        prop_assert!((a.slope_db_per_db - b.slope_db_per_db).abs() < 1e-9);
        prop_assert!((b.intercept_db - a.intercept_db - 20.0 * k.log10()).abs() < 1e-9);
    }

    #[test]
    fn cmrr_flips_sign_when_swapped(re in 0.1..10.0f64, im in -10.0..10.0f64, ratio in log_uniform(1e-3, 1e3)) {
        let f = vec![100.0];
        let d = TransferFunction::new(f.clone(), vec![Complex64::new(re, im)]).unwrap();
        let c = TransferFunction::new(f, vec![Complex64::new(re * ratio, -im)]).unwrap();
        let ab = cmrr_db(&d, &c).unwrap()[0];
        let ba = cmrr_db(&c, &d).unwrap()[0];
        prop_assert!((ab + ba).abs() < 1e-9);
    }
}
