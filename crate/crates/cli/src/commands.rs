//! One function per subcommand.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use chargeamp_core::acoustics::{
    apply_pinna, ein_aweighted_total, ein_flat_total, ein_spectrum, third_octave_bands, PinnaGainTable,
    SensitivitySpectrum,
};
use chargeamp_core::circuit::{bode as bode_tf, cuton_frequency, dominant_cuton_hz, midband_gain, overall_gain};
use chargeamp_core::dsp::{
    cmrr_db, emi_capacitance, linearity_fit, power_spectrum, smooth_third_octave, thd, LevelSweep, TimeSeries,
    THD_HARMONICS,
};
use chargeamp_core::explore::{pareto_indices, sweep, write_csv as write_sweep_csv, SweepSpec};
use chargeamp_core::mna::{ChainOptions, ChainOracle};
use chargeamp_core::noise::{
    charge_noise_spectrum, enc_over_band, with_opamp_input_capacitance, NoiseTerms, ELEMENTARY_CHARGE,
};
use chargeamp_core::spectrum::{log_grid, log_space, Spectrum, TransferFunction, Unit};
use chargeamp_core::{AmplifierConfig, Registry, SensorModel};
use clap::{Args, Subcommand, ValueEnum};
use serde_json::json;

use crate::output::{Cell, Format, Run, Table};
use crate::svg::bode_svg;
use crate::Global;

/// The closed form and the oracle disagree beyond tolerance.
#[derive(Debug)]
pub struct OracleMismatch(pub String);

impl fmt::Display for OracleMismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "oracle mismatch: {}", self.0)
    }
}

impl std::error::Error for OracleMismatch {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SensorPreset {
    /// Estimated PVDF cantilever parasitics.
    Table,
    /// Nothing attached to the inputs.
    Unloaded,
}

/// Where the amplifier, sensor and op-amp data come from. Without paths the
/// built-in defaults are used; nothing is searched for implicitly.
#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Amplifier config JSON (SI units).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Sensor model JSON; overrides --sensor-preset.
    #[arg(long)]
    pub sensor: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = SensorPreset::Table)]
    pub sensor_preset: SensorPreset,
    /// Extra op-amp registry JSON, merged over the built-in parts.
    #[arg(long)]
    pub opamps: Option<PathBuf>,
    /// Input-stage op amp, overriding the config.
    #[arg(long)]
    pub oa1: Option<String>,
    /// Add the input-stage op amp's input capacitance to the sensor load.
    #[arg(long)]
    pub with_input_capacitance: bool,
}

struct Model {
    cfg: AmplifierConfig,
    sensor: SensorModel,
    registry: Registry,
}

fn read_text(run: &mut Run, path: &Path) -> Result<String> {
    run.input(path);
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_config(run: &mut Run, path: Option<&PathBuf>) -> Result<AmplifierConfig> {
    match path {
        Some(p) => {
            let text = read_text(run, p)?;
            let cfg = AmplifierConfig::from_json(&text).with_context(|| format!("parsing {}", p.display()))?;
            cfg.validate().with_context(|| format!("checking {}", p.display()))?;
            Ok(cfg)
        }
        None => Ok(AmplifierConfig::default()),
    }
}

fn load_registry(run: &mut Run, path: Option<&PathBuf>) -> Result<Registry> {
    let mut reg = Registry::builtin();
    if let Some(p) = path {
        let text = read_text(run, p)?;
        let extra = Registry::from_json(&text).with_context(|| format!("parsing {}", p.display()))?;
        for m in extra.iter() {
            reg.insert(m.clone());
        }
    }
    Ok(reg)
}

impl ModelArgs {
    fn load(&self, run: &mut Run) -> Result<Model> {
        let mut cfg = load_config(run, self.config.as_ref())?;
        if let Some(o) = &self.oa1 {
            cfg.oa1 = o.clone();
        }
        let mut sensor = match &self.sensor {
            Some(p) => {
                let text = read_text(run, p)?;
                let s = SensorModel::from_json(&text).with_context(|| format!("parsing {}", p.display()))?;
                s.validate().with_context(|| format!("checking {}", p.display()))?;
                s
            }
            None => match self.sensor_preset {
                SensorPreset::Table => SensorModel::default(),
                SensorPreset::Unloaded => SensorModel::unloaded(),
            },
        };
        let registry = load_registry(run, self.opamps.as_ref())?;
        if self.with_input_capacitance {
            let (oa1, _) = cfg.resolve(&registry)?;
            sensor = with_opamp_input_capacitance(&sensor, oa1);
        }
        cfg.resolve(&registry)?;
        Ok(Model { cfg, sensor, registry })
    }
}

#[derive(Debug, Args)]
pub struct BandArgs {
    /// Lower band edge, Hz.
    #[arg(long, default_value_t = 200.0)]
    pub band_lo: f64,
    /// Upper band edge, Hz.
    #[arg(long, default_value_t = 20_000.0)]
    pub band_hi: f64,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    #[arg(long, default_value_t = 10.0)]
    pub f_min: f64,
    #[arg(long, default_value_t = 100e3)]
    pub f_max: f64,
    #[arg(long, default_value_t = 200)]
    pub points_per_decade: usize,
}

fn say(g: &Global, msg: impl fmt::Display) {
    if !g.quiet {
        println!("{msg}");
    }
}

fn finish(g: &Global, run: Run) -> Result<()> {
    let path = run.finish()?;
    say(g, format_args!("manifest: {}", path.display()));
    Ok(())
}

// ---- bode ----

#[derive(Debug, Args)]
pub struct BodeArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Also write bode.svg.
    #[arg(long)]
    pub svg: bool,
}

pub fn bode(g: &Global, a: &BodeArgs) -> Result<()> {
    let mut run = Run::new("bode", &g.out_dir, g.format)?;
    let cfg = load_config(&mut run, a.config.as_ref())?;
    let freqs = log_grid(a.grid.f_min, a.grid.f_max, a.grid.points_per_decade)?;
    let tf = bode_tf(&cfg, &freqs)?;
    let mut t = Table::new(&["freq_hz", "mag_v_per_c", "phase_deg"]);
    let phases: Vec<f64> = tf.values().iter().map(|v| v.arg().to_degrees()).collect();
    for ((f, v), p) in tf.freqs().iter().zip(tf.values()).zip(&phases) {
        t.push(vec![(*f).into(), v.norm().into(), (*p).into()]);
    }
    run.table("bode", &t)?;
    if a.svg {
        run.raw("bode.svg", bode_svg(tf.freqs(), &tf.magnitudes(), &phases).as_bytes())?;
    }
    say(g, format_args!("mid-band gain: {:.4} V/pC", midband_gain(&cfg) * 1e-12));
    say(g, format_args!("dominant pole: {:.3} Hz", dominant_cuton_hz(&cfg)));
    say(g, format_args!("-3 dB cut-on: {:.3} Hz", cuton_frequency(&cfg)?));
    finish(g, run)
}

// ---- noise ----

#[derive(Debug, Args)]
pub struct NoiseArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub band: BandArgs,
    #[arg(long, default_value_t = 50)]
    pub points_per_decade: usize,
}

pub fn noise(g: &Global, a: &NoiseArgs) -> Result<()> {
    let mut run = Run::new("noise", &g.out_dir, g.format)?;
    let m = a.model.load(&mut run)?;
    let (oa1, oa2) = m.cfg.resolve(&m.registry)?;
    let freqs = log_grid(a.band.band_lo, a.band.band_hi, a.points_per_decade)?;
    let mut t = Table::new(&[
        "freq_hz",
        "johnson_a2_per_hz",
        "oa1_voltage_a2_per_hz",
        "oa1_current_a2_per_hz",
        "oa2_voltage_a2_per_hz",
        "total_c2_per_hz",
        "output_v2_per_hz",
        "dominant",
    ]);
    for &f in &freqs {
        let n = NoiseTerms::compute(&m.cfg, &m.sensor, oa1, oa2, f)?;
        let q2 = n.total_charge();
        let out = q2 * overall_gain(&m.cfg, f)?.norm_sqr();
        t.push(vec![
            f.into(),
            n.johnson.into(),
            n.oa1_voltage.into(),
            n.oa1_current.into(),
            n.oa2_voltage.into(),
            q2.into(),
            out.into(),
            n.ranked()[0].0.into(),
        ]);
    }
    run.table("noise", &t)?;
    // Machine-readable density for `ein --noise`.
    let spec = charge_noise_spectrum(&m.cfg, &m.sensor, oa1, oa2, &freqs)?;
    let mut buf = Vec::new();
    spec.write_csv(&mut buf)?;
    run.raw("charge_noise.csv", &buf)?;
    say(g, format_args!("{} points, {} / {}", freqs.len(), oa1.name, oa2.name));
    finish(g, run)
}

// ---- enc ----

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Reference {
    /// Bench measurement with nothing attached, 30 aC.
    UnloadedBench,
    /// Bench measurement with the sensor parasitics attached, 62 aC.
    LoadedBench,
}

impl Reference {
    fn enc_c(self) -> f64 {
        match self {
            Reference::UnloadedBench => 30e-18,
            Reference::LoadedBench => 62e-18,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Reference::UnloadedBench => "unloaded-bench",
            Reference::LoadedBench => "loaded-bench",
        }
    }
}

#[derive(Debug, Args)]
pub struct EncArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub band: BandArgs,
    /// Compare against a reference measurement.
    #[arg(long, value_enum)]
    pub reference: Option<Reference>,
}

pub fn enc(g: &Global, a: &EncArgs) -> Result<()> {
    let mut run = Run::new("enc", &g.out_dir, g.format)?;
    let m = a.model.load(&mut run)?;
    let (oa1, oa2) = m.cfg.resolve(&m.registry)?;
    let q = enc_over_band(&m.cfg, &m.sensor, oa1, oa2, a.band.band_lo, a.band.band_hi)?;
    let mut doc = json!({
        "enc_c": q,
        "enc_electrons": q / ELEMENTARY_CHARGE,
        "band_hz": [a.band.band_lo, a.band.band_hi],
        "oa1": oa1.name,
        "oa2": oa2.name,
    });
    say(g, format_args!("ENC {:.2} aC ({:.0} e-) over {}-{} Hz", q * 1e18, q / ELEMENTARY_CHARGE, a.band.band_lo, a.band.band_hi));
    if let Some(r) = a.reference {
        let ratio = q / r.enc_c();
        doc["reference"] = json!({
            "name": r.name(),
            "enc_c": r.enc_c(),
            "ratio": ratio,
            "ratio_db": 20.0 * ratio.log10(),
        });
        say(g, format_args!("reference {} {:.0} aC: ratio {:.3} ({:+.2} dB)", r.name(), r.enc_c() * 1e18, ratio, 20.0 * ratio.log10()));
    }
    run.json("enc", &doc)?;
    finish(g, run)
}

// ---- ein ----

#[derive(Debug, Args)]
pub struct EinArgs {
    /// Charge noise density CSV (`freq_hz,density,unit` in C^2/Hz); when
    /// absent the density is modeled from the config.
    #[arg(long)]
    pub noise: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Sensitivity CSV (`freq_hz,coulombs_per_pascal`); falls back to the
    /// sensor model's own table.
    #[arg(long)]
    pub sensitivity: Option<PathBuf>,
    /// Pinna gain CSV (`freq_hz,gain_db`).
    #[arg(long, conflicts_with = "pinna_gain_db")]
    pub pinna: Option<PathBuf>,
    /// Uniform pinna gain, dB.
    #[arg(long)]
    pub pinna_gain_db: Option<f64>,
    #[arg(long, default_value_t = 100.0)]
    pub band_lo: f64,
    #[arg(long, default_value_t = 7_000.0)]
    pub band_hi: f64,
}

pub fn ein(g: &Global, a: &EinArgs) -> Result<()> {
    let mut run = Run::new("ein", &g.out_dir, g.format)?;
    let bands = third_octave_bands(a.band_lo, a.band_hi)?;
    let model = a.model.load(&mut run)?;
    let mut sens = match &a.sensitivity {
        Some(p) => {
            run.input(p);
            let f = fs::File::open(p).with_context(|| format!("reading {}", p.display()))?;
            SensitivitySpectrum::read_csv(f).with_context(|| format!("parsing {}", p.display()))?
        }
        None => match &model.sensor.sensitivity {
            Some(s) => s.clone(),
            None => bail!(chargeamp_core::Error::InvalidParameter {
                name: "sensitivity",
                reason: "no --sensitivity file and the sensor model has none".into(),
            }),
        },
    };
    if let Some(p) = &a.pinna {
        run.input(p);
        let f = fs::File::open(p).with_context(|| format!("reading {}", p.display()))?;
        let table = PinnaGainTable::read_csv(f).with_context(|| format!("parsing {}", p.display()))?;
        sens = apply_pinna(&sens, &table)?;
    } else if let Some(db) = a.pinna_gain_db {
        let fr = sens.freqs();
        sens = apply_pinna(&sens, &PinnaGainTable::uniform(db, fr[0], fr[fr.len() - 1])?)?;
    }
    let noise = match &a.noise {
        Some(p) => {
            run.input(p);
            let f = fs::File::open(p).with_context(|| format!("reading {}", p.display()))?;
            let s = Spectrum::read_csv(f).with_context(|| format!("parsing {}", p.display()))?;
            s.expect_unit(Unit::CoulombsSqPerHz)?;
            s
        }
        None => {
            let (oa1, oa2) = model.cfg.resolve(&model.registry)?;
            let grid = log_grid(bands[0].lo, bands[bands.len() - 1].hi, 50)?;
            charge_noise_spectrum(&model.cfg, &model.sensor, oa1, oa2, &grid)?
        }
    };
    let ein = ein_spectrum(&noise, &sens, &bands)?;
    let mut t = Table::new(&["band_center_hz", "ein_db_spl", "a_weight_db"]);
    for b in &ein {
        t.push(vec![b.center.into(), b.ein_db_spl.into(), b.a_weight_db.into()]);
    }
    run.table("ein", &t)?;
    let (aw, flat) = (ein_aweighted_total(&ein)?, ein_flat_total(&ein)?);
    run.json(
        "ein_summary",
        &json!({ "a_weighted_total_db_spl": aw, "flat_total_db_spl": flat, "bands": ein.len() }),
    )?;
    say(g, format_args!("EIN {aw:.2} dB SPL(A), {flat:.2} dB SPL unweighted, {} bands", ein.len()));
    finish(g, run)
}

// ---- analyze ----

#[derive(Debug, Subcommand)]
pub enum AnalyzeCmd {
    /// Total harmonic distortion of a recorded tone.
    Thd {
        /// Time series (`# sample_rate_hz=...` then one sample per line).
        #[arg(long)]
        input: PathBuf,
        /// Fundamental, Hz.
        #[arg(long)]
        f0: f64,
        /// Harmonics counted, fundamental included.
        #[arg(long, default_value_t = THD_HARMONICS)]
        harmonics: usize,
    },
    /// Welch power spectral density, optionally third-octave smoothed.
    Spectrum {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 4096)]
        segment: usize,
        #[arg(long, default_value_t = 0.5)]
        overlap: f64,
        /// Also write band RMS over third-octave bands in [band_lo, band_hi].
        #[arg(long)]
        third_octave: bool,
        #[arg(long, default_value_t = 100.0)]
        band_lo: f64,
        #[arg(long, default_value_t = 7_000.0)]
        band_hi: f64,
    },
    /// Straight-line fit of response level against stimulus level.
    Linearity {
        /// CSV `stimulus_db_spl,response_rms_v`.
        #[arg(long)]
        input: PathBuf,
    },
    /// Common-mode rejection, from measured gains or from the oracle.
    Cmrr {
        /// Differential gain CSV (`freq_hz,mag_v_per_c,phase_deg`).
        #[arg(long, requires = "cm")]
        diff: Option<PathBuf>,
        /// Common-mode gain CSV, same grid.
        #[arg(long, requires = "diff")]
        cm: Option<PathBuf>,
        #[command(flatten)]
        model: ModelArgs,
        /// Relative feedback-capacitor mismatch between the input stages.
        #[arg(long, default_value_t = 0.01)]
        c_f_mismatch: f64,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Coupling capacitance from an applied interferer.
    EmiCap {
        /// Output RMS voltage, V.
        #[arg(long)]
        v_out: f64,
        /// Applied RMS voltage, V.
        #[arg(long)]
        v_applied: f64,
        /// Charge gain, V/C; defaults to the config's mid-band gain.
        #[arg(long)]
        gain: Option<f64>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn read_series(run: &mut Run, p: &Path) -> Result<TimeSeries> {
    run.input(p);
    let f = fs::File::open(p).with_context(|| format!("reading {}", p.display()))?;
    let label = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    TimeSeries::read_csv(f, label).with_context(|| format!("parsing {}", p.display()))
}

fn read_tf(run: &mut Run, p: &Path) -> Result<TransferFunction> {
    run.input(p);
    let f = fs::File::open(p).with_context(|| format!("reading {}", p.display()))?;
    TransferFunction::read_csv(f).with_context(|| format!("parsing {}", p.display()))
}

pub fn analyze(g: &Global, mode: &AnalyzeCmd) -> Result<()> {
    match mode {
        AnalyzeCmd::Thd { input, f0, harmonics } => {
            let mut run = Run::new("analyze-thd", &g.out_dir, g.format)?;
            let ts = read_series(&mut run, input)?;
            let d = thd(&ts, *f0, *harmonics)?;
            run.json("thd", &json!({ "thd_ratio": d, "thd_percent": d * 100.0, "f0_hz": f0, "harmonics": harmonics }))?;
            say(g, format_args!("THD {:.4e} ({:.4} %)", d, d * 100.0));
            finish(g, run)
        }
        AnalyzeCmd::Spectrum { input, segment, overlap, third_octave, band_lo, band_hi } => {
            let mut run = Run::new("analyze-spectrum", &g.out_dir, g.format)?;
            let ts = read_series(&mut run, input)?;
            let spec = power_spectrum(&ts, *segment, *overlap)?;
            let mut t = Table::new(&["freq_hz", "density_v2_per_hz"]);
            for (f, v) in spec.freqs().iter().zip(spec.values()) {
                t.push(vec![(*f).into(), (*v).into()]);
            }
            run.table("spectrum", &t)?;
            if *third_octave {
                let bands = third_octave_bands(*band_lo, *band_hi)?;
                let rms = smooth_third_octave(&spec, &bands)?;
                let mut t = Table::new(&["band_center_hz", "band_rms_v"]);
                for (b, r) in bands.iter().zip(rms) {
                    t.push(vec![b.center.into(), r.into()]);
                }
                run.table("spectrum_third_octave", &t)?;
            }
            say(g, format_args!("{} bins, resolution {:.4} Hz", spec.len(), spec.freqs()[1]));
            finish(g, run)
        }
        AnalyzeCmd::Linearity { input } => {
            let mut run = Run::new("analyze-linearity", &g.out_dir, g.format)?;
            run.input(input);
            let f = fs::File::open(input).with_context(|| format!("reading {}", input.display()))?;
            let sweep = LevelSweep::read_csv(f).with_context(|| format!("parsing {}", input.display()))?;
            let fit = linearity_fit(&sweep)?;
            run.json("linearity", &fit)?;
            say(
                g,
                format_args!("slope {:.4} dB/dB, max deviation {:.3} dB", fit.slope_db_per_db, fit.max_deviation_db),
            );
            finish(g, run)
        }
        AnalyzeCmd::Cmrr { diff, cm, model, c_f_mismatch, grid } => {
            let mut run = Run::new("analyze-cmrr", &g.out_dir, g.format)?;
            let (d, c) = match (diff, cm) {
                (Some(d), Some(c)) => (read_tf(&mut run, d)?, read_tf(&mut run, c)?),
                _ => {
                    let m = model.load(&mut run)?;
                    let opts = ChainOptions { c_f_mismatch: *c_f_mismatch, ..Default::default() };
                    let oracle = ChainOracle::new(&m.cfg, &m.sensor, &opts)?;
                    let freqs = log_grid(grid.f_min, grid.f_max, grid.points_per_decade)?;
                    let dv = freqs.iter().map(|&f| oracle.gain(f)).collect::<Result<Vec<_>, _>>()?;
                    let cv = freqs.iter().map(|&f| oracle.common_mode_gain(f)).collect::<Result<Vec<_>, _>>()?;
                    (TransferFunction::new(freqs.clone(), dv)?, TransferFunction::new(freqs, cv)?)
                }
            };
            let r = cmrr_db(&d, &c)?;
            let mut t = Table::new(&["freq_hz", "diff_gain_v_per_c", "cm_gain_v_per_c", "cmrr_db"]);
            for (((f, dv), cv), r) in d.freqs().iter().zip(d.values()).zip(c.values()).zip(&r) {
                t.push(vec![(*f).into(), dv.norm().into(), cv.norm().into(), (*r).into()]);
            }
            run.table("cmrr", &t)?;
            let worst = r.iter().cloned().fold(f64::INFINITY, f64::min);
            say(g, format_args!("worst-case CMRR {worst:.2} dB over {} points", r.len()));
            finish(g, run)
        }
        AnalyzeCmd::EmiCap { v_out, v_applied, gain, config } => {
            let mut run = Run::new("analyze-emi-cap", &g.out_dir, g.format)?;
            let gain = match gain {
                Some(x) => *x,
                None => midband_gain(&load_config(&mut run, config.as_ref())?),
            };
            let c = emi_capacitance(*v_out, *v_applied, gain)?;
            run.json(
                "emi_cap",
                &json!({ "capacitance_f": c, "v_out_rms_v": v_out, "v_applied_rms_v": v_applied, "gain_v_per_c": gain }),
            )?;
            say(g, format_args!("coupling capacitance {:.4} fF", c * 1e15));
            finish(g, run)
        }
    }
}

// ---- explore ----

#[derive(Debug, Args)]
pub struct ExploreArgs {
    /// Sweep specification JSON.
    #[arg(long)]
    pub spec: PathBuf,
    /// Extra op-amp registry JSON, merged over the built-in parts.
    #[arg(long)]
    pub opamps: Option<PathBuf>,
}

pub fn explore(g: &Global, a: &ExploreArgs) -> Result<()> {
    let mut run = Run::new("explore", &g.out_dir, g.format)?;
    let text = read_text(&mut run, &a.spec)?;
    let spec = SweepSpec::from_json(&text).with_context(|| format!("parsing {}", a.spec.display()))?;
    let registry = load_registry(&mut run, a.opamps.as_ref())?;
    let points = sweep(&spec, &registry)?;
    let front = pareto_indices(&points);
    match run.format() {
        Format::Csv => {
            let mut buf = Vec::new();
            write_sweep_csv(&points, &mut buf)?;
            run.raw("explore.csv", &buf)?;
        }
        Format::Json => {
            let rows: Vec<_> = points
                .iter()
                .enumerate()
                .map(|(i, p)| json!({ "point": p, "pareto": front.contains(&i) }))
                .collect();
            run.json("explore", &rows)?;
        }
    }
    say(g, format_args!("{} designs, {} on the Pareto front", points.len(), front.len()));
    for &i in &front {
        let p = &points[i];
        say(
            g,
            format_args!(
                "  {:<8} R_f {:.3e} C_f {:.3e}  ENC {:.2} aC  {:.2} mW",
                p.oa1(),
                p.cfg.r_f,
                p.cfg.c_f,
                p.metrics.enc_c * 1e18,
                p.metrics.power_w * 1e3
            ),
        );
    }
    finish(g, run)
}

// ---- oracle-check ----

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 200)]
    pub gain_points: usize,
    #[arg(long, default_value_t = 50)]
    pub noise_points: usize,
    #[arg(long, default_value_t = 1e-9)]
    pub gain_tolerance: f64,
    #[arg(long, default_value_t = 1e-2)]
    pub noise_tolerance: f64,
}

fn rel(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        a.abs()
    } else {
        (a - b).abs() / b.abs()
    }
}

pub fn oracle_check(g: &Global, a: &OracleArgs) -> Result<()> {
    let mut run = Run::new("oracle-check", &g.out_dir, g.format)?;
    let m = a.model.load(&mut run)?;
    let (oa1, oa2) = m.cfg.resolve(&m.registry)?;
    let oracle = ChainOracle::new(&m.cfg, &m.sensor, &ChainOptions::default())?;
    let mut t = Table::new(&["quantity", "freq_hz", "closed_form", "oracle", "rel_error"]);
    let mut gain_err = 0f64;
    for f in log_space(10.0, 100e3, a.gain_points)? {
        let (c, o) = (overall_gain(&m.cfg, f)?, oracle.gain(f)?);
        let e = (o - c).norm() / c.norm();
        gain_err = gain_err.max(e);
        t.push(vec!["gain_v_per_c".into(), f.into(), c.norm().into(), o.norm().into(), e.into()]);
    }
    let mut noise_err = 0f64;
    for f in log_space(100.0, 20e3, a.noise_points)? {
        let c = NoiseTerms::compute(&m.cfg, &m.sensor, oa1, oa2, f)?;
        let o = oracle.noise(oa1, oa2, f)?;
        let e = rel(o.total_current(), c.total_current());
        noise_err = noise_err.max(e);
        t.push(vec![
            Cell::from("noise_a2_per_hz"),
            f.into(),
            c.total_current().into(),
            o.total_current().into(),
            e.into(),
        ]);
    }
    run.table("oracle_check", &t)?;
    let residual = oracle.residual(1e3)?;
    run.json(
        "oracle_check_summary",
        &json!({ "max_gain_rel_error": gain_err, "max_noise_rel_error": noise_err, "kcl_residual_1khz": residual }),
    )?;
    say(g, format_args!("max gain rel error  {gain_err:.3e} (tolerance {:.0e})", a.gain_tolerance));
    say(g, format_args!("max noise rel error {noise_err:.3e} (tolerance {:.0e})", a.noise_tolerance));
    say(g, format_args!("KCL residual at 1 kHz {residual:.3e}"));
    let failed = gain_err > a.gain_tolerance || noise_err > a.noise_tolerance;
    finish(g, run)?;
    if failed {
        return Err(OracleMismatch(format!("gain {gain_err:.3e}, noise {noise_err:.3e}")).into());
    }
    Ok(())
}
