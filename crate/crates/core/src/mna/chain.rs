//! Component-level netlist of the full amplifier chain and the noise /
//! gain quantities derived from it by nodal analysis.
//!
//! Nothing here uses the closed-form gain or noise expressions; the chain
//! is solved as a circuit so the two routes can be compared.

use std::f64::consts::{PI, SQRT_2};

use num_complex::Complex64;

use super::netlist::Netlist;
use super::solve::AcSystem;
use crate::circuit::{find_rising_crossing, AmplifierConfig, SensorModel, CUTON_REL_TOL, CUTON_SEARCH_BAND};
use crate::error::{check_freq, Result};
use crate::noise::{NoiseTerms, BOLTZMANN};
use crate::opamp::OpAmpModel;

/// Difference-stage resistors (all equal, unity differential gain).
pub const R_DIFF: f64 = 10e3;

/// Frequency at which the oracle reads the high-frequency plateau.
pub const PLATEAU_FREQ: f64 = 1e7;

pub const OUTPUT_NODE: &str = "out";
pub const INTERNAL_NODE: &str = "int";
pub const PIEZO_SOURCE: &str = "v_piezo";
pub const CHARGE_TEST_SOURCE: &str = "i_qtest";

/// Noise source element names.
pub const EN_OA1_A: &str = "en_oa1_a";
pub const EN_OA1_B: &str = "en_oa1_b";
pub const IN_OA1_A: &str = "in_oa1_a";
pub const IN_OA1_B: &str = "in_oa1_b";
pub const IN_RF_A: &str = "in_rf_a";
pub const IN_RF_B: &str = "in_rf_b";
pub const IN_RPAR: &str = "in_rpar";
pub const EN_OA2: &str = "en_oa2";

/// Non-ideal extras for the chain.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ChainOptions {
    /// Capacitance from each input-stage inverting input to ground, F.
    pub input_capacitance: f64,
    /// Relative mismatch of the stage-B feedback capacitor.
    pub c_f_mismatch: f64,
    /// Open-loop gain of every op amp; `None` for ideal nullors.
    pub opamp_gain: Option<f64>,
}

/// Which noise term a source belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseGroup {
    Johnson,
    Oa1Voltage,
    Oa1Current,
    Oa2Voltage,
}

/// An independent noise generator in the netlist and its variance density
/// (A²/Hz or V²/Hz).
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSource {
    pub element: &'static str,
    pub group: NoiseGroup,
    pub density: f64,
}

/// Builds the chain with ideal op amps and no extras.
pub fn build_chain_netlist(cfg: &AmplifierConfig, sensor: &SensorModel) -> Result<Netlist> {
    build_chain_netlist_with(cfg, sensor, &ChainOptions::default())
}

/// Builds the chain. All sources are created at zero amplitude.
pub fn build_chain_netlist_with(
    cfg: &AmplifierConfig,
    sensor: &SensorModel,
    opts: &ChainOptions,
) -> Result<Netlist> {
    cfg.validate()?;
    sensor.validate()?;
    let zero = Complex64::new(0.0, 0.0);
    let mut n = Netlist::new();

    // Sensor: Thevenin piezo, Norton charge-test injector, parasitics.
    if sensor.c_piezo > 0.0 {
        n.voltage_source(PIEZO_SOURCE, "pz", "in_n", zero)?;
        n.capacitor("c_piezo", "pz", "in_p", sensor.c_piezo)?;
    }
    n.current_source(CHARGE_TEST_SOURCE, "in_n", "in_p", zero)?;
    if sensor.c_par > 0.0 {
        n.capacitor("c_par", "in_p", "in_n", sensor.c_par)?;
    }
    if sensor.has_leakage() {
        n.resistor("r_par", "in_p", "in_n", sensor.r_par)?;
        n.current_source(IN_RPAR, "in_n", "in_p", zero)?;
    }
    if sensor.c_gnd > 0.0 {
        n.capacitor("c_gnd_p", "in_p", "gnd", sensor.c_gnd)?;
        n.capacitor("c_gnd_n", "in_n", "gnd", sensor.c_gnd)?;
    }
    if opts.input_capacitance > 0.0 {
        n.capacitor("c_in_p", "in_p", "gnd", opts.input_capacitance)?;
        n.capacitor("c_in_n", "in_n", "gnd", opts.input_capacitance)?;
    }

    // Input stages.
    let c_f_b = cfg.c_f * (1.0 + opts.c_f_mismatch);
    for (tag, input, c_f) in [("a", "in_p", cfg.c_f), ("b", "in_n", c_f_b)] {
        let np = format!("np_{tag}");
        let out = format!("out_{tag}");
        n.voltage_source(&format!("en_oa1_{tag}"), &np, "gnd", zero)?;
        n.opamp(&format!("oa1_{tag}"), &np, input, &out)?;
        n.resistor(&format!("r_f_{tag}"), input, &out, cfg.r_f)?;
        n.capacitor(&format!("c_f_{tag}"), input, &out, c_f)?;
        n.current_source(&format!("in_rf_{tag}"), &out, input, zero)?;
        n.current_source(&format!("in_oa1_{tag}"), "gnd", input, zero)?;
    }

    // Difference stage: int = out_b - out_a.
    n.resistor("r_d1", "out_a", "d_n", R_DIFF)?;
    n.resistor("r_d2", "d_n", INTERNAL_NODE, R_DIFF)?;
    n.resistor("r_d3", "out_b", "d_p", R_DIFF)?;
    n.resistor("r_d4", "d_p", "gnd", R_DIFF)?;
    n.voltage_source(EN_OA2, "d_pi", "d_p", zero)?;
    n.opamp("oa2", "d_pi", "d_n", INTERNAL_NODE)?;

    // Lead stage and output high-pass.
    n.opamp("oa3", INTERNAL_NODE, "l_n", "lead")?;
    n.resistor("r_a", "l_n", "lead", cfg.r_a)?;
    n.resistor("r_b", "l_n", "cb", cfg.r_b)?;
    n.capacitor("c_b", "cb", "gnd", cfg.c_b)?;
    n.capacitor("c_o", "lead", OUTPUT_NODE, cfg.c_o)?;
    n.resistor("r_o", OUTPUT_NODE, "gnd", cfg.r_o)?;

    Ok(match opts.opamp_gain {
        Some(a) => n.with_finite_gain(a),
        None => n,
    })
}

/// The chain netlist together with the parameters it was built from.
#[derive(Debug, Clone)]
pub struct ChainOracle {
    netlist: Netlist,
    cfg: AmplifierConfig,
    sensor: SensorModel,
}

impl ChainOracle {
    pub fn new(cfg: &AmplifierConfig, sensor: &SensorModel, opts: &ChainOptions) -> Result<Self> {
        Ok(Self {
            netlist: build_chain_netlist_with(cfg, sensor, opts)?,
            cfg: cfg.clone(),
            sensor: sensor.clone(),
        })
    }

    pub fn netlist(&self) -> &Netlist {
        &self.netlist
    }

    fn output_for(&self, sys: &AcSystem, excitations: &[(&str, Complex64)]) -> Result<Complex64> {
        let sol = sys.solve(&sys.rhs(excitations)?);
        sol.voltage_at(&self.netlist, OUTPUT_NODE)
    }

    /// v_out per coulomb of differential input charge, V/C.
    pub fn gain(&self, f: f64) -> Result<Complex64> {
        let sys = AcSystem::assemble(&self.netlist, check_freq(f)?)?;
        self.gain_with(&sys)
    }

    fn gain_with(&self, sys: &AcSystem) -> Result<Complex64> {
        // 1 C of charge enters as a current jω.
        let i = Complex64::new(0.0, 2.0 * PI * sys.freq());
        self.output_for(sys, &[(CHARGE_TEST_SOURCE, i)])
    }

    /// v_out per volt of open-circuit piezo voltage.
    pub fn piezo_voltage_gain(&self, f: f64) -> Result<Complex64> {
        let sys = AcSystem::assemble(&self.netlist, check_freq(f)?)?;
        self.output_for(&sys, &[(PIEZO_SOURCE, Complex64::new(1.0, 0.0))])
    }

    /// v_out per coulomb injected equally into both inputs, V/C.
    pub fn common_mode_gain(&self, f: f64) -> Result<Complex64> {
        let sys = AcSystem::assemble(&self.netlist, check_freq(f)?)?;
        let i = Complex64::new(0.0, 2.0 * PI * f);
        self.output_for(&sys, &[(IN_OA1_A, i), (IN_OA1_B, i)])
    }

    /// Noise generators present in the netlist with their densities at `f`.
    pub fn noise_sources(&self, oa1: &OpAmpModel, oa2: &OpAmpModel, f: f64) -> Vec<NoiseSource> {
        let kt4 = 4.0 * BOLTZMANN * self.cfg.temperature;
        let mut v = vec![
            NoiseSource { element: IN_RF_A, group: NoiseGroup::Johnson, density: kt4 / self.cfg.r_f },
            NoiseSource { element: IN_RF_B, group: NoiseGroup::Johnson, density: kt4 / self.cfg.r_f },
            NoiseSource { element: EN_OA1_A, group: NoiseGroup::Oa1Voltage, density: oa1.voltage_density(f) },
            NoiseSource { element: EN_OA1_B, group: NoiseGroup::Oa1Voltage, density: oa1.voltage_density(f) },
            NoiseSource { element: IN_OA1_A, group: NoiseGroup::Oa1Current, density: oa1.current_density(f) },
            NoiseSource { element: IN_OA1_B, group: NoiseGroup::Oa1Current, density: oa1.current_density(f) },
            NoiseSource { element: EN_OA2, group: NoiseGroup::Oa2Voltage, density: oa2.voltage_density(f) },
        ];
        if self.sensor.has_leakage() {
            v.push(NoiseSource { element: IN_RPAR, group: NoiseGroup::Johnson, density: kt4 / self.sensor.r_par });
        }
        v
    }

    /// Input-referred noise by superposition: each generator is driven alone
    /// at unit amplitude, its output power is weighted by its density, and
    /// the per-group sums are referred back through the chain's own gain.
    /// Returned as current densities (A²/Hz) so they compare term by term
    /// with [`NoiseTerms`].
    pub fn noise(&self, oa1: &OpAmpModel, oa2: &OpAmpModel, f: f64) -> Result<NoiseTerms> {
        let sys = AcSystem::assemble(&self.netlist, check_freq(f)?)?;
        let g = self.gain_with(&sys)?.norm_sqr();
        let w = 2.0 * PI * f;
        let mut t = NoiseTerms { freq: f, johnson: 0.0, oa1_voltage: 0.0, oa1_current: 0.0, oa2_voltage: 0.0 };
        for src in self.noise_sources(oa1, oa2, f) {
            let v = self.output_for(&sys, &[(src.element, Complex64::new(1.0, 0.0))])?;
            // Output power -> input charge -> input current.
            let p = v.norm_sqr() * src.density / g * w * w;
            match src.group {
                NoiseGroup::Johnson => t.johnson += p,
                NoiseGroup::Oa1Voltage => t.oa1_voltage += p,
                NoiseGroup::Oa1Current => t.oa1_current += p,
                NoiseGroup::Oa2Voltage => t.oa2_voltage += p,
            }
        }
        Ok(t)
    }

    /// |gain| at [`PLATEAU_FREQ`].
    pub fn plateau_gain(&self) -> Result<f64> {
        Ok(self.gain(PLATEAU_FREQ)?.norm())
    }

    /// -3 dB cut-on of the netlist gain relative to its plateau, Hz.
    pub fn cuton(&self) -> Result<f64> {
        let target = self.plateau_gain()? / SQRT_2;
        let (lo, hi) = CUTON_SEARCH_BAND;
        find_rising_crossing(|f| Ok(self.gain(f)?.norm()), target, lo, hi, CUTON_REL_TOL)
    }

    /// Max relative residual of the solve with the charge injector driven.
    pub fn residual(&self, f: f64) -> Result<f64> {
        let sys = AcSystem::assemble(&self.netlist, check_freq(f)?)?;
        let i = Complex64::new(0.0, 2.0 * PI * f);
        Ok(sys.solve(&sys.rhs(&[(CHARGE_TEST_SOURCE, i)])?).residual)
    }
}
