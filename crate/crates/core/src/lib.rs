//! Models and analysis tools for a piezoelectric sensor read out by a
//! differential charge amplifier.
//!
//! The closed-form gain and noise models live in [`circuit`] and [`noise`];
//! [`mna`] re-derives the same quantities from a component netlist.

pub mod acoustics;
pub mod circuit;
pub mod dsp;
pub mod error;
pub mod explore;
pub mod mna;
pub mod noise;
pub mod opamp;
pub mod quad;
pub mod spectrum;

pub use acoustics::{Band, EinBand, PinnaGainTable, SensitivitySpectrum};
pub use circuit::{AmplifierConfig, SensorModel};
pub use dsp::{LevelSweep, LinearityFit, TimeSeries};
pub use error::{Error, Result};
pub use explore::{DesignPoint, Metrics, SweepSpec};
pub use noise::NoiseTerms;
pub use opamp::{OpAmpModel, Registry};
pub use spectrum::{Spectrum, TransferFunction, Unit};
