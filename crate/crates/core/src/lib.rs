//! Digital twin of a 2 um balanced homodyne detector and the pipeline used
//! to characterize it: DC efficiency, gain spectrum, shot-noise linearity,
//! saturation, common-mode rejection, clearance and total efficiency.
//!
//! * [`detector`] closed-form response, DC level and noise spectra.
//! * [`synth`] seeded Monte-Carlo traces for each optical configuration.
//! * [`dsp`] spectrum-analyser emulation.
//! * [`analysis`] figure-of-merit extraction and the full characterization.
//! * [`config`] and [`cli`] file formats and the command-line front end.

// `!(x > 0.0)` guards also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod config;
pub mod constants;
pub mod detector;
pub mod dsp;
pub mod error;
pub mod presets;
pub mod synth;
pub mod trace;

pub use detector::{ButterworthShape, DetectorModel, Illumination, LocalOscillator};
pub use dsp::Spectrum;
pub use error::{Error, Result};
pub use synth::{Scenario, ScenarioKind, SynthConfig};
pub use trace::{TimeTrace, Units};
