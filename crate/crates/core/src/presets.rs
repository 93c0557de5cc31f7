//! Built-in detector and laser configurations.

use std::f64::consts::PI;

use crate::constants::ideal_responsivity;
use crate::detector::{
    ButterworthShape, DetectorModel, FeedbackNetwork, LocalOscillator, OpAmpParams, PhotodiodeParams,
};
use crate::error::{Error, Result};

pub const PAPER_2UM: &str = "paper-2um";

/// Names accepted by [`by_name`].
pub const NAMES: &[&str] = &[PAPER_2UM];

const WAVELENGTH: f64 = 2.07e-6;
const RESPONSIVITY: f64 = 1.45;
const QUANTUM_EFFICIENCY: f64 = 0.865;

/// Extended-InGaAs detector built around an ADA4817 TIA, probed with a
/// 39.5 MHz mode-locked laser at 2.07 um.
///
/// Coupling efficiencies are set so that coupling times responsivity over
/// the unity-QE responsivity gives total efficiencies of 65.3 % (PD+) and
/// 66 % (PD-). The measured response uses p = 1.12 with the fitted 61 MHz
/// read as an angular corner, f_star = 61 MHz / 2 pi.
pub fn paper_2um() -> (DetectorModel, LocalOscillator) {
    let r_ideal = ideal_responsivity(WAVELENGTH);
    let diode = |eta_total: f64| PhotodiodeParams {
        responsivity: RESPONSIVITY,
        junction_capacitance: 9e-12,
        shunt_resistance: 60e3,
        dark_current: 20e-6,
        active_diameter: 250e-6,
        reverse_bias: 2.4,
        quantum_efficiency: QUANTUM_EFFICIENCY,
        coupling_efficiency: eta_total * r_ideal / RESPONSIVITY,
    };
    let model = DetectorModel {
        pd_plus: diode(0.653),
        pd_minus: diode(0.66),
        opamp: OpAmpParams {
            gain_bandwidth_product: 410e6,
            voltage_noise: 4e-9,
            current_noise: 2.5e-15,
            input_capacitance: 1.3e-12,
            input_bias_offset_current: 1e-12,
            output_swing: 3.9,
        },
        feedback: FeedbackNetwork { gain_resistor: 3.9e3, feedback_capacitor: 4.7e-12 },
        electronic_noise_density: 2.79e-12,
        v_offset: 2.4e-3,
        sa_impedance: 50.0,
        measured_response: Some(ButterworthShape { p: 1.12, f_star: 61e6 / (2.0 * PI) }),
    };
    let lo = LocalOscillator {
        wavelength: WAVELENGTH,
        average_power: 1e-3,
        repetition_rate: 39.5e6,
        pulse_fwhm: 1e-12,
        rin_density: 0.0,
    };
    (model, lo)
}

pub fn by_name(name: &str) -> Result<(DetectorModel, LocalOscillator)> {
    match name {
        PAPER_2UM => Ok(paper_2um()),
        other => Err(Error::Config(format!("unknown preset '{other}', known: {}", NAMES.join(", ")))),
    }
}
