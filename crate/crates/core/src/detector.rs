//! Closed-form physics of the balanced detector.
//!
//! The transimpedance stage is treated as a second-order low-pass whose
//! normalized power response is
//!
//! ```text
//! |r(f)|^2 = 1 / (1 + (p^2 - 2) x^2 + x^4),   x = f / f_star
//! ```
//!
//! with `p` and `f_star` either derived from the circuit values
//! ([`butterworth_params`]) or taken from a measured fit
//! ([`DetectorModel::measured_response`]).
//!
//! Conventions used throughout:
//!
//! * PSDs are single-sided, in V^2/Hz at the amplifier output or A^2/Hz at
//!   its input.
//! * Shot noise of the photocurrent is `2 q I` (single-sided).
//! * The LO power is the power delivered to the input of the 50:50 splitter.
//!   In balanced operation the split is trimmed so both photocurrents are
//!   equal; blocking one arm leaves the other arm's share unchanged.

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, SQRT_2};

use crate::constants::{ideal_responsivity, ELEMENTARY_CHARGE};
use crate::error::{Error, Result};

/// Label recorded in every output that carries an `f_star`.
pub const F_STAR_CONVENTION: &str = "f_star_hz = omega_star / (2 pi)";
/// PSD sidedness label recorded in every output.
pub const PSD_CONVENTION: &str = "single-sided";
/// dB definition label recorded in every output.
pub const DB_CONVENTION: &str = "10 log10(power ratio)";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhotodiodeParams {
    /// A/W at the operating wavelength.
    pub responsivity: f64,
    /// F
    pub junction_capacitance: f64,
    /// Ohm
    pub shunt_resistance: f64,
    /// A
    pub dark_current: f64,
    /// m
    pub active_diameter: f64,
    /// V
    pub reverse_bias: f64,
    pub quantum_efficiency: f64,
    pub coupling_efficiency: f64,
}

impl PhotodiodeParams {
    /// Amps of photocurrent per watt incident on the fibre launch.
    pub fn conversion_gain(&self) -> f64 {
        self.coupling_efficiency * self.responsivity
    }

    /// Coupling times responsivity over the unity-QE responsivity.
    pub fn total_efficiency(&self, wavelength: f64) -> f64 {
        self.conversion_gain() / ideal_responsivity(wavelength)
    }

    pub fn validate(&self, wavelength: f64) -> Result<()> {
        let fields = [
            ("responsivity", self.responsivity),
            ("junction_capacitance", self.junction_capacitance),
            ("shunt_resistance", self.shunt_resistance),
            ("dark_current", self.dark_current),
            ("active_diameter", self.active_diameter),
            ("reverse_bias", self.reverse_bias),
            ("quantum_efficiency", self.quantum_efficiency),
            ("coupling_efficiency", self.coupling_efficiency),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("photodiode {name} must be nonnegative, got {v}")));
            }
        }
        if self.quantum_efficiency > 1.0 || self.coupling_efficiency > 1.0 {
            return Err(Error::Config("photodiode efficiencies must not exceed 1".into()));
        }
        let limit = ideal_responsivity(wavelength);
        if self.responsivity > limit {
            return Err(Error::Config(format!(
                "responsivity {} A/W exceeds the unity-QE bound {limit:.4} A/W",
                self.responsivity
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpAmpParams {
    /// Hz
    pub gain_bandwidth_product: f64,
    /// V/sqrt(Hz)
    pub voltage_noise: f64,
    /// A/sqrt(Hz)
    pub current_noise: f64,
    /// F
    pub input_capacitance: f64,
    /// A
    pub input_bias_offset_current: f64,
    /// Magnitude of the rail-to-rail output limit, V.
    pub output_swing: f64,
}

impl OpAmpParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("gain_bandwidth_product", self.gain_bandwidth_product),
            ("voltage_noise", self.voltage_noise),
            ("current_noise", self.current_noise),
            ("input_capacitance", self.input_capacitance),
            ("input_bias_offset_current", self.input_bias_offset_current),
            ("output_swing", self.output_swing),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("op-amp {name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeedbackNetwork {
    /// Ohm
    pub gain_resistor: f64,
    /// F
    pub feedback_capacitor: f64,
}

/// Normalized second-order response `(p, f_star)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ButterworthShape {
    pub p: f64,
    /// Hz, see [`F_STAR_CONVENTION`].
    pub f_star: f64,
}

impl ButterworthShape {
    pub fn new(p: f64, f_star: f64) -> Result<Self> {
        if !(p.is_finite() && p > 0.0 && f_star.is_finite() && f_star > 0.0) {
            return Err(Error::Domain(format!("invalid Butterworth shape p={p}, f_star={f_star}")));
        }
        Ok(ButterworthShape { p, f_star })
    }

    /// Maximally flat response at the given corner.
    pub fn flat(f_star: f64) -> Self {
        ButterworthShape { p: SQRT_2, f_star }
    }

    pub fn is_maximally_flat(&self) -> bool {
        (self.p - SQRT_2).abs() <= 1e-12
    }

    /// `|r(f)|^2` at one frequency.
    pub fn gain(&self, f: f64) -> f64 {
        let x2 = (f / self.f_star).powi(2);
        1.0 / (1.0 + (self.p * self.p - 2.0) * x2 + x2 * x2)
    }

    /// Complex response `1 / (1 - x^2 + i p x)`; its squared magnitude is [`Self::gain`].
    pub fn transfer(&self, f: f64) -> Complex64 {
        let x = f / self.f_star;
        Complex64::new(1.0 - x * x, self.p * x).inv()
    }

    /// Frequency of maximum response; zero when the response is monotone.
    pub fn peak_frequency(&self) -> f64 {
        let x2 = (2.0 - self.p * self.p) / 2.0;
        if x2 > 0.0 {
            self.f_star * x2.sqrt()
        } else {
            0.0
        }
    }

    pub fn peak_gain(&self) -> f64 {
        self.gain(self.peak_frequency())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorModel {
    pub pd_plus: PhotodiodeParams,
    pub pd_minus: PhotodiodeParams,
    pub opamp: OpAmpParams,
    pub feedback: FeedbackNetwork,
    /// Input-referred flat current noise of the dark detector, A/sqrt(Hz).
    ///
    /// This is the whole floor measured with the light off, so it already
    /// contains the shot noise of the diode dark currents.
    pub electronic_noise_density: f64,
    /// V
    pub v_offset: f64,
    /// Spectrum-analyser input impedance, Ohm.
    pub sa_impedance: f64,
    /// Response to use instead of the circuit-derived one, typically a fit
    /// to a measured gain spectrum.
    pub measured_response: Option<ButterworthShape>,
}

impl DetectorModel {
    pub fn validate(&self, wavelength: f64) -> Result<()> {
        self.pd_plus.validate(wavelength)?;
        self.pd_minus.validate(wavelength)?;
        self.opamp.validate()?;
        if !(self.feedback.gain_resistor > 0.0 && self.feedback.feedback_capacitor > 0.0) {
            return Err(Error::Config("feedback network values must be positive".into()));
        }
        if !(self.sa_impedance > 0.0) {
            return Err(Error::Config("sa_impedance must be positive".into()));
        }
        if !(self.electronic_noise_density >= 0.0) {
            return Err(Error::Config("electronic_noise_density must be nonnegative".into()));
        }
        if !self.v_offset.is_finite() {
            return Err(Error::Config("v_offset must be finite".into()));
        }
        if let Some(shape) = self.measured_response {
            ButterworthShape::new(shape.p, shape.f_star)?;
        }
        Ok(())
    }

    /// Response used by the simulator and by noise referral.
    pub fn response(&self) -> ButterworthShape {
        self.measured_response.unwrap_or_else(|| butterworth_params(self))
    }

    /// Fractions of LO power sent to (PD+, PD-) when balanced: chosen so that
    /// both mean photocurrents are equal.
    pub fn balanced_split(&self) -> (f64, f64) {
        let gp = self.pd_plus.conversion_gain();
        let gm = self.pd_minus.conversion_gain();
        if gp + gm == 0.0 {
            return (0.5, 0.5);
        }
        (gm / (gp + gm), gp / (gp + gm))
    }

    /// Mean photocurrents (PD+, PD-) excluding dark current for total LO power `power`.
    pub fn photocurrents(&self, power: f64, illumination: Illumination) -> (f64, f64) {
        let (sp, sm) = self.balanced_split();
        let ip = self.pd_plus.conversion_gain() * sp * power;
        let im = self.pd_minus.conversion_gain() * sm * power;
        match illumination {
            Illumination::Balanced => (ip, im),
            Illumination::Plus => (ip, 0.0),
            Illumination::Minus => (0.0, im),
        }
    }

    /// Total photocurrent (both diodes) in balanced operation per watt of LO.
    pub fn balanced_current_per_watt(&self) -> f64 {
        let (ip, im) = self.photocurrents(1.0, Illumination::Balanced);
        ip + im
    }
}

/// Which arms are illuminated for a DC measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Illumination {
    /// PD- blocked.
    Plus,
    /// PD+ blocked.
    Minus,
    Balanced,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalOscillator {
    /// m
    pub wavelength: f64,
    /// W, delivered to the 50:50 splitter.
    pub average_power: f64,
    /// Hz
    pub repetition_rate: f64,
    /// s
    pub pulse_fwhm: f64,
    /// Single-sided relative intensity noise, 1/Hz.
    pub rin_density: f64,
}

impl LocalOscillator {
    pub fn with_power(mut self, power: f64) -> Self {
        self.average_power = power;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.wavelength > 0.0) {
            return Err(Error::Config("LO wavelength must be positive".into()));
        }
        if !(self.repetition_rate > 0.0) {
            return Err(Error::Config("LO repetition rate must be positive".into()));
        }
        if !(self.average_power >= 0.0 && self.rin_density >= 0.0 && self.pulse_fwhm >= 0.0) {
            return Err(Error::Config("LO power, RIN and pulse width must be nonnegative".into()));
        }
        if self.pulse_fwhm >= 1.0 / self.repetition_rate {
            return Err(Error::Config("pulse FWHM must be shorter than the repetition period".into()));
        }
        Ok(())
    }
}

/// Circuit-derived response. The closed form yields `omega_star` in rad/s
/// from the gain-bandwidth product taken in Hz; it is reported as
/// `f_star = omega_star / 2 pi`.
pub fn butterworth_params(model: &DetectorModel) -> ButterworthShape {
    let gbw = model.opamp.gain_bandwidth_product;
    let c_total =
        2.0 * model.pd_plus.junction_capacitance + model.feedback.feedback_capacitor + model.opamp.input_capacitance;
    let omega_star = (gbw / (2.0 * PI * c_total)).sqrt();
    let p = (2.0 * PI * model.feedback.gain_resistor * model.feedback.feedback_capacitor + 1.0 / gbw) * omega_star;
    ButterworthShape { p, f_star: omega_star / (2.0 * PI) }
}

pub fn gain_spectrum(shape: &ButterworthShape, freqs: &[f64]) -> Vec<f64> {
    freqs.iter().map(|&f| shape.gain(f)).collect()
}

/// DC output voltage, `R_f (I+ - I-) + V_offset`.
///
/// Dark currents are taken as nulled into `v_offset`.
pub fn dc_voltage(model: &DetectorModel, lo: &LocalOscillator, illumination: Illumination) -> Result<f64> {
    let (ip, im) = model.photocurrents(lo.average_power, illumination);
    let v = model.feedback.gain_resistor * (ip - im) + model.v_offset;
    if v.abs() >= model.opamp.output_swing {
        return Err(Error::Saturation { volts: v, rail: model.opamp.output_swing });
    }
    Ok(v)
}

/// Input-referred photocurrent shot-noise density `2 q I` in balanced operation, A^2/Hz.
pub fn shot_noise_density(model: &DetectorModel, power: f64) -> f64 {
    2.0 * ELEMENTARY_CHARGE * model.balanced_current_per_watt() * power
}

/// Output PSD in V^2/Hz: `R_f^2 (2 q I + i_e^2) |r(f)|^2`.
pub fn analytic_output_psd(model: &DetectorModel, lo: &LocalOscillator, freqs: &[f64]) -> Vec<f64> {
    let shape = model.response();
    let rf2 = model.feedback.gain_resistor.powi(2);
    let input = shot_noise_density(model, lo.average_power) + model.electronic_noise_density.powi(2);
    freqs.iter().map(|&f| rf2 * input * shape.gain(f)).collect()
}

/// Power read by the analyser in a band of width `rbw` about `center`:
/// `(2 / R_imp) * integral of S_V over [center - rbw/2, center + rbw/2]`.
///
/// `psd` is sampled on `freqs` and integrated piecewise-linearly.
pub fn sa_power(freqs: &[f64], psd: &[f64], center: f64, rbw: f64, impedance: f64) -> Result<f64> {
    if !(rbw > 0.0) {
        return Err(Error::Domain(format!("rbw must be positive, got {rbw}")));
    }
    let lo = center - rbw / 2.0;
    let hi = center + rbw / 2.0;
    Ok(2.0 / impedance * integrate_linear(freqs, psd, lo, hi)?)
}

/// Integral of the piecewise-linear interpolant of `(xs, ys)` over `[a, b]`.
pub(crate) fn integrate_linear(xs: &[f64], ys: &[f64], a: f64, b: f64) -> Result<f64> {
    let (min, max) = match (xs.first(), xs.last()) {
        (Some(&min), Some(&max)) => (min, max),
        _ => return Err(Error::BandOutOfRange { lo: a, hi: b, min: f64::NAN, max: f64::NAN }),
    };
    if a < min || b > max || a > b {
        return Err(Error::BandOutOfRange { lo: a, hi: b, min, max });
    }
    let mut total = 0.0;
    for i in 0..xs.len().saturating_sub(1) {
        let (x0, x1) = (xs[i], xs[i + 1]);
        let lo = x0.max(a);
        let hi = x1.min(b);
        if hi <= lo {
            continue;
        }
        let slope = (ys[i + 1] - ys[i]) / (x1 - x0);
        let y_lo = ys[i] + slope * (lo - x0);
        let y_hi = ys[i] + slope * (hi - x0);
        total += 0.5 * (y_lo + y_hi) * (hi - lo);
    }
    Ok(total)
}

/// Shot-noise-equivalent power: the total LO power at which the balanced
/// photocurrent shot noise `2 q I` equals `i_e^2`.
pub fn snep(model: &DetectorModel) -> f64 {
    let ie2 = model.electronic_noise_density.powi(2);
    if ie2 == 0.0 {
        return 0.0;
    }
    ie2 / (2.0 * ELEMENTARY_CHARGE * model.balanced_current_per_watt())
}

/// Definition string reported next to [`snep`].
pub const SNEP_DEFINITION: &str = "total LO power where 2 q (I+ + I-) = i_e^2, balanced split";

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::paper_2um;
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn table_values_give_golden_shape() {
        // Evaluated independently at 30 significant digits.
        let (model, _) = paper_2um();
        let shape = butterworth_params(&model);
        assert!(rel(shape.p, 193.927_735_244_424_2) < 1e-12, "p = {}", shape.p);
        assert!(rel(shape.f_star, 262_431_827.631_916_8) < 1e-12, "f_star = {}", shape.f_star);
    }

    #[test]
    fn doubling_junction_capacitance_scales_corner() {
        let (mut model, _) = paper_2um();
        model.measured_response = None;
        let before = butterworth_params(&model).f_star;
        let (cpd, cf, coa): (f64, f64, f64) = (9e-12, 4.7e-12, 1.3e-12);
        model.pd_plus.junction_capacitance *= 2.0;
        model.pd_minus.junction_capacitance *= 2.0;
        let after = butterworth_params(&model).f_star;
        let expected = ((2.0 * cpd + cf + coa) / (4.0 * cpd + cf + coa)).sqrt();
        assert!(rel(after / before, expected) < 1e-12);
    }

    #[test]
    fn shape_matches_direct_closed_form() {
        // p = 1, f_star = 1/(2 pi): omega* = 1 rad/s, so |r|^2 at f = 1/(2 pi) is 1/(1 - 1 + 1).
        let shape = ButterworthShape::new(1.0, 1.0 / (2.0 * PI)).unwrap();
        assert!((shape.gain(1.0 / (2.0 * PI)) - 1.0).abs() < 1e-15);
        let f = 2.0 / (2.0 * PI);
        assert!((shape.gain(f) - 1.0 / (1.0 - 4.0 + 16.0)).abs() < 1e-15);
        assert!((shape.transfer(f).norm_sqr() - shape.gain(f)).abs() < 1e-15);
    }

    #[test]
    fn gain_spectrum_edges() {
        let shape = ButterworthShape::flat(10e6);
        let g = gain_spectrum(&shape, &[0.0, 10e6]);
        assert_eq!(g[0], 1.0);
        assert!((g[1] - 0.5).abs() < 1e-15);
        assert!(shape.is_maximally_flat());
    }

    #[test]
    fn dc_voltage_dark_and_balanced() {
        let (model, lo) = paper_2um();
        for ill in [Illumination::Plus, Illumination::Minus, Illumination::Balanced] {
            let v = dc_voltage(&model, &lo.with_power(0.0), ill).unwrap();
            assert_eq!(v, 2.4e-3);
        }
        // the trimmed split nulls the balanced output at every power
        let v = dc_voltage(&model, &lo.with_power(1.5e-3), Illumination::Balanced).unwrap();
        assert!((v - 2.4e-3).abs() < 1e-15);
    }

    #[test]
    fn dc_slope_is_total_efficiency() {
        let (model, lo) = paper_2um();
        let (sp, _) = model.balanced_split();
        let p = 0.4e-3;
        let v0 = dc_voltage(&model, &lo.with_power(0.0), Illumination::Plus).unwrap();
        let v1 = dc_voltage(&model, &lo.with_power(p), Illumination::Plus).unwrap();
        let slope = (v1 - v0) / (sp * p);
        let expected = 0.653 * ideal_responsivity(2.07e-6) * 3900.0;
        assert!(rel(slope, expected) < 1e-12);
        let vm = dc_voltage(&model, &lo.with_power(p), Illumination::Minus).unwrap();
        assert!(vm < v0);
    }

    #[test]
    fn dc_voltage_saturates() {
        let (model, lo) = paper_2um();
        let err = dc_voltage(&model, &lo.with_power(5e-3), Illumination::Plus).unwrap_err();
        assert!(matches!(err, Error::Saturation { .. }));
    }

    #[test]
    fn dark_psd_is_electronic_floor() {
        let (model, lo) = paper_2um();
        let freqs = [1e6, 5e6, 20e6];
        let psd = analytic_output_psd(&model, &lo.with_power(0.0), &freqs);
        let shape = model.response();
        for (f, s) in freqs.iter().zip(psd) {
            let expected = (3900.0f64 * 2.79e-12).powi(2) * shape.gain(*f);
            assert!(rel(s, expected) < 1e-14);
        }
    }

    #[test]
    fn clearance_near_knee_by_plug_in() {
        // Plug-in oracle: 2 q I / i_e^2 with I = harmonic-mean gain * P.
        let (model, lo) = paper_2um();
        let lit = analytic_output_psd(&model, &lo.with_power(1.8e-3), &[5e6])[0];
        let dark = analytic_output_psd(&model, &lo.with_power(0.0), &[5e6])[0];
        let clearance = 10.0 * (lit / dark).log10();
        assert!((clearance - 19.149_457_589_468_4).abs() < 1e-9, "{clearance}");
    }

    #[test]
    fn sa_power_flat_and_scaling() {
        let freqs: Vec<f64> = (0..=100).map(|i| i as f64 * 1e5).collect();
        let psd = vec![3e-15; freqs.len()];
        let p = sa_power(&freqs, &psd, 5e6, 3e5, 50.0).unwrap();
        assert!(rel(p, 2.0 * 3e-15 * 3e5 / 50.0) < 1e-12);
        let half = sa_power(&freqs, &psd, 5e6, 3e5, 25.0).unwrap();
        assert!(rel(half, 2.0 * p) < 1e-12);
        assert!(sa_power(&freqs, &psd, 5e6, 1e-30, 50.0).unwrap() < 1e-40);
        assert!(matches!(sa_power(&freqs, &psd, 9.99e6, 3e5, 50.0), Err(Error::BandOutOfRange { .. })));
    }

    #[test]
    fn snep_scaling() {
        let (mut model, _) = paper_2um();
        // i_e^2 / (2 q I_per_watt) with harmonic-mean split, 30-digit oracle
        assert!(rel(snep(&model), 2.216_366_738_197_778e-5) < 1e-9, "{}", snep(&model));
        let base = snep(&model);
        model.electronic_noise_density *= 2.0;
        assert!(rel(snep(&model), 4.0 * base) < 1e-12);
        model.electronic_noise_density = 0.0;
        assert_eq!(snep(&model), 0.0);
    }

    proptest! {
        #[test]
        fn gain_monotone_beyond_peak(p in 0.05f64..2.0, f_star in 1e3f64..1e9, a in 0.0f64..10.0, b in 0.0f64..10.0) {
            let shape = ButterworthShape::new(p, f_star).unwrap();
            let start = shape.peak_frequency();
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let g_lo = shape.gain(start + lo * f_star);
            let g_hi = shape.gain(start + hi * f_star);
            prop_assert!(g_hi <= g_lo * (1.0 + 1e-12));
            prop_assert_eq!(shape.gain(0.0), 1.0);
        }

        #[test]
        fn psd_excess_proportional_to_power(p_mw in 0.01f64..3.0, f in 0.0f64..100e6) {
            let (model, lo) = paper_2um();
            let dark = analytic_output_psd(&model, &lo.with_power(0.0), &[f])[0];
            let one = analytic_output_psd(&model, &lo.with_power(p_mw * 1e-3), &[f])[0] - dark;
            let two = analytic_output_psd(&model, &lo.with_power(2.0 * p_mw * 1e-3), &[f])[0] - dark;
            prop_assert!(((two / one) - 2.0).abs() < 1e-9);
        }

        #[test]
        fn dc_arms_antisymmetric(p_mw in 0.0f64..0.5) {
            let (mut model, lo) = paper_2um();
            model.pd_minus = model.pd_plus;
            let lo = lo.with_power(p_mw * 1e-3);
            let vp = dc_voltage(&model, &lo, Illumination::Plus).unwrap();
            let vm = dc_voltage(&model, &lo, Illumination::Minus).unwrap();
            prop_assert!((vp + vm - 2.0 * model.v_offset).abs() < 1e-14);
        }

        #[test]
        fn sa_power_additive(c in 2e6f64..8e6, w1 in 1e4f64..5e5, w2 in 1e4f64..5e5) {
            let freqs: Vec<f64> = (0..=200).map(|i| i as f64 * 5e4).collect();
            let psd: Vec<f64> = freqs.iter().map(|f| 1e-15 * (1.0 + (f / 1e6).sin().abs())).collect();
            let whole = sa_power(&freqs, &psd, c, w1 + w2, 50.0).unwrap();
            let left = sa_power(&freqs, &psd, c - (w1 + w2) / 2.0 + w1 / 2.0, w1, 50.0).unwrap();
            let right = sa_power(&freqs, &psd, c + (w1 + w2) / 2.0 - w2 / 2.0, w2, 50.0).unwrap();
            prop_assert!(((left + right) - whole).abs() <= 1e-9 * whole);
        }
    }
}
