use serde::{Deserialize, Serialize};

use crate::detector::DetectorModel;
use crate::dsp::{band_average, db_diff, to_db, Spectrum, SpectrumUnits};
use crate::error::{Error, Result};

/// dB added to the single-diode tone when all power lands on one diode:
/// twice the current amplitude of a balanced arm, four times the power.
pub const ADDITION_CORRECTION_DB: f64 = 6.020_599_913_279_624;

fn check_fraction(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v <= 1.0) {
        return Err(Error::Domain(format!("{name} must be in (0, 1], got {v}")));
    }
    Ok(())
}

/// `eta_total / eta_qe`.
pub fn decouple_coupling(eta_total: f64, eta_qe: f64) -> Result<f64> {
    check_fraction("eta_qe", eta_qe)?;
    if !(eta_total >= 0.0) {
        return Err(Error::Domain(format!("eta_total must be nonnegative, got {eta_total}")));
    }
    if eta_total > eta_qe {
        return Err(Error::InconsistentEfficiencies { eta_total, eta_qe });
    }
    Ok(eta_total / eta_qe)
}

/// `(SNR - 1) / SNR` with `SNR = 10^(snr_db / 10)`.
pub fn eta_snr(snr_db: f64) -> Result<f64> {
    if !(snr_db > 0.0) {
        return Err(Error::Domain(format!("clearance must be positive, got {snr_db} dB")));
    }
    Ok(-(-snr_db / 10.0 * std::f64::consts::LN_10).exp_m1())
}

pub fn total_efficiency(eta_snr: f64, eta_coup: f64, eta_qe: f64) -> Result<f64> {
    check_fraction("eta_snr", eta_snr)?;
    check_fraction("eta_coup", eta_coup)?;
    check_fraction("eta_qe", eta_qe)?;
    Ok(eta_snr * eta_coup * eta_qe)
}

/// Illuminated-over-dark noise level in dB at `f`.
pub fn clearance(shot: &Spectrum, dark: &Spectrum, f: f64) -> Result<f64> {
    db_diff(shot, dark, f)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cmrr {
    pub cmrr_db: f64,
    /// Addition-over-balanced tone ratio before the correction.
    pub raw_db: f64,
    /// The balanced tone is not below the addition tone.
    pub degenerate: bool,
}

pub fn cmrr_from_raw_db(raw_db: f64) -> Cmrr {
    Cmrr { cmrr_db: raw_db - ADDITION_CORRECTION_DB, raw_db, degenerate: raw_db <= 0.0 }
}

/// Largest PSD value within one RBW of `f`.
fn tone_level(spec: &Spectrum, f: f64) -> Result<f64> {
    let (min, max) = (spec.freqs[0], spec.freqs[spec.len() - 1]);
    if !(f >= min && f <= max) {
        return Err(Error::BandOutOfRange { lo: f, hi: f, min, max });
    }
    let half = spec.rbw.max(spec.freqs.get(1).map_or(0.0, |f1| f1 - spec.freqs[0]));
    let peak = spec
        .freqs
        .iter()
        .zip(&spec.psd)
        .filter(|(fi, _)| (**fi - f).abs() <= half)
        .map(|(_, v)| *v)
        .fold(f64::NEG_INFINITY, f64::max);
    if peak.is_finite() {
        Ok(peak)
    } else {
        spec.value_at(f)
    }
}

fn linear(spec: &Spectrum) -> Spectrum {
    match spec.units {
        SpectrumUnits::V2PerHz => spec.clone(),
        SpectrumUnits::DbmInRbw => spec.map(|_, v| 10f64.powf(v / 10.0)),
    }
}

/// Common-mode rejection from the repetition-rate tone: the addition tone
/// over the balanced tone, less [`ADDITION_CORRECTION_DB`]. Each tone is
/// read as the spectrum's peak within one RBW of `rep_rate`.
pub fn cmrr(balanced: &Spectrum, addition: &Spectrum, rep_rate: f64) -> Result<Cmrr> {
    if balanced.units != addition.units {
        return Err(Error::Config("balanced and addition spectra use different units".into()));
    }
    let b = tone_level(&linear(balanced), rep_rate)?;
    let a = tone_level(&linear(addition), rep_rate)?;
    let raw_db = to_db(a / b)?;
    Ok(cmrr_from_raw_db(raw_db))
}

/// Input-referred electronic current noise: the dark output PSD divided by
/// `R_f^2 |r(f)|^2`, band-averaged, square-rooted.
pub fn electronic_current_noise_density(dark: &Spectrum, model: &DetectorModel, band: (f64, f64)) -> Result<f64> {
    if dark.units != SpectrumUnits::V2PerHz {
        return Err(Error::Config("dark spectrum must be in V^2/Hz".into()));
    }
    let shape = model.response();
    let rf2 = model.feedback.gain_resistor.powi(2);
    let referred = dark.map(|f, s| s / (rf2 * shape.gain(f)));
    Ok(band_average(&referred, band.0, band.1)?.max(0.0).sqrt())
}
