//! Characterization report and its two file formats.
//!
//! The flat format is one `key = value` per line, keys sorted, `#` comments
//! allowed. Missing quantities are written as `unavailable`. Numbers, lists
//! and booleans are written as JSON literals; anything else is a bare string.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::detector::{DB_CONVENTION, F_STAR_CONVENTION, PSD_CONVENTION, SNEP_DEFINITION};
use crate::error::{Error, Result};

pub const UNAVAILABLE: &str = "unavailable";

/// Every quantity extracted by a characterization run.
///
/// Frequencies are in Hz, powers in W, spectral densities as named.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacterizationReport {
    pub seed: u64,
    pub wavelength_m: f64,
    pub eta_qe: f64,

    pub eta_total_plus: Option<f64>,
    pub eta_total_plus_stderr: Option<f64>,
    pub eta_total_minus: Option<f64>,
    pub eta_total_minus_stderr: Option<f64>,
    pub eta_coup: Option<f64>,

    pub butterworth_p: Option<f64>,
    pub butterworth_f_star_hz: Option<f64>,
    /// `2 pi f_star`
    pub butterworth_omega_star_rad_per_s: Option<f64>,
    pub butterworth_scale: Option<f64>,
    pub butterworth_r_squared: Option<f64>,
    pub bandwidth_3db_hz: Option<f64>,
    pub bandwidth_3db_peak_relative_hz: Option<f64>,
    /// Bandwidth if `butterworth_omega_star_rad_per_s` were read as Hz.
    pub bandwidth_3db_omega_read_as_hz: Option<f64>,

    pub linearity_slope: Option<f64>,
    pub linearity_intercept: Option<f64>,
    pub linearity_r_squared: Option<f64>,
    pub linearity_slope_stderr: Option<f64>,
    pub linearity_excluded_points: Option<Vec<usize>>,
    pub shot_noise_limited: Option<bool>,
    pub saturation_detected: Option<bool>,
    pub saturation_onset_w: Option<f64>,

    pub cmrr_db: Option<f64>,
    pub cmrr_raw_db: Option<f64>,

    pub clearance_freq_hz: f64,
    pub clearance_power_w: Option<f64>,
    pub clearance_db: Option<f64>,
    pub eta_snr: Option<f64>,
    pub eta_tot: Option<f64>,

    pub snep_w: Option<f64>,
    pub electronic_noise_density_a_per_rthz: Option<f64>,

    pub psd_convention: String,
    pub f_star_convention: String,
    pub db_convention: String,
    pub snep_definition: String,
    pub warnings: Vec<String>,
}

impl CharacterizationReport {
    /// Report with every measured field unavailable.
    pub fn empty(seed: u64, wavelength_m: f64, eta_qe: f64, clearance_freq_hz: f64) -> Self {
        CharacterizationReport {
            seed,
            wavelength_m,
            eta_qe,
            eta_total_plus: None,
            eta_total_plus_stderr: None,
            eta_total_minus: None,
            eta_total_minus_stderr: None,
            eta_coup: None,
            butterworth_p: None,
            butterworth_f_star_hz: None,
            butterworth_omega_star_rad_per_s: None,
            butterworth_scale: None,
            butterworth_r_squared: None,
            bandwidth_3db_hz: None,
            bandwidth_3db_peak_relative_hz: None,
            bandwidth_3db_omega_read_as_hz: None,
            linearity_slope: None,
            linearity_intercept: None,
            linearity_r_squared: None,
            linearity_slope_stderr: None,
            linearity_excluded_points: None,
            shot_noise_limited: None,
            saturation_detected: None,
            saturation_onset_w: None,
            cmrr_db: None,
            cmrr_raw_db: None,
            clearance_freq_hz,
            clearance_power_w: None,
            clearance_db: None,
            eta_snr: None,
            eta_tot: None,
            snep_w: None,
            electronic_noise_density_a_per_rthz: None,
            psd_convention: PSD_CONVENTION.into(),
            f_star_convention: F_STAR_CONVENTION.into(),
            db_convention: DB_CONVENTION.into(),
            snep_definition: SNEP_DEFINITION.into(),
            warnings: Vec::new(),
        }
    }

    pub fn to_fields(&self) -> BTreeMap<String, Value> {
        match serde_json::to_value(self) {
            Ok(Value::Object(map)) => map.into_iter().collect(),
            _ => unreachable!("report serializes to an object"),
        }
    }

    pub fn from_fields(fields: BTreeMap<String, Value>) -> Result<Self> {
        let map: Map<String, Value> = fields.into_iter().collect();
        serde_json::from_value(Value::Object(map)).map_err(|e| Error::parse(0, e.to_string()))
    }

    pub fn write_flat<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# characterization report")?;
        for (key, value) in self.to_fields() {
            writeln!(w, "{key} = {}", flat_value(&value))?;
        }
        Ok(())
    }

    pub fn read_flat<R: BufRead>(r: R) -> Result<Self> {
        Self::from_fields(read_flat_fields(r)?)
    }

    pub fn write_json<W: Write>(&self, mut w: W) -> Result<()> {
        serde_json::to_writer_pretty(&mut w, self).map_err(|e| Error::Io(e.into()))?;
        writeln!(w)?;
        Ok(())
    }

    pub fn read_json<R: BufRead>(r: R) -> Result<Self> {
        serde_json::from_reader(r).map_err(|e| Error::parse(e.line(), e.to_string()))
    }
}

fn flat_value(v: &Value) -> String {
    match v {
        Value::Null => UNAVAILABLE.to_string(),
        Value::String(s) => s.clone(),
        Value::Array(items) if items.iter().all(Value::is_string) => serde_json::to_string(v).unwrap_or_default(),
        other => other.to_string(),
    }
}

/// Reads `key = value` lines into JSON values; see the module docs.
pub fn read_flat_fields<R: BufRead>(r: R) -> Result<BTreeMap<String, Value>> {
    let mut out = BTreeMap::new();
    for (idx, line) in r.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (key, value) = trimmed
            .split_once('=')
            .ok_or_else(|| Error::parse(idx + 1, format!("expected 'key = value', got '{trimmed}'")))?;
        let key = key.trim().to_string();
        let value = value.trim();
        let parsed = if value == UNAVAILABLE {
            Value::Null
        } else {
            serde_json::from_str::<Value>(value).unwrap_or_else(|_| Value::String(value.to_string()))
        };
        if out.insert(key.clone(), parsed).is_some() {
            return Err(Error::parse(idx + 1, format!("duplicate key '{key}'")));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> CharacterizationReport {
        let mut r = CharacterizationReport::empty(7, 2.07e-6, 0.865, 5e6);
        r.eta_total_plus = Some(0.6531234567891234);
        r.eta_total_plus_stderr = Some(1.5e-3);
        r.bandwidth_3db_hz = Some(1.1650e7);
        r.linearity_excluded_points = Some(vec![9, 10, 11]);
        r.shot_noise_limited = Some(true);
        r.saturation_onset_w = Some(1.8e-3);
        r.warnings = vec!["balanced tone below noise".into(), "x = y".into()];
        r
    }

    #[test]
    fn flat_round_trip() {
        let r = sample();
        let mut buf = Vec::new();
        r.write_flat(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.contains("cmrr_db = unavailable"));
        assert!(text.contains("psd_convention = single-sided"));
        assert_eq!(CharacterizationReport::read_flat(buf.as_slice()).unwrap(), r);
    }

    #[test]
    fn json_round_trip() {
        let r = sample();
        let mut buf = Vec::new();
        r.write_json(&mut buf).unwrap();
        assert_eq!(CharacterizationReport::read_json(buf.as_slice()).unwrap(), r);
    }

    #[test]
    fn malformed_flat_line() {
        assert!(matches!(CharacterizationReport::read_flat("seed 3\n".as_bytes()), Err(Error::Parse { line: 1, .. })));
    }
}
