//! Flat `key = value` run configuration with units carried in key names.
//!
//! Every physical key ends in a unit suffix, e.g. `feedback_resistance_kohm
//! = 3.9` or `lo_power_mw = 1`. Dimensionless keys have no suffix. A file
//! starts from `preset` (default `paper-2um`) and overrides individual
//! values. [`RunConfig::write_to`] emits every key in SI units, so a written
//! configuration reproduces a run exactly.
//!
//! ```text
//! preset = paper-2um
//! lo_power_mw = 1.2
//! sweep_powers_mw = 0.2, 0.4, 0.6
//! measured_response_f_star_mhz = 9.7
//! ```

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use crate::analysis::SweepConfig;
use crate::detector::{ButterworthShape, DetectorModel, LocalOscillator};
use crate::error::{Error, Result};
use crate::presets;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Dim {
    None,
    Frequency,
    Capacitance,
    Resistance,
    Current,
    CurrentDensity,
    Voltage,
    VoltageDensity,
    Power,
    Length,
    Time,
    Responsivity,
    PerHz,
}

impl Dim {
    /// Accepted suffixes and their scale to SI; the first is the SI unit.
    fn units(self) -> &'static [(&'static str, f64)] {
        match self {
            Dim::None => &[],
            Dim::Frequency => &[("hz", 1.0), ("khz", 1e3), ("mhz", 1e6), ("ghz", 1e9)],
            Dim::Capacitance => &[("f", 1.0), ("nf", 1e-9), ("pf", 1e-12), ("ff", 1e-15)],
            Dim::Resistance => &[("ohm", 1.0), ("kohm", 1e3), ("megohm", 1e6)],
            Dim::Current => &[("a", 1.0), ("ma", 1e-3), ("ua", 1e-6), ("na", 1e-9), ("pa", 1e-12)],
            Dim::CurrentDensity => &[("a_per_rthz", 1.0), ("pa_per_rthz", 1e-12), ("fa_per_rthz", 1e-15)],
            Dim::Voltage => &[("v", 1.0), ("mv", 1e-3), ("uv", 1e-6)],
            Dim::VoltageDensity => &[("v_per_rthz", 1.0), ("nv_per_rthz", 1e-9)],
            Dim::Power => &[("w", 1.0), ("mw", 1e-3), ("uw", 1e-6)],
            Dim::Length => &[("m", 1.0), ("mm", 1e-3), ("um", 1e-6), ("nm", 1e-9)],
            Dim::Time => &[("s", 1.0), ("ms", 1e-3), ("us", 1e-6), ("ns", 1e-9), ("ps", 1e-12), ("fs", 1e-15)],
            Dim::Responsivity => &[("a_per_w", 1.0)],
            Dim::PerHz => &[("per_hz", 1.0)],
        }
    }

    fn si_suffix(self) -> Option<&'static str> {
        self.units().first().map(|u| u.0)
    }
}

const PD_KEYS: &[(&str, Dim)] = &[
    ("responsivity", Dim::Responsivity),
    ("junction_capacitance", Dim::Capacitance),
    ("shunt_resistance", Dim::Resistance),
    ("dark_current", Dim::Current),
    ("active_diameter", Dim::Length),
    ("reverse_bias", Dim::Voltage),
    ("quantum_efficiency", Dim::None),
    ("coupling_efficiency", Dim::None),
];

const KEYS: &[(&str, Dim)] = &[
    ("opamp_gbw", Dim::Frequency),
    ("opamp_voltage_noise", Dim::VoltageDensity),
    ("opamp_current_noise", Dim::CurrentDensity),
    ("opamp_input_capacitance", Dim::Capacitance),
    ("opamp_bias_offset_current", Dim::Current),
    ("opamp_output_swing", Dim::Voltage),
    ("feedback_resistance", Dim::Resistance),
    ("feedback_capacitance", Dim::Capacitance),
    ("electronic_noise_density", Dim::CurrentDensity),
    ("v_offset", Dim::Voltage),
    ("sa_impedance", Dim::Resistance),
    ("measured_response_p", Dim::None),
    ("measured_response_f_star", Dim::Frequency),
    ("lo_wavelength", Dim::Length),
    ("lo_power", Dim::Power),
    ("lo_rep_rate", Dim::Frequency),
    ("lo_pulse_fwhm", Dim::Time),
    ("lo_rin", Dim::PerHz),
    ("seed", Dim::None),
    ("sample_rate", Dim::Frequency),
    ("dc_powers", Dim::Power),
    ("dc_samples", Dim::None),
    ("sweep_powers", Dim::Power),
    ("sweep_imbalance", Dim::None),
    ("rbw", Dim::Frequency),
    ("vbw", Dim::Frequency),
    ("n_averages", Dim::None),
    ("gain_power", Dim::Power),
    ("gain_rbw", Dim::Frequency),
    ("cmrr_power", Dim::Power),
    ("cmrr_imbalance", Dim::None),
    ("band_lo", Dim::Frequency),
    ("band_hi", Dim::Frequency),
    ("smoothing_fwhm", Dim::Frequency),
    ("plateau_lo", Dim::Frequency),
    ("plateau_hi", Dim::Frequency),
    ("gain_fit_lo", Dim::Frequency),
    ("gain_fit_hi", Dim::Frequency),
    ("clearance_freq", Dim::Frequency),
    ("saturation_threshold", Dim::None),
    ("trace_samples", Dim::None),
];

/// Written for optional quantities that are switched off.
pub const NONE: &str = "none";

/// Detector, LO and measurement plan for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Preset the configuration started from.
    pub preset: String,
    pub model: DetectorModel,
    pub lo: LocalOscillator,
    pub sweep: SweepConfig,
    /// Value of an `experiment` key, if present.
    pub experiment: Option<String>,
}

enum Value {
    Scalar(f64),
    List(Vec<f64>),
    Off,
}

fn lookup(key: &str) -> Option<(String, Dim, f64)> {
    let tables = PD_KEYS
        .iter()
        .flat_map(|&(base, dim)| ["pd_plus_", "pd_minus_"].map(|side| (format!("{side}{base}"), dim)))
        .chain(KEYS.iter().map(|&(base, dim)| (base.to_string(), dim)));
    for (base, dim) in tables {
        if dim == Dim::None {
            if key == base {
                return Some((base, dim, 1.0));
            }
            continue;
        }
        if let Some(suffix) = key.strip_prefix(base.as_str()).and_then(|r| r.strip_prefix('_')) {
            if let Some(&(_, scale)) = dim.units().iter().find(|u| u.0 == suffix) {
                return Some((base, dim, scale));
            }
        }
    }
    None
}

impl RunConfig {
    pub fn from_preset(name: &str) -> Result<Self> {
        let (model, lo) = presets::by_name(name)?;
        let sweep = SweepConfig::reference(lo.repetition_rate, 0);
        Ok(RunConfig { preset: name.to_string(), model, lo, sweep, experiment: None })
    }

    /// Sets one value given its key with unit suffix.
    pub fn set(&mut self, key: &str, raw: &str) -> Result<()> {
        let raw = raw.trim();
        match key {
            "preset" => {
                *self = RunConfig { experiment: self.experiment.take(), ..RunConfig::from_preset(raw)? };
                return Ok(());
            }
            "experiment" => {
                self.experiment = Some(raw.to_string());
                return Ok(());
            }
            _ => {}
        }
        let (base, _, scale) = lookup(key).ok_or_else(|| Error::Config(format!("unknown key '{key}'")))?;
        let number = |s: &str| -> Result<f64> {
            s.trim().parse::<f64>().map_err(|_| Error::Config(format!("{key}: '{s}' is not a number")))
        };
        let value = if raw == NONE {
            Value::Off
        } else if raw.contains(',') || raw.is_empty() {
            Value::List(
                raw.split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| number(s).map(|v| v * scale))
                    .collect::<Result<_>>()?,
            )
        } else {
            Value::Scalar(number(raw)? * scale)
        };
        self.apply(&base, value)
    }

    fn apply(&mut self, base: &str, value: Value) -> Result<()> {
        let scalar = |v: &Value| match v {
            Value::Scalar(x) => Ok(*x),
            _ => Err(Error::Config(format!("{base} takes a single number"))),
        };
        let list = |v: Value| match v {
            Value::List(xs) => Ok(xs),
            Value::Scalar(x) => Ok(vec![x]),
            _ => Err(Error::Config(format!("{base} takes a comma-separated list"))),
        };
        let count = |v: &Value| -> Result<u64> {
            let x = scalar(v)?;
            if x >= 0.0 && x.fract() == 0.0 && x <= u64::MAX as f64 {
                Ok(x as u64)
            } else {
                Err(Error::Config(format!("{base} must be a nonnegative integer")))
            }
        };
        let optional = |v: &Value| match v {
            Value::Off => Ok(None),
            other => scalar(other).map(Some),
        };

        if let Some(rest) = base.strip_prefix("pd_plus_").or_else(|| base.strip_prefix("pd_minus_")) {
            let x = scalar(&value)?;
            let pd = if base.starts_with("pd_plus_") { &mut self.model.pd_plus } else { &mut self.model.pd_minus };
            match rest {
                "responsivity" => pd.responsivity = x,
                "junction_capacitance" => pd.junction_capacitance = x,
                "shunt_resistance" => pd.shunt_resistance = x,
                "dark_current" => pd.dark_current = x,
                "active_diameter" => pd.active_diameter = x,
                "reverse_bias" => pd.reverse_bias = x,
                "quantum_efficiency" => pd.quantum_efficiency = x,
                "coupling_efficiency" => pd.coupling_efficiency = x,
                _ => unreachable!("photodiode key table out of sync"),
            }
            return Ok(());
        }

        let m = &mut self.model;
        let s = &mut self.sweep;
        let a = &mut s.analysis;
        match base {
            "opamp_gbw" => m.opamp.gain_bandwidth_product = scalar(&value)?,
            "opamp_voltage_noise" => m.opamp.voltage_noise = scalar(&value)?,
            "opamp_current_noise" => m.opamp.current_noise = scalar(&value)?,
            "opamp_input_capacitance" => m.opamp.input_capacitance = scalar(&value)?,
            "opamp_bias_offset_current" => m.opamp.input_bias_offset_current = scalar(&value)?,
            "opamp_output_swing" => m.opamp.output_swing = scalar(&value)?,
            "feedback_resistance" => m.feedback.gain_resistor = scalar(&value)?,
            "feedback_capacitance" => m.feedback.feedback_capacitor = scalar(&value)?,
            "electronic_noise_density" => m.electronic_noise_density = scalar(&value)?,
            "v_offset" => m.v_offset = scalar(&value)?,
            "sa_impedance" => m.sa_impedance = scalar(&value)?,
            "measured_response_p" => match optional(&value)? {
                None => m.measured_response = None,
                Some(p) => {
                    let f_star = m.measured_response.map_or(f64::NAN, |r| r.f_star);
                    m.measured_response = Some(ButterworthShape { p, f_star });
                }
            },
            "measured_response_f_star" => match optional(&value)? {
                None => m.measured_response = None,
                Some(f_star) => {
                    let p = m.measured_response.map_or(f64::NAN, |r| r.p);
                    m.measured_response = Some(ButterworthShape { p, f_star });
                }
            },
            "lo_wavelength" => self.lo.wavelength = scalar(&value)?,
            "lo_power" => self.lo.average_power = scalar(&value)?,
            "lo_rep_rate" => self.lo.repetition_rate = scalar(&value)?,
            "lo_pulse_fwhm" => self.lo.pulse_fwhm = scalar(&value)?,
            "lo_rin" => self.lo.rin_density = scalar(&value)?,
            "seed" => s.seed = count(&value)?,
            "sample_rate" => s.sample_rate = scalar(&value)?,
            "dc_powers" => s.dc_powers = list(value)?,
            "dc_samples" => s.dc_samples = count(&value)? as usize,
            "sweep_powers" => s.sweep_powers = list(value)?,
            "sweep_imbalance" => s.sweep_imbalance = scalar(&value)?,
            "rbw" => s.rbw = scalar(&value)?,
            "vbw" => s.vbw = scalar(&value)?,
            "n_averages" => s.n_averages = count(&value)? as usize,
            "gain_power" => s.gain_power = optional(&value)?,
            "gain_rbw" => s.gain_rbw = scalar(&value)?,
            "cmrr_power" => s.cmrr_power = optional(&value)?,
            "cmrr_imbalance" => s.cmrr_imbalance = scalar(&value)?,
            "band_lo" => a.band.0 = scalar(&value)?,
            "band_hi" => a.band.1 = scalar(&value)?,
            "smoothing_fwhm" => a.smoothing_fwhm = scalar(&value)?,
            "plateau_lo" => a.plateau_band.0 = scalar(&value)?,
            "plateau_hi" => a.plateau_band.1 = scalar(&value)?,
            "gain_fit_lo" => a.gain_fit_band.0 = scalar(&value)?,
            "gain_fit_hi" => a.gain_fit_band.1 = scalar(&value)?,
            "clearance_freq" => a.clearance_freq = scalar(&value)?,
            "saturation_threshold" => a.linearity.threshold = scalar(&value)?,
            "trace_samples" => s.trace_samples = count(&value)? as usize,
            other => unreachable!("key table lists '{other}' without a setter"),
        }
        Ok(())
    }

    /// Parses a configuration. A `preset` key, if any, is applied first.
    pub fn read_from<R: BufRead>(r: R) -> Result<Self> {
        let mut entries = Vec::new();
        let mut seen = BTreeSet::new();
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
            if !seen.insert(key.clone()) {
                return Err(Error::parse(idx + 1, format!("duplicate key '{key}'")));
            }
            entries.push((idx + 1, key, value.trim().to_string()));
        }
        let preset = entries.iter().find(|e| e.1 == "preset").map_or(presets::PAPER_2UM, |e| e.2.as_str());
        let mut cfg = RunConfig::from_preset(preset)?;
        for (_, key, value) in entries.iter().filter(|e| e.1 != "preset") {
            cfg.set(key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate(self.lo.wavelength)?;
        self.lo.validate()?;
        self.sweep.validate()
    }

    /// Every key in SI units.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let mut out = String::new();
        let mut put = |key: &str, dim: Dim, value: String| {
            let suffix = dim.si_suffix().map(|s| format!("_{s}")).unwrap_or_default();
            let _ = writeln!(out, "{key}{suffix} = {value}");
        };
        let list = |xs: &[f64]| xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ");
        let opt = |x: Option<f64>| x.map_or(NONE.to_string(), |v| v.to_string());

        put("preset", Dim::None, self.preset.clone());
        if let Some(e) = &self.experiment {
            put("experiment", Dim::None, e.clone());
        }
        for (side, pd) in [("pd_plus", &self.model.pd_plus), ("pd_minus", &self.model.pd_minus)] {
            let values = [
                pd.responsivity,
                pd.junction_capacitance,
                pd.shunt_resistance,
                pd.dark_current,
                pd.active_diameter,
                pd.reverse_bias,
                pd.quantum_efficiency,
                pd.coupling_efficiency,
            ];
            for (&(base, dim), v) in PD_KEYS.iter().zip(values) {
                put(&format!("{side}_{base}"), dim, v.to_string());
            }
        }
        let m = &self.model;
        let s = &self.sweep;
        let a = &s.analysis;
        let response = m.measured_response;
        let values: Vec<String> = vec![
            m.opamp.gain_bandwidth_product.to_string(),
            m.opamp.voltage_noise.to_string(),
            m.opamp.current_noise.to_string(),
            m.opamp.input_capacitance.to_string(),
            m.opamp.input_bias_offset_current.to_string(),
            m.opamp.output_swing.to_string(),
            m.feedback.gain_resistor.to_string(),
            m.feedback.feedback_capacitor.to_string(),
            m.electronic_noise_density.to_string(),
            m.v_offset.to_string(),
            m.sa_impedance.to_string(),
            opt(response.map(|r| r.p)),
            opt(response.map(|r| r.f_star)),
            self.lo.wavelength.to_string(),
            self.lo.average_power.to_string(),
            self.lo.repetition_rate.to_string(),
            self.lo.pulse_fwhm.to_string(),
            self.lo.rin_density.to_string(),
            s.seed.to_string(),
            s.sample_rate.to_string(),
            list(&s.dc_powers),
            s.dc_samples.to_string(),
            list(&s.sweep_powers),
            s.sweep_imbalance.to_string(),
            s.rbw.to_string(),
            s.vbw.to_string(),
            s.n_averages.to_string(),
            opt(s.gain_power),
            s.gain_rbw.to_string(),
            opt(s.cmrr_power),
            s.cmrr_imbalance.to_string(),
            a.band.0.to_string(),
            a.band.1.to_string(),
            a.smoothing_fwhm.to_string(),
            a.plateau_band.0.to_string(),
            a.plateau_band.1.to_string(),
            a.gain_fit_band.0.to_string(),
            a.gain_fit_band.1.to_string(),
            a.clearance_freq.to_string(),
            a.linearity.threshold.to_string(),
            s.trace_samples.to_string(),
        ];
        debug_assert_eq!(values.len(), KEYS.len());
        for (&(base, dim), v) in KEYS.iter().zip(values) {
            put(base, dim, v);
        }
        w.write_all(out.as_bytes())?;
        Ok(())
    }
}
