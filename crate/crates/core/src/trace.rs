//! Uniformly sampled traces and their two-column text format.
//!
//! ```text
//! # units=volts dt=1.5822784810126583e-9 seed=7 samples=3
//! 0e0 1.25e-3
//! 1.5822784810126583e-9 -2.5e-4
//! ...
//! ```

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Units {
    Amps,
    Volts,
    /// Optical power envelope.
    Watts,
}

impl fmt::Display for Units {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Units::Amps => "amps",
            Units::Volts => "volts",
            Units::Watts => "watts",
        })
    }
}

impl FromStr for Units {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "amps" => Ok(Units::Amps),
            "volts" => Ok(Units::Volts),
            "watts" => Ok(Units::Watts),
            other => Err(Error::Config(format!("unknown units '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeTrace {
    samples: Vec<f64>,
    dt: f64,
    units: Units,
    seed: u64,
}

impl TimeTrace {
    pub fn new(samples: Vec<f64>, dt: f64, units: Units, seed: u64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Config(format!("dt must be positive, got {dt}")));
        }
        if samples.is_empty() {
            return Err(Error::Config("trace must be nonempty".into()));
        }
        Ok(TimeTrace { samples, dt, units, seed })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn sample_rate(&self) -> f64 {
        1.0 / self.dt
    }

    pub fn units(&self) -> Units {
        self.units
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }

    /// Same units, dt and seed with new samples.
    pub(crate) fn with_samples(&self, samples: Vec<f64>) -> TimeTrace {
        TimeTrace { samples, dt: self.dt, units: self.units, seed: self.seed }
    }

    pub(crate) fn relabel(self, units: Units) -> TimeTrace {
        TimeTrace { units, ..self }
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# units={} dt={:e} seed={} samples={}", self.units, self.dt, self.seed, self.samples.len())?;
        for (i, v) in self.samples.iter().enumerate() {
            writeln!(w, "{:e} {:e}", i as f64 * self.dt, v)?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<TimeTrace> {
        let mut units = None;
        let mut dt = None;
        let mut seed = None;
        let mut samples = Vec::new();
        for (idx, line) in r.lines().enumerate() {
            let line = line?;
            let lineno = idx + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            if let Some(header) = trimmed.strip_prefix('#') {
                for token in header.split_whitespace() {
                    let Some((key, value)) = token.split_once('=') else { continue };
                    match key {
                        "units" => units = Some(value.parse::<Units>()?),
                        "dt" => dt = Some(parse_f64(value, lineno)?),
                        "seed" => seed = Some(value.parse::<u64>().map_err(|e| Error::parse(lineno, e.to_string()))?),
                        _ => {}
                    }
                }
                continue;
            }
            let mut cols = trimmed.split(|c: char| c.is_whitespace() || c == ',').filter(|s| !s.is_empty());
            let _time = cols.next();
            let value = cols.next().ok_or_else(|| Error::parse(lineno, "expected two columns"))?;
            samples.push(parse_f64(value, lineno)?);
        }
        let units = units.ok_or_else(|| Error::parse(1, "missing units in header"))?;
        let dt = dt.ok_or_else(|| Error::parse(1, "missing dt in header"))?;
        TimeTrace::new(samples, dt, units, seed.unwrap_or(0))
    }
}

pub(crate) fn parse_f64(s: &str, line: usize) -> Result<f64> {
    s.parse::<f64>().map_err(|e| Error::parse(line, format!("'{s}': {e}")))
}
