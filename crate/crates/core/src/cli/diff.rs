use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;

use serde_json::Value;

use crate::analysis::{CharacterizationReport, UNAVAILABLE};
use crate::error::{Error, Result};

/// Fields that describe a run rather than measure the detector.
const IGNORED: &[&str] = &["warnings"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Tolerance {
    Absolute(f64),
    /// Fraction of the reference (second) value.
    Relative(f64),
}

impl Tolerance {
    pub fn accepts(&self, value: f64, reference: f64) -> bool {
        let diff = (value - reference).abs();
        match *self {
            Tolerance::Absolute(t) => diff <= t,
            Tolerance::Relative(t) => diff <= t * reference.abs(),
        }
    }
}

/// Per-field tolerances; fields not listed use `default`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tolerances {
    pub default: Tolerance,
    pub fields: BTreeMap<String, Tolerance>,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { default: Tolerance::Absolute(0.0), fields: BTreeMap::new() }
    }
}

impl Tolerances {
    /// Parses `field=0.02` (absolute) or `field=5%` (relative); the field
    /// `*` sets the default.
    pub fn parse<'a>(specs: impl IntoIterator<Item = &'a str>) -> Result<Self> {
        let mut out = Tolerances::default();
        for spec in specs {
            let (field, value) =
                spec.split_once('=').ok_or_else(|| Error::Config(format!("tolerance '{spec}' is not field=value")))?;
            let value = value.trim();
            let bad = || Error::Config(format!("tolerance '{spec}' has an invalid value"));
            let tol = match value.strip_suffix('%') {
                Some(pct) => Tolerance::Relative(pct.trim().parse::<f64>().map_err(|_| bad())? / 100.0),
                None => Tolerance::Absolute(value.parse::<f64>().map_err(|_| bad())?),
            };
            if matches!(tol, Tolerance::Absolute(t) | Tolerance::Relative(t) if !(t >= 0.0)) {
                return Err(bad());
            }
            match field.trim() {
                "*" => out.default = tol,
                f => {
                    out.fields.insert(f.to_string(), tol);
                }
            }
        }
        Ok(out)
    }

    fn for_field(&self, field: &str) -> Tolerance {
        self.fields.get(field).copied().unwrap_or(self.default)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldComparison {
    pub field: String,
    pub a: String,
    pub b: String,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffSummary {
    pub fields: Vec<FieldComparison>,
}

impl DiffSummary {
    pub fn passed(&self) -> bool {
        self.fields.iter().all(|f| f.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &FieldComparison> {
        self.fields.iter().filter(|f| !f.pass)
    }
}

impl fmt::Display for DiffSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.fields {
            let mark = if c.pass { "ok  " } else { "FAIL" };
            writeln!(f, "{mark} {} a={} b={}", c.field, c.a, c.b)?;
        }
        let n_fail = self.failures().count();
        write!(f, "{} fields compared, {} failed", self.fields.len(), n_fail)
    }
}

fn show(v: Option<&Value>) -> String {
    match v {
        None => "missing".into(),
        Some(Value::Null) => UNAVAILABLE.into(),
        Some(Value::String(s)) => s.clone(),
        Some(other) => other.to_string(),
    }
}

/// Field-by-field comparison of two reports, `b` being the reference.
pub fn diff_reports(a: &CharacterizationReport, b: &CharacterizationReport, tol: &Tolerances) -> DiffSummary {
    diff_fields(&a.to_fields(), &b.to_fields(), tol)
}

pub fn diff_fields(a: &BTreeMap<String, Value>, b: &BTreeMap<String, Value>, tol: &Tolerances) -> DiffSummary {
    let keys: BTreeSet<&String> = a.keys().chain(b.keys()).collect();
    let fields = keys
        .into_iter()
        .filter(|k| !IGNORED.contains(&k.as_str()))
        .map(|k| {
            let (va, vb) = (a.get(k), b.get(k));
            let pass = match (va, vb) {
                (Some(Value::Number(x)), Some(Value::Number(y))) => match (x.as_f64(), y.as_f64()) {
                    (Some(x), Some(y)) => tol.for_field(k).accepts(x, y),
                    _ => false,
                },
                (Some(x), Some(y)) => x == y,
                _ => false,
            };
            FieldComparison { field: k.clone(), a: show(va), b: show(vb), pass }
        })
        .collect();
    DiffSummary { fields }
}

/// Reads a report in either format, detected from the first character.
pub fn read_report(path: &Path) -> Result<CharacterizationReport> {
    let mut text = String::new();
    BufReader::new(File::open(path)?).read_to_string(&mut text)?;
    read_report_text(&text)
}

pub fn read_report_text(text: &str) -> Result<CharacterizationReport> {
    if text.trim_start().starts_with('{') {
        CharacterizationReport::read_json(text.as_bytes())
    } else {
        CharacterizationReport::read_flat(text.as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report() -> CharacterizationReport {
        let mut r = CharacterizationReport::empty(1, 2.07e-6, 0.865, 5e6);
        r.eta_tot = Some(0.571);
        r.bandwidth_3db_hz = Some(11.65e6);
        r
    }

    #[test]
    fn identical_reports_pass() {
        let r = report();
        assert!(diff_reports(&r, &r, &Tolerances::default()).passed());
    }

    #[test]
    fn efficiency_within_tolerance() {
        let a = report();
        let mut b = report();
        b.eta_tot = Some(0.58);
        let tol = Tolerances::parse(["eta_tot=0.02"]).unwrap();
        assert!(diff_reports(&a, &b, &tol).passed());
        assert!(!diff_reports(&a, &b, &Tolerances::default()).passed());
    }

    #[test]
    fn bandwidth_outside_relative_tolerance() {
        let a = report();
        let mut b = report();
        b.bandwidth_3db_hz = Some(11.65e6 * 1.1);
        let tol = Tolerances::parse(["bandwidth_3db_hz=5%"]).unwrap();
        let d = diff_reports(&a, &b, &tol);
        assert!(!d.passed());
        assert_eq!(d.failures().map(|f| f.field.as_str()).collect::<Vec<_>>(), ["bandwidth_3db_hz"]);
    }

    #[test]
    fn unavailable_versus_value_fails() {
        let a = report();
        let mut b = report();
        b.cmrr_db = Some(48.0);
        assert!(!diff_reports(&a, &b, &Tolerances::parse(["*=100%"]).unwrap()).passed());
    }

    #[test]
    fn bad_tolerances() {
        assert!(Tolerances::parse(["eta_tot"]).is_err());
        assert!(Tolerances::parse(["eta_tot=abc"]).is_err());
        assert!(Tolerances::parse(["eta_tot=-1"]).is_err());
    }
}
