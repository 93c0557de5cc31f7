//! Measurement directory layout shared by `simulate` output and
//! `characterize --ingest` input. Every file is optional.
//!
//! | file | content |
//! |------|---------|
//! | `dc_plus.txt`, `dc_minus.txt` | table `power_w volts`, one arm lit |
//! | `dark.txt` | dark spectrum at the sweep RBW |
//! | `sweep.txt` | table `power_w`; row `i` is spectrum `sweep_{i:02}.txt` |
//! | `gain_shot.txt`, `gain_dark.txt` | spectra for the gain fit |
//! | `cmrr_balanced.txt`, `cmrr_addition.txt` | spectra around the rep rate |
//! | `traces/<run>.txt` | leading AC trace samples |

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use super::table::Table;
use crate::analysis::{DcPoint, MeasuredData};
use crate::dsp::Spectrum;
use crate::error::{Error, Result};
use crate::trace::TimeTrace;

pub const DC_PLUS: &str = "dc_plus.txt";
pub const DC_MINUS: &str = "dc_minus.txt";
pub const DARK: &str = "dark.txt";
pub const SWEEP_INDEX: &str = "sweep.txt";
pub const GAIN_SHOT: &str = "gain_shot.txt";
pub const GAIN_DARK: &str = "gain_dark.txt";
pub const CMRR_BALANCED: &str = "cmrr_balanced.txt";
pub const CMRR_ADDITION: &str = "cmrr_addition.txt";
pub const TRACES: &str = "traces";

pub fn sweep_file(index: usize) -> String {
    format!("sweep_{index:02}.txt")
}

/// Creates `path` and hands a buffered writer to `f`.
pub fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    f(&mut w)?;
    w.flush()?;
    Ok(())
}

pub fn read_spectrum(path: &Path) -> Result<Spectrum> {
    Spectrum::read_from(BufReader::new(File::open(path)?))
}

pub fn read_table(path: &Path) -> Result<Table> {
    Table::read_from(BufReader::new(File::open(path)?))
}

fn dc_table(points: &[DcPoint]) -> Table {
    let mut t = Table::new(&["power_w", "volts"]);
    t.comment("DC output with one photodiode illuminated; power on that photodiode");
    for p in points {
        t.push(vec![p.power, p.volts]);
    }
    t
}

fn dc_points(t: &Table) -> Result<Vec<DcPoint>> {
    let (Some(p), Some(v)) = (t.column("power_w"), t.column("volts")) else {
        return Err(Error::parse(1, "DC table needs columns power_w and volts"));
    };
    Ok(p.into_iter().zip(v).map(|(power, volts)| DcPoint { power, volts }).collect())
}

pub fn write_measurements(dir: &Path, data: &MeasuredData) -> Result<()> {
    fs::create_dir_all(dir)?;
    if !data.dc_plus.is_empty() {
        write_file(&dir.join(DC_PLUS), |w| dc_table(&data.dc_plus).write_to(w))?;
    }
    if !data.dc_minus.is_empty() {
        write_file(&dir.join(DC_MINUS), |w| dc_table(&data.dc_minus).write_to(w))?;
    }
    let singles = [
        (DARK, &data.dark),
        (GAIN_SHOT, &data.gain_shot),
        (GAIN_DARK, &data.gain_dark),
        (CMRR_BALANCED, &data.cmrr_balanced),
        (CMRR_ADDITION, &data.cmrr_addition),
    ];
    for (name, spec) in singles {
        if let Some(s) = spec {
            write_file(&dir.join(name), |w| s.write_to(w))?;
        }
    }
    if !data.sweep.is_empty() {
        let mut index = Table::new(&["power_w"]);
        index.comment("total LO power of each sweep spectrum; row i is sweep_ii.txt");
        for (i, (p, s)) in data.sweep.iter().enumerate() {
            index.push(vec![*p]);
            write_file(&dir.join(sweep_file(i)), |w| s.write_to(w))?;
        }
        write_file(&dir.join(SWEEP_INDEX), |w| index.write_to(w))?;
    }
    if !data.traces.is_empty() {
        let tdir = dir.join(TRACES);
        fs::create_dir_all(&tdir)?;
        for (name, t) in &data.traces {
            write_file(&tdir.join(format!("{name}.txt")), |w| t.write_to(w))?;
        }
    }
    Ok(())
}

/// Reads whatever measurement files exist in `dir`.
pub fn read_measurements(dir: &Path) -> Result<MeasuredData> {
    if !dir.is_dir() {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("{} is not a directory", dir.display()),
        )));
    }
    let optional_spectrum = |name: &str| -> Result<Option<Spectrum>> {
        let p = dir.join(name);
        if p.exists() {
            read_spectrum(&p).map(Some)
        } else {
            Ok(None)
        }
    };
    let optional_dc = |name: &str| -> Result<Vec<DcPoint>> {
        let p = dir.join(name);
        if p.exists() {
            dc_points(&read_table(&p)?)
        } else {
            Ok(Vec::new())
        }
    };
    let mut sweep = Vec::new();
    let index = dir.join(SWEEP_INDEX);
    if index.exists() {
        let t = read_table(&index)?;
        let powers = t.column("power_w").ok_or_else(|| Error::parse(1, "sweep index needs a power_w column"))?;
        for (i, p) in powers.into_iter().enumerate() {
            sweep.push((p, read_spectrum(&dir.join(sweep_file(i)))?));
        }
    }
    let mut traces = Vec::new();
    let tdir = dir.join(TRACES);
    if tdir.is_dir() {
        let mut names: Vec<_> = fs::read_dir(&tdir)?.collect::<std::io::Result<Vec<_>>>()?;
        names.sort_by_key(|e| e.file_name());
        for entry in names {
            let path = entry.path();
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                traces.push((stem.to_string(), TimeTrace::read_from(BufReader::new(File::open(&path)?))?));
            }
        }
    }
    Ok(MeasuredData {
        dc_plus: optional_dc(DC_PLUS)?,
        dc_minus: optional_dc(DC_MINUS)?,
        dark: optional_spectrum(DARK)?,
        sweep,
        gain_shot: optional_spectrum(GAIN_SHOT)?,
        gain_dark: optional_spectrum(GAIN_DARK)?,
        cmrr_balanced: optional_spectrum(CMRR_BALANCED)?,
        cmrr_addition: optional_spectrum(CMRR_ADDITION)?,
        traces,
    })
}
