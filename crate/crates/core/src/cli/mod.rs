//! Commands behind the `homodyne` binary: plan resolution, simulation,
//! characterization, report comparison and preset listing.
//!
//! | exit code | meaning |
//! |-----------|---------|
//! | 0 | success |
//! | 1 | report-diff found a field outside tolerance |
//! | 2 | command-line usage error |
//! | 3 | invalid configuration or plan |
//! | 4 | file system error |
//! | 5 | malformed input file |
//! | 6 | analysis failure (fit, domain, data length) |

pub mod diff;
pub mod files;
pub mod table;

use std::fmt;
use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::analysis::{analyze, simulate_measurements, Characterization, MeasuredData, SweepConfig};
use crate::config::RunConfig;
use crate::dsp::Spectrum;
use crate::error::{Error, Result};
use crate::presets;
use diff::{diff_reports, read_report, DiffSummary, Tolerances};
use files::write_file;
use table::Table;

pub const EXIT_OK: i32 = 0;
pub const EXIT_DIFF_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_IO: i32 = 4;
pub const EXIT_PARSE: i32 = 5;
pub const EXIT_ANALYSIS: i32 = 6;

pub const MANIFEST: &str = "manifest.txt";
pub const REPORT_FLAT: &str = "report.txt";
pub const REPORT_JSON: &str = "report.json";
pub const PLOT_DC: &str = "fig1b_dc.txt";
pub const PLOT_GAIN: &str = "fig1c_gain.txt";
pub const PLOT_SPECTRA: &str = "fig2a_spectra.txt";
pub const PLOT_LINEARITY: &str = "fig2b_linearity.txt";

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => EXIT_CONFIG,
        Error::Io(_) => EXIT_IO,
        Error::Parse { .. } => EXIT_PARSE,
        Error::Saturation { .. }
        | Error::BandOutOfRange { .. }
        | Error::InsufficientData { .. }
        | Error::Domain(_)
        | Error::DegenerateInput(_)
        | Error::InconsistentEfficiencies { .. }
        | Error::FitDiverged(_)
        | Error::NoCrossing => EXIT_ANALYSIS,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    DcSweep,
    GainSpectrum,
    PowerSweep,
    Cmrr,
    FullCharacterize,
}

impl Experiment {
    pub const ALL: [Experiment; 5] = [
        Experiment::DcSweep,
        Experiment::GainSpectrum,
        Experiment::PowerSweep,
        Experiment::Cmrr,
        Experiment::FullCharacterize,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::DcSweep => "dc-sweep",
            Experiment::GainSpectrum => "gain-spectrum",
            Experiment::PowerSweep => "power-sweep",
            Experiment::Cmrr => "cmrr",
            Experiment::FullCharacterize => "full-characterize",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL.into_iter().find(|e| e.name() == s).ok_or_else(|| {
            let known: Vec<_> = Experiment::ALL.iter().map(|e| e.name()).collect();
            Error::Config(format!("unknown experiment '{s}', known: {}", known.join(", ")))
        })
    }
}

/// Command-line overrides applied on top of a preset or config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PlanOptions {
    pub config: Option<PathBuf>,
    pub preset: Option<String>,
    pub seed: Option<u64>,
    /// Hz
    pub rbw: Option<f64>,
    /// Hz
    pub vbw: Option<f64>,
    /// Hz
    pub band: Option<(f64, f64)>,
    /// Hz
    pub clearance_freq: Option<f64>,
    pub trace_samples: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPlan {
    /// Preset name or config path the plan came from.
    pub source: String,
    pub config: RunConfig,
    pub experiment: Experiment,
    pub output_dir: PathBuf,
}

fn check_points(name: &str, points: &[f64]) -> Result<()> {
    if points.is_empty() {
        return Err(Error::Config(format!("{name} is empty")));
    }
    if points.iter().any(|p| !(*p > 0.0)) {
        return Err(Error::Config(format!("{name} must be positive")));
    }
    if points.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config(format!("{name} must be strictly increasing")));
    }
    Ok(())
}

impl ExperimentPlan {
    /// Builds a plan. The experiment is taken from `experiment`, else from
    /// the config file, else full characterization.
    pub fn resolve(opts: &PlanOptions, experiment: Option<Experiment>, output_dir: impl Into<PathBuf>) -> Result<Self> {
        let (source, mut config) = match (&opts.config, &opts.preset) {
            (Some(_), Some(_)) => return Err(Error::Config("give either --config or --preset, not both".into())),
            (Some(path), None) => {
                let cfg = RunConfig::read_from(BufReader::new(File::open(path)?))?;
                (path.display().to_string(), cfg)
            }
            (None, preset) => {
                let name = preset.as_deref().unwrap_or(presets::PAPER_2UM);
                (name.to_string(), RunConfig::from_preset(name)?)
            }
        };
        let sweep = &mut config.sweep;
        if let Some(seed) = opts.seed {
            sweep.seed = seed;
        }
        if let Some(rbw) = opts.rbw {
            sweep.rbw = rbw;
        }
        if let Some(vbw) = opts.vbw {
            sweep.vbw = vbw;
        }
        if let Some(band) = opts.band {
            sweep.analysis.band = band;
        }
        if let Some(f) = opts.clearance_freq {
            sweep.analysis.clearance_freq = f;
        }
        if let Some(n) = opts.trace_samples {
            sweep.trace_samples = n;
        }
        let experiment = match (experiment, &config.experiment) {
            (Some(e), _) => e,
            (None, Some(name)) => name.parse()?,
            (None, None) => Experiment::FullCharacterize,
        };
        config.experiment = Some(experiment.name().to_string());
        let plan = ExperimentPlan { source, config, experiment, output_dir: output_dir.into() };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        let s = &self.config.sweep;
        let need = |what: &str, v: Option<f64>| match v {
            Some(p) if p > 0.0 => Ok(()),
            _ => Err(Error::Config(format!("{} needs a positive {what}", self.experiment))),
        };
        match self.experiment {
            Experiment::DcSweep => check_points("dc_powers", &s.dc_powers),
            Experiment::GainSpectrum => need("gain_power", s.gain_power),
            Experiment::PowerSweep => check_points("sweep_powers", &s.sweep_powers),
            Experiment::Cmrr => need("cmrr_power", s.cmrr_power),
            Experiment::FullCharacterize => {
                check_points("dc_powers", &s.dc_powers)?;
                check_points("sweep_powers", &s.sweep_powers)
            }
        }
    }

    /// The configured sweep restricted to this plan's experiment.
    pub fn sweep_config(&self) -> SweepConfig {
        let mut s = self.config.sweep.clone();
        let e = self.experiment;
        if !matches!(e, Experiment::DcSweep | Experiment::FullCharacterize) {
            s.dc_powers.clear();
        }
        if !matches!(e, Experiment::PowerSweep | Experiment::FullCharacterize) {
            s.sweep_powers.clear();
        }
        if !matches!(e, Experiment::GainSpectrum | Experiment::FullCharacterize) {
            s.gain_power = None;
        }
        if !matches!(e, Experiment::Cmrr | Experiment::FullCharacterize) {
            s.cmrr_power = None;
        }
        s
    }

    fn write_manifest(&self) -> Result<()> {
        write_file(&self.output_dir.join(MANIFEST), |w| self.config.write_to(w))
    }
}

/// Simulates the plan's experiment and writes its measurement files and
/// manifest to the output directory.
pub fn cmd_simulate(plan: &ExperimentPlan) -> Result<MeasuredData> {
    plan.validate()?;
    let cfg = &plan.config;
    let data = simulate_measurements(&cfg.model, &cfg.lo, &plan.sweep_config())?;
    fs::create_dir_all(&plan.output_dir)?;
    files::write_measurements(&plan.output_dir, &data)?;
    plan.write_manifest()?;
    Ok(data)
}

/// Characterizes the detector from a fresh simulation of the plan or, with
/// `ingest`, from a measurement directory. Writes the report in both
/// formats, the plot-data files and the manifest.
pub fn cmd_characterize(plan: &ExperimentPlan, ingest: Option<&Path>) -> Result<Characterization> {
    let cfg = &plan.config;
    let data = match ingest {
        Some(dir) => {
            cfg.validate()?;
            files::read_measurements(dir)?
        }
        None => {
            plan.validate()?;
            simulate_measurements(&cfg.model, &cfg.lo, &plan.sweep_config())?
        }
    };
    let run = analyze(&cfg.model, &cfg.lo, data, &cfg.sweep.analysis, cfg.sweep.seed)?;
    let out = &plan.output_dir;
    fs::create_dir_all(out)?;
    write_file(&out.join(REPORT_FLAT), |w| run.report.write_flat(w))?;
    write_file(&out.join(REPORT_JSON), |w| run.report.write_json(w))?;
    for (name, table) in plot_tables(&run, cfg.model.sa_impedance)? {
        write_file(&out.join(name), |w| table.write_to(w))?;
    }
    plan.write_manifest()?;
    Ok(run)
}

/// Compares two report files, the second being the reference.
pub fn cmd_report_diff(a: &Path, b: &Path, tolerances: &Tolerances) -> Result<DiffSummary> {
    Ok(diff_reports(&read_report(a)?, &read_report(b)?, tolerances))
}

pub fn preset_names() -> &'static [&'static str] {
    presets::NAMES
}

/// Full configuration text of a preset, in the config file format.
pub fn preset_config(name: &str) -> Result<String> {
    let mut buf = Vec::new();
    RunConfig::from_preset(name)?.write_to(&mut buf)?;
    Ok(String::from_utf8(buf).expect("config text is UTF-8"))
}

fn dbm_rows(table: &mut Table, power: f64, spec: &Spectrum, impedance: f64) -> Result<()> {
    let dbm = spec.to_dbm(impedance)?;
    for (f, v) in dbm.freqs.iter().zip(&dbm.psd) {
        table.push(vec![power, *f, *v]);
    }
    Ok(())
}

/// Data behind each figure as `(file name, table)`; figures whose inputs
/// are missing are omitted.
pub fn plot_tables(run: &Characterization, impedance: f64) -> Result<Vec<(&'static str, Table)>> {
    let mut out = Vec::new();

    let arms = [(1.0, &run.data.dc_plus, &run.dc_fit_plus), (-1.0, &run.data.dc_minus, &run.dc_fit_minus)];
    if arms.iter().any(|a| a.2.is_some()) {
        let mut t = Table::new(&["arm", "power_w", "volts", "fit_v"]);
        t.comment("DC output against power on the lit photodiode; arm +1 is PD+, -1 is PD-");
        for (arm, points, fit) in arms {
            let Some(fit) = fit else { continue };
            t.comment(format!("arm {arm:+}: eta_total = {} +/- {}", fit.eta_total, fit.stderr));
            for p in points.iter() {
                t.push(vec![arm, p.power, p.volts, fit.fit.predict(p.power)]);
            }
        }
        out.push((PLOT_DC, t));
    }

    if let (Some(gain), Some(fit)) = (&run.corrected_gain, &run.butterworth) {
        let mut t = Table::new(&["freq_hz", "gain", "fit", "residual"]);
        t.comment(format!(
            "dark-subtracted gain over its plateau; fit p = {}, f_star = {} Hz, r^2 = {}",
            fit.shape.p, fit.shape.f_star, fit.r_squared
        ));
        for (i, f) in fit.freqs.iter().enumerate() {
            let g = gain.value_at(*f)?;
            t.push(vec![*f, g, fit.model(*f), fit.residuals[i]]);
        }
        out.push((PLOT_GAIN, t));
    }

    if !run.smoothed_sweep.is_empty() || run.smoothed_dark.is_some() {
        let mut t = Table::new(&["power_w", "freq_hz", "dbm"]);
        t.comment("smoothed spectra in dBm per RBW; power 0 is the dark run");
        if let Some(d) = &run.smoothed_dark {
            dbm_rows(&mut t, 0.0, d, impedance)?;
        }
        for (p, s) in &run.smoothed_sweep {
            dbm_rows(&mut t, *p, s, impedance)?;
        }
        out.push((PLOT_SPECTRA, t));
    }

    if let Some(fit) = &run.linearity {
        let mut t = Table::new(&["power_w", "variance", "fit", "included"]);
        t.comment(format!(
            "dark-subtracted band-averaged PSD (V^2/Hz); slope = {}, r^2 = {}",
            fit.slope, fit.r_squared
        ));
        for (i, (p, v)) in run.variances.iter().enumerate() {
            let included = if fit.excluded_points.contains(&i) { 0.0 } else { 1.0 };
            t.push(vec![*p, *v, fit.predict(*p), included]);
        }
        out.push((PLOT_LINEARITY, t));
    }
    Ok(out)
}
