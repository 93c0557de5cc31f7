use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::butterworth::{bandwidth_details, fit_butterworth, ButterworthFit};
use super::metrics::{clearance, cmrr, decouple_coupling, electronic_current_noise_density, eta_snr, total_efficiency};
use super::regression::{fit_dc_efficiency, fit_linearity, EfficiencyFit, LinearFit, LinearityPolicy};
use super::report::CharacterizationReport;
use crate::detector::{snep, DetectorModel, LocalOscillator};
use crate::dsp::{band_average, estimate_psd, gaussian_smooth, samples_needed, Spectrum, SpectrumUnits};
use crate::error::{Error, Result};
use crate::synth::{derive_seed, simulate_homodyne, Scenario, ScenarioKind, SynthConfig};
use crate::trace::TimeTrace;

const SEED_DC: u64 = 0x100;
const SEED_DARK: u64 = 0x200;
const SEED_SWEEP: u64 = 0x300;
const SEED_GAIN: u64 = 0x400;
const SEED_CMRR: u64 = 0x500;

/// Imbalance that puts the rep-rate tone 54 dB below the addition tone.
pub const CMRR_IMBALANCE: f64 = 0.001_995_262_314_968_879_5;

/// Imbalance during the power sweep; places the output-swing knee near
/// 1.8 mW total LO power for the reference preset.
pub const SATURATION_IMBALANCE: f64 = 0.30;

/// Spectrum-analysis settings shared by simulated and ingested data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisSettings {
    /// Hz, band for noise averages.
    pub band: (f64, f64),
    /// Hz, Gaussian smoothing applied to sweep spectra.
    pub smoothing_fwhm: f64,
    /// Hz, band whose mean normalizes the corrected gain.
    pub plateau_band: (f64, f64),
    /// Hz, band used in the Butterworth fit.
    pub gain_fit_band: (f64, f64),
    /// Hz
    pub clearance_freq: f64,
    pub linearity: LinearityPolicy,
}

impl Default for AnalysisSettings {
    fn default() -> Self {
        AnalysisSettings {
            band: (1e6, 13e6),
            smoothing_fwhm: 1.5e6,
            plateau_band: (1e6, 3e6),
            gain_fit_band: (0.5e6, 35e6),
            clearance_freq: 5e6,
            linearity: LinearityPolicy::default(),
        }
    }
}

/// What a characterization simulates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub seed: u64,
    /// Hz
    pub sample_rate: f64,
    /// W, total LO power at each DC point; each arm is measured alone.
    pub dc_powers: Vec<f64>,
    pub dc_samples: usize,
    /// W, total LO power at each balanced sweep point.
    pub sweep_powers: Vec<f64>,
    pub sweep_imbalance: f64,
    /// Hz
    pub rbw: f64,
    /// Hz
    pub vbw: f64,
    pub n_averages: usize,
    /// W; `None` skips the gain-spectrum run.
    pub gain_power: Option<f64>,
    /// Hz
    pub gain_rbw: f64,
    /// W; `None` skips the CMRR runs.
    pub cmrr_power: Option<f64>,
    pub cmrr_imbalance: f64,
    /// Leading samples of each spectrum run's AC trace to keep; 0 keeps none.
    pub trace_samples: usize,
    pub analysis: AnalysisSettings,
}

impl SweepConfig {
    /// Reference plan for a LO at `rep_rate`: sampling at 16x the repetition
    /// rate, DC sweep 0.1-0.8 mW, balanced sweep 0.2-3.0 mW.
    pub fn reference(rep_rate: f64, seed: u64) -> Self {
        SweepConfig {
            seed,
            sample_rate: 16.0 * rep_rate,
            dc_powers: (1..=8).map(|i| i as f64 * 0.1e-3).collect(),
            dc_samples: 1 << 16,
            sweep_powers: (1..=15).map(|i| i as f64 * 0.2e-3).collect(),
            sweep_imbalance: SATURATION_IMBALANCE,
            rbw: 300e3,
            vbw: 10e3,
            n_averages: 100,
            gain_power: Some(1.0e-3),
            gain_rbw: 100e3,
            cmrr_power: Some(0.2e-3),
            cmrr_imbalance: CMRR_IMBALANCE,
            trace_samples: 0,
            analysis: AnalysisSettings::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate > 0.0 && self.rbw > 0.0 && self.gain_rbw > 0.0 && self.n_averages > 0) {
            return Err(Error::Config("sample rate, RBWs and averages must be positive".into()));
        }
        let all = self.dc_powers.iter().chain(&self.sweep_powers).chain(&self.gain_power).chain(&self.cmrr_power);
        for &p in all {
            if !(p >= 0.0 && p.is_finite()) {
                return Err(Error::Config(format!("LO powers must be nonnegative, got {p}")));
            }
        }
        if self.dc_samples == 0 {
            return Err(Error::Config("dc_samples must be positive".into()));
        }
        let (lo, hi) = self.analysis.band;
        if !(0.0 <= lo && lo < hi) {
            return Err(Error::Config(format!("invalid band [{lo}, {hi}]")));
        }
        Ok(())
    }
}

/// One DC operating point, one arm illuminated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DcPoint {
    /// W on the illuminated photodiode.
    pub power: f64,
    /// V
    pub volts: f64,
}

/// Measured inputs to the analysis, simulated or read from disk. All
/// spectra may be in either unit system; they are converted to V^2/Hz.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MeasuredData {
    pub dc_plus: Vec<DcPoint>,
    pub dc_minus: Vec<DcPoint>,
    /// Dark floor at the sweep RBW.
    pub dark: Option<Spectrum>,
    /// `(total LO power, spectrum)` per sweep point.
    pub sweep: Vec<(f64, Spectrum)>,
    pub gain_shot: Option<Spectrum>,
    /// Dark floor on the gain spectrum's grid.
    pub gain_dark: Option<Spectrum>,
    pub cmrr_balanced: Option<Spectrum>,
    pub cmrr_addition: Option<Spectrum>,
    /// Named leading segments of simulated AC traces.
    pub traces: Vec<(String, TimeTrace)>,
}

/// Columns behind each figure, plus the report.
#[derive(Debug, Clone, PartialEq)]
pub struct Characterization {
    pub report: CharacterizationReport,
    pub data: MeasuredData,
    pub dc_fit_plus: Option<EfficiencyFit>,
    pub dc_fit_minus: Option<EfficiencyFit>,
    /// Dark-subtracted, plateau-normalized gain.
    pub corrected_gain: Option<Spectrum>,
    pub butterworth: Option<ButterworthFit>,
    /// Smoothed sweep spectra, same order as `data.sweep`.
    pub smoothed_sweep: Vec<(f64, Spectrum)>,
    pub smoothed_dark: Option<Spectrum>,
    /// `(total LO power, dark-subtracted band average)`.
    pub variances: Vec<(f64, f64)>,
    pub linearity: Option<LinearFit>,
}

fn to_linear(spec: &Spectrum, impedance: f64) -> Spectrum {
    match spec.units {
        SpectrumUnits::V2PerHz => spec.clone(),
        SpectrumUnits::DbmInRbw => spec.to_v2_per_hz(impedance),
    }
}

fn warn(report: &mut CharacterizationReport, what: &str, e: &dyn std::fmt::Display) {
    report.warnings.push(format!("{what}: {e}"));
}

/// Runs every extraction the available data allow. Anything that cannot
/// be computed is left unavailable with a warning.
pub fn analyze(
    model: &DetectorModel,
    lo: &LocalOscillator,
    data: MeasuredData,
    settings: &AnalysisSettings,
    seed: u64,
) -> Result<Characterization> {
    let imp = model.sa_impedance;
    let data = MeasuredData {
        dark: data.dark.map(|s| to_linear(&s, imp)),
        sweep: data.sweep.into_iter().map(|(p, s)| (p, to_linear(&s, imp))).collect(),
        gain_shot: data.gain_shot.map(|s| to_linear(&s, imp)),
        gain_dark: data.gain_dark.map(|s| to_linear(&s, imp)),
        cmrr_balanced: data.cmrr_balanced.map(|s| to_linear(&s, imp)),
        cmrr_addition: data.cmrr_addition.map(|s| to_linear(&s, imp)),
        ..data
    };
    let eta_qe = model.pd_plus.quantum_efficiency;
    let mut report = CharacterizationReport::empty(seed, lo.wavelength, eta_qe, settings.clearance_freq);

    let dc_fit = |points: &[DcPoint]| {
        let p: Vec<f64> = points.iter().map(|d| d.power).collect();
        let v: Vec<f64> = points.iter().map(|d| d.volts).collect();
        fit_dc_efficiency(&p, &v, model, lo.wavelength)
    };
    let mut dc_fit_plus = None;
    let mut dc_fit_minus = None;
    match dc_fit(&data.dc_plus) {
        Ok(f) => {
            report.eta_total_plus = Some(f.eta_total);
            report.eta_total_plus_stderr = Some(f.stderr);
            dc_fit_plus = Some(f);
        }
        Err(e) => warn(&mut report, "PD+ efficiency unavailable", &e),
    }
    match dc_fit(&data.dc_minus) {
        Ok(f) => {
            report.eta_total_minus = Some(f.eta_total);
            report.eta_total_minus_stderr = Some(f.stderr);
            dc_fit_minus = Some(f);
        }
        Err(e) => warn(&mut report, "PD- efficiency unavailable", &e),
    }
    if let Some(eta) = report.eta_total_plus {
        match decouple_coupling(eta, eta_qe) {
            Ok(c) => report.eta_coup = Some(c),
            Err(e) => warn(&mut report, "coupling efficiency unavailable", &e),
        }
    }

    let (band_lo, band_hi) = settings.band;
    match &data.dark {
        Some(dark) => match electronic_current_noise_density(dark, model, settings.band) {
            Ok(ie) => {
                report.electronic_noise_density_a_per_rthz = Some(ie);
                let mut measured = *model;
                measured.electronic_noise_density = ie;
                report.snep_w = Some(snep(&measured));
            }
            Err(e) => warn(&mut report, "electronic noise unavailable", &e),
        },
        None => report.warnings.push("no dark run: clearance, noise floor and SNEP unavailable".into()),
    }

    let smooth = |s: &Spectrum| gaussian_smooth(s, settings.smoothing_fwhm);
    let smoothed_dark = match data.dark.as_ref().map(smooth).transpose() {
        Ok(s) => s,
        Err(e) => {
            warn(&mut report, "dark smoothing failed", &e);
            None
        }
    };
    let mut smoothed_sweep = Vec::new();
    let mut variances = Vec::new();
    for (p, s) in &data.sweep {
        let sm = match smooth(s) {
            Ok(sm) => sm,
            Err(e) => {
                warn(&mut report, &format!("sweep point {p:e} W skipped"), &e);
                continue;
            }
        };
        let floor = match &smoothed_dark {
            Some(d) => band_average(d, band_lo, band_hi),
            None => Ok(0.0),
        };
        match (band_average(&sm, band_lo, band_hi), floor) {
            (Ok(v), Ok(f)) => {
                variances.push((*p, v - f));
                smoothed_sweep.push((*p, sm));
            }
            (Err(e), _) | (_, Err(e)) => warn(&mut report, &format!("sweep point {p:e} W skipped"), &e),
        }
    }
    if !data.sweep.is_empty() && smoothed_dark.is_none() {
        report.warnings.push("sweep variances are not dark-subtracted".into());
    }

    let mut linearity = None;
    if data.sweep.is_empty() {
        report.warnings.push("no power sweep: linearity, saturation and clearance unavailable".into());
    }
    if !variances.is_empty() {
        let powers: Vec<f64> = variances.iter().map(|v| v.0).collect();
        let vars: Vec<f64> = variances.iter().map(|v| v.1).collect();
        match fit_linearity(&powers, &vars, &settings.linearity) {
            Ok(fit) => {
                let onset = fit.excluded_points.iter().map(|&i| powers[i]).fold(f64::INFINITY, f64::min);
                report.saturation_detected = Some(onset.is_finite());
                report.saturation_onset_w = onset.is_finite().then_some(onset);
                report.linearity_slope = Some(fit.slope);
                report.linearity_intercept = Some(fit.intercept);
                report.linearity_r_squared = Some(fit.r_squared);
                report.linearity_slope_stderr = Some(fit.slope_stderr);
                report.linearity_excluded_points = Some(fit.excluded_points.clone());
                report.shot_noise_limited = Some(fit.shot_noise_limited);

                // clearance at the highest power still in the linear regime
                let included = (0..powers.len())
                    .filter(|i| !fit.excluded_points.contains(i))
                    .max_by(|&a, &b| powers[a].total_cmp(&powers[b]));
                if let (Some(i), Some(dark)) = (included, &smoothed_dark) {
                    report.clearance_power_w = Some(powers[i]);
                    match clearance(&smoothed_sweep[i].1, dark, settings.clearance_freq) {
                        Ok(c) => report.clearance_db = Some(c),
                        Err(e) => warn(&mut report, "clearance unavailable", &e),
                    }
                }
                linearity = Some(fit);
            }
            Err(e) => warn(&mut report, "linearity fit unavailable", &e),
        }
    }
    if let Some(c) = report.clearance_db {
        match eta_snr(c) {
            Ok(eta) => report.eta_snr = Some(eta),
            Err(e) => warn(&mut report, "measurement efficiency unavailable", &e),
        }
    }
    if let (Some(s), Some(c)) = (report.eta_snr, report.eta_coup) {
        match total_efficiency(s, c, eta_qe) {
            Ok(t) => report.eta_tot = Some(t),
            Err(e) => warn(&mut report, "total efficiency unavailable", &e),
        }
    }

    let mut corrected_gain = None;
    let mut butterworth = None;
    match (&data.gain_shot, &data.gain_dark) {
        (Some(shot), Some(dark)) => match gain_fit(shot, dark, settings) {
            Ok((corrected, fit)) => {
                report.butterworth_p = Some(fit.shape.p);
                report.butterworth_f_star_hz = Some(fit.shape.f_star);
                report.butterworth_omega_star_rad_per_s = Some(2.0 * std::f64::consts::PI * fit.shape.f_star);
                report.butterworth_scale = Some(fit.scale);
                report.butterworth_r_squared = Some(fit.r_squared);
                match bandwidth_details(&fit.shape) {
                    Ok(b) => {
                        report.bandwidth_3db_hz = Some(b.relative_to_dc);
                        report.bandwidth_3db_peak_relative_hz = b.relative_to_peak;
                        report.bandwidth_3db_omega_read_as_hz = Some(b.omega_read_as_hz);
                    }
                    Err(e) => warn(&mut report, "bandwidth unavailable", &e),
                }
                corrected_gain = Some(corrected);
                butterworth = Some(fit);
            }
            Err(e) => warn(&mut report, "gain fit unavailable", &e),
        },
        (Some(_), None) => report.warnings.push("gain spectrum has no dark reference: fit unavailable".into()),
        (None, _) => report.warnings.push("no gain spectrum: Butterworth fit and bandwidth unavailable".into()),
    }

    if data.cmrr_balanced.is_none() || data.cmrr_addition.is_none() {
        report.warnings.push("CMRR needs both balanced and addition spectra: unavailable".into());
    }
    if let (Some(bal), Some(add)) = (&data.cmrr_balanced, &data.cmrr_addition) {
        match cmrr(bal, add, lo.repetition_rate) {
            Ok(c) => {
                if c.degenerate {
                    report.warnings.push(format!("degenerate CMRR: raw difference {:.2} dB", c.raw_db));
                }
                report.cmrr_db = Some(c.cmrr_db);
                report.cmrr_raw_db = Some(c.raw_db);
            }
            Err(e) => warn(&mut report, "CMRR unavailable", &e),
        }
    }

    Ok(Characterization {
        report,
        data,
        dc_fit_plus,
        dc_fit_minus,
        corrected_gain,
        butterworth,
        smoothed_sweep,
        smoothed_dark,
        variances,
        linearity,
    })
}

/// Dark-subtracted gain normalized to its plateau, restricted to the fit
/// band, and the Butterworth fit to it.
fn gain_fit(shot: &Spectrum, dark: &Spectrum, settings: &AnalysisSettings) -> Result<(Spectrum, ButterworthFit)> {
    let diff = shot.subtract(dark)?;
    let (plo, phi) = settings.plateau_band;
    let plateau = band_average(&diff, plo, phi)?;
    if !(plateau > 0.0) {
        return Err(Error::DegenerateInput("gain plateau is not above the dark floor".into()));
    }
    let (flo, fhi) = settings.gain_fit_band;
    let (f, y): (Vec<f64>, Vec<f64>) = diff
        .freqs
        .iter()
        .zip(&diff.psd)
        .filter(|(f, _)| **f >= flo && **f <= fhi)
        .map(|(f, y)| (*f, y / plateau))
        .unzip();
    let corrected = Spectrum::new(f, y, diff.rbw, diff.vbw, diff.n_averages, SpectrumUnits::V2PerHz)?;
    let fit = fit_butterworth(&corrected)?;
    Ok((corrected, fit))
}

struct Run {
    name: String,
    power: f64,
    scenario: Scenario,
    rbw: f64,
    seed_tag: u64,
}

fn run_spectrum(
    model: &DetectorModel,
    lo: &LocalOscillator,
    cfg: &SweepConfig,
    run: &Run,
    vbw: f64,
) -> Result<(Spectrum, Option<TimeTrace>)> {
    let n = samples_needed(cfg.sample_rate, run.rbw, cfg.n_averages);
    let synth = SynthConfig::new(cfg.sample_rate, n as f64 / cfg.sample_rate, derive_seed(cfg.seed, run.seed_tag));
    let out = simulate_homodyne(model, &lo.with_power(run.power), &run.scenario, &synth)?;
    let spectrum = estimate_psd(&out.ac, run.rbw, vbw, cfg.n_averages)?;
    let trace = match cfg.trace_samples.min(out.ac.len()) {
        0 => None,
        k => Some(TimeTrace::new(out.ac.samples()[..k].to_vec(), out.ac.dt(), out.ac.units(), out.ac.seed())?),
    };
    Ok((spectrum, trace))
}

/// Simulates every measurement in `cfg`. Points run in parallel; each has
/// its own derived seed, so the result does not depend on scheduling.
pub fn simulate_measurements(model: &DetectorModel, lo: &LocalOscillator, cfg: &SweepConfig) -> Result<MeasuredData> {
    cfg.validate()?;
    model.validate(lo.wavelength)?;
    lo.validate()?;

    let dc = |kind: ScenarioKind, offset: u64| -> Result<Vec<DcPoint>> {
        cfg.dc_powers
            .par_iter()
            .enumerate()
            .map(|(i, &p)| {
                let scenario = Scenario::new(kind);
                let (sp, sm) = scenario.power_shares(model);
                let synth = SynthConfig::new(
                    cfg.sample_rate,
                    cfg.dc_samples as f64 / cfg.sample_rate,
                    derive_seed(cfg.seed, SEED_DC + offset + i as u64),
                );
                let out = simulate_homodyne(model, &lo.with_power(p), &scenario, &synth)?;
                Ok(DcPoint { power: p * (sp + sm), volts: out.dc_value })
            })
            .collect()
    };
    let dc_plus = dc(ScenarioKind::BlockedMinus, 0)?;
    let dc_minus = dc(ScenarioKind::BlockedPlus, 0x80)?;

    let mut runs = vec![
        Run { name: "dark".into(), power: 0.0, scenario: Scenario::balanced(), rbw: cfg.rbw, seed_tag: SEED_DARK },
        Run {
            name: "gain_dark".into(),
            power: 0.0,
            scenario: Scenario::balanced(),
            rbw: cfg.gain_rbw,
            seed_tag: SEED_DARK + 1,
        },
    ];
    if let Some(p) = cfg.gain_power {
        runs.push(Run {
            name: "gain_shot".into(),
            power: p,
            scenario: Scenario::balanced(),
            rbw: cfg.gain_rbw,
            seed_tag: SEED_GAIN,
        });
    }
    if let Some(p) = cfg.cmrr_power {
        let balanced = Scenario::balanced().with_imbalance(cfg.cmrr_imbalance);
        runs.push(Run {
            name: "cmrr_balanced".into(),
            power: p,
            scenario: balanced,
            rbw: cfg.rbw,
            seed_tag: SEED_CMRR,
        });
        runs.push(Run {
            name: "cmrr_addition".into(),
            power: p,
            scenario: Scenario::new(ScenarioKind::Addition),
            rbw: cfg.rbw,
            seed_tag: SEED_CMRR + 1,
        });
    }
    let fixed = runs.len();
    let sweep_scenario = Scenario::balanced().with_imbalance(cfg.sweep_imbalance);
    runs.extend(cfg.sweep_powers.iter().enumerate().map(|(i, &p)| Run {
        name: format!("sweep_{i:02}"),
        power: p,
        scenario: sweep_scenario,
        rbw: cfg.rbw,
        seed_tag: SEED_SWEEP + i as u64,
    }));

    let results: Vec<(Spectrum, Option<TimeTrace>)> = runs
        .par_iter()
        .map(|run| {
            let vbw = if run.rbw == cfg.rbw { cfg.vbw } else { run.rbw };
            run_spectrum(model, lo, cfg, run, vbw)
        })
        .collect::<Result<_>>()?;
    let mut traces = Vec::new();
    let mut spectra = Vec::with_capacity(results.len());
    for (run, (spectrum, trace)) in runs.iter().zip(results) {
        if let Some(t) = trace {
            traces.push((run.name.clone(), t));
        }
        spectra.push(spectrum);
    }
    traces.sort_by(|a, b| a.0.cmp(&b.0));

    let sweep = cfg.sweep_powers.iter().copied().zip(spectra.drain(fixed..)).collect();
    let mut fixed_spectra = spectra.into_iter();
    let dark = fixed_spectra.next();
    let gain_dark = fixed_spectra.next();
    let gain_shot = cfg.gain_power.and_then(|_| fixed_spectra.next());
    let (cmrr_balanced, cmrr_addition) = match cfg.cmrr_power {
        Some(_) => (fixed_spectra.next(), fixed_spectra.next()),
        None => (None, None),
    };
    Ok(MeasuredData { dc_plus, dc_minus, dark, sweep, gain_shot, gain_dark, cmrr_balanced, cmrr_addition, traces })
}

/// Simulates and analyzes a full characterization.
pub fn characterize_full(model: &DetectorModel, lo: &LocalOscillator, cfg: &SweepConfig) -> Result<Characterization> {
    let data = simulate_measurements(model, lo, cfg)?;
    analyze(model, lo, data, &cfg.analysis, cfg.seed)
}

pub fn characterize(model: &DetectorModel, lo: &LocalOscillator, cfg: &SweepConfig) -> Result<CharacterizationReport> {
    Ok(characterize_full(model, lo, cfg)?.report)
}
