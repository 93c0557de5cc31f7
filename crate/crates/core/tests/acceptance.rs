//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails. Informational lines are prefixed `INFO`.

use std::f64::consts::SQRT_2;
use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use homodyne::analysis::{
    characterize_full, cmrr_from_raw_db, decouple_coupling, electronic_current_noise_density, eta_snr, fit_butterworth,
    simulate_measurements, total_efficiency, Characterization, SweepConfig,
};
use homodyne::detector::snep;
use homodyne::dsp::{band_average, band_power, estimate_psd, gaussian_smooth, samples_needed};
use homodyne::presets::paper_2um;
use homodyne::{ButterworthShape, Spectrum, TimeTrace, Units};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

type Check = Result<String, String>;

struct Suite {
    failures: usize,
}

impl Suite {
    fn run(&mut self, name: &str, check: impl FnOnce() -> Check) {
        let start = Instant::now();
        let outcome = check();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {name:<28} {detail} [{secs:.2} s]"),
            Err(detail) => {
                self.failures += 1;
                println!("FAIL  {name:<28} {detail} [{secs:.2} s]");
            }
        }
    }
}

fn within(x: f64, target: f64, tol: f64) -> bool {
    (x - target).abs() <= tol
}

fn verdict(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn only_sweep(cfg: &mut SweepConfig) {
    cfg.dc_powers.clear();
    cfg.gain_power = None;
    cfg.cmrr_power = None;
}

fn efficiency_recovery() -> Check {
    let (model, lo) = paper_2um();
    let mut cfg = SweepConfig::reference(lo.repetition_rate, 1);
    cfg.sweep_powers.clear();
    cfg.gain_power = None;
    cfg.cmrr_power = None;
    let start = Instant::now();
    let run = characterize_full(&model, &lo, &cfg).map_err(err)?;
    let secs = start.elapsed().as_secs_f64();
    let r = &run.report;
    let (plus, minus) = (r.eta_total_plus.ok_or("eta+ unavailable")?, r.eta_total_minus.ok_or("eta- unavailable")?);
    verdict(
        within(plus, 0.653, 0.02) && within(minus, 0.66, 0.025) && secs < 10.0,
        format!("eta+ = {plus:.4} (0.653 +/- 0.02), eta- = {minus:.4} (0.66 +/- 0.025), {secs:.2} s < 10 s"),
    )
}

fn coupling_decoupling() -> Check {
    let c = decouple_coupling(0.653, 0.865).map_err(err)?;
    verdict(within(c, 0.755, 0.005), format!("eta_coup = {c:.4} (0.755 +/- 0.005)"))
}

fn shot_noise_linearity() -> Check {
    let (model, lo) = paper_2um();
    let mut cfg = SweepConfig::reference(lo.repetition_rate, 2);
    only_sweep(&mut cfg);
    cfg.sweep_powers = (0..10).map(|i| 0.15e-3 * (i + 1) as f64).collect();
    cfg.n_averages = 100;
    let start = Instant::now();
    let run = characterize_full(&model, &lo, &cfg).map_err(err)?;
    let secs = start.elapsed().as_secs_f64();
    let fit = run.linearity.as_ref().ok_or("no linearity fit")?;
    verdict(
        fit.r_squared >= 0.99 && secs < 60.0,
        format!(
            "R^2 = {:.5} >= 0.99 over {} points ({} excluded), {} averages, {secs:.2} s < 60 s",
            fit.r_squared,
            cfg.sweep_powers.len(),
            fit.excluded_points.len(),
            cfg.n_averages
        ),
    )
}

fn saturation_onset() -> Check {
    let (model, lo) = paper_2um();
    let mut cfg = SweepConfig::reference(lo.repetition_rate, 1);
    only_sweep(&mut cfg);
    let run = characterize_full(&model, &lo, &cfg).map_err(err)?;
    let onset = run.report.saturation_onset_w.ok_or("onset unavailable")?;
    verdict(
        onset.is_finite() && within(onset, 1.8e-3, 0.2 * 1.8e-3),
        format!("onset = {:.3} mW (1.8 mW +/- 20%)", onset * 1e3),
    )
}

fn cmrr_run(eps: f64, seed: u64) -> Result<f64, String> {
    let (model, lo) = paper_2um();
    let mut cfg = SweepConfig::reference(lo.repetition_rate, seed);
    cfg.dc_powers.clear();
    cfg.sweep_powers.clear();
    cfg.gain_power = None;
    cfg.cmrr_imbalance = eps;
    let run = characterize_full(&model, &lo, &cfg).map_err(err)?;
    run.report.cmrr_db.ok_or_else(|| "cmrr unavailable".into())
}

fn cmrr_arithmetic() -> Check {
    let corrected = cmrr_from_raw_db(54.0).cmrr_db;
    let mut ok = within(corrected, 48.0, 0.1);
    let mut detail = format!("54 dB raw -> {corrected:.3} dB (48.0 +/- 0.1)");
    for (eps, seed) in [(0.002, 11), (0.01, 12)] {
        let measured = cmrr_run(eps, seed)?;
        let oracle = 20.0 * (1.0 / eps).log10() - 20.0 * 2f64.log10();
        ok &= within(measured, oracle, 1.0);
        detail += &format!("; eps {eps}: {measured:.2} dB vs {oracle:.2} dB (+/- 1)");
    }
    verdict(ok, detail)
}

fn snr_and_total_efficiency() -> Check {
    let snr = eta_snr(9.0).map_err(err)?;
    let tot = total_efficiency(0.874, 0.755, 0.865).map_err(err)?;
    verdict(
        within(snr, 0.874, 0.001) && within(tot, 0.571, 0.001) && within(tot, 0.58, 0.02),
        format!("eta_snr(9 dB) = {snr:.4} (0.874 +/- 0.001), eta_tot = {tot:.4} (0.58 +/- 0.02)"),
    )
}

fn gain_only(seed: u64) -> Result<Characterization, String> {
    let (model, lo) = paper_2um();
    let mut cfg = SweepConfig::reference(lo.repetition_rate, seed);
    cfg.dc_powers.clear();
    cfg.sweep_powers.clear();
    cfg.cmrr_power = None;
    characterize_full(&model, &lo, &cfg).map_err(err)
}

fn butterworth_round_trip() -> Check {
    let (model, _) = paper_2um();
    let truth = model.response();

    let freqs: Vec<f64> = (1..=400).map(|i| i as f64 * 0.1e6).collect();
    let psd: Vec<f64> = freqs.iter().map(|&f| 3.0 * truth.gain(f)).collect();
    let clean = Spectrum::new(freqs, psd, 100e3, 100e3, 1, homodyne::dsp::SpectrumUnits::V2PerHz).map_err(err)?;
    let exact = fit_butterworth(&clean).map_err(err)?;
    let mut ok =
        within(exact.shape.p, truth.p, 1e-3 * truth.p) && within(exact.shape.f_star, truth.f_star, 1e-3 * truth.f_star);

    let mut worst_p: f64 = 0.0;
    let mut worst_f: f64 = 0.0;
    let mut last = None;
    for seed in 0..20 {
        let run = gain_only(seed)?;
        let fit = run.butterworth.ok_or("no Butterworth fit")?;
        worst_p = worst_p.max((fit.shape.p - truth.p).abs());
        worst_f = worst_f.max((fit.shape.f_star / truth.f_star - 1.0).abs());
        last = Some(run.report);
    }
    ok &= worst_p <= 0.05 && worst_f <= 0.05;

    if let Some(r) = last {
        println!(
            "INFO  bandwidth conventions     f_star read as omega/2pi: BW = {:.3} MHz; omega read as Hz: BW = {:.3} MHz; quoted 13.2 MHz (not gated)",
            r.bandwidth_3db_hz.unwrap_or(f64::NAN) / 1e6,
            r.bandwidth_3db_omega_read_as_hz.unwrap_or(f64::NAN) / 1e6
        );
    }
    verdict(
        ok,
        format!(
            "noiseless p = {:.5}, f_star = {:.4} MHz (0.1%); 20 seeds max |dp| = {worst_p:.4} (0.05), max |df/f| = {:.2}% (5%)",
            exact.shape.p,
            exact.shape.f_star / 1e6,
            worst_f * 100.0
        ),
    )
}

fn electronic_noise_round_trip() -> Check {
    let (model, lo) = paper_2um();
    let mut cfg = SweepConfig::reference(lo.repetition_rate, 5);
    cfg.dc_powers.clear();
    cfg.sweep_powers.clear();
    cfg.gain_power = None;
    cfg.cmrr_power = None;
    let data = simulate_measurements(&model, &lo, &cfg).map_err(err)?;
    let dark = data.dark.ok_or("no dark spectrum")?;
    let ie = electronic_current_noise_density(&dark, &model, cfg.analysis.band).map_err(err)?;
    let target = 2.79e-12;
    let s = snep(&model);
    println!("INFO  snep                       {:.2} uW from i_e = 2.79 pA/rtHz; quoted 73 uW (not gated)", s * 1e6);
    verdict(within(ie, target, 0.03 * target), format!("i_e = {:.4} pA/rtHz (2.79 +/- 3%)", ie * 1e12))
}

fn white_trace(density: f64, fs: f64, n: usize, seed: u64) -> TimeTrace {
    let sigma = density * (fs / 2.0).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = (0..n).map(|_| sigma * rng.sample::<f64, _>(StandardNormal)).collect();
    TimeTrace::new(samples, 1.0 / fs, Units::Volts, seed).expect("valid trace")
}

fn estimator_calibrations() -> Check {
    let fs = 632e6;
    let (rbw, n_avg) = (300e3, 100);
    let density = 5e-9;
    let trace = white_trace(density, fs, samples_needed(fs, rbw, n_avg), 9);
    let psd = estimate_psd(&trace, rbw, rbw, n_avg).map_err(err)?;
    let readback = band_average(&psd, 1e6, 300e6).map_err(err)? / (density * density);

    let f_star = 9.7e6;
    let half = ButterworthShape::new(SQRT_2, f_star).map_err(err)?.gain(f_star);

    let freqs: Vec<f64> = (0..4000).map(|i| i as f64 * 25e3).collect();
    let bumpy: Vec<f64> =
        freqs.iter().map(|&f| 1.0 + (-((f - 40e6) / 2e6).powi(2)).exp() + 0.3 * (f / 3e6).sin().powi(2)).collect();
    let spec = Spectrum::new(freqs, bumpy, 25e3, 25e3, 1, homodyne::dsp::SpectrumUnits::V2PerHz).map_err(err)?;
    let smooth = gaussian_smooth(&spec, 1.5e6).map_err(err)?;
    let ratio = band_power(&smooth, 0.0, 99.975e6).map_err(err)? / band_power(&spec, 0.0, 99.975e6).map_err(err)?;

    verdict(
        within(readback, 1.0, 0.02) && within(half, 0.5, 0.5e-3) && within(ratio, 1.0, 0.005),
        format!(
            "white readback {readback:.4} (1 +/- 2%), |r(f_star)|^2 = {half:.6} (0.5 +/- 0.1%), smoothed power ratio {ratio:.5} (1 +/- 0.5%)"
        ),
    )
}

fn run_cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_homodyne")).args(args).output().map_err(err)?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("homodyne {} failed: {}", args.join(" "), String::from_utf8_lossy(&out.stderr)))
    }
}

fn tree(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).map_err(err)? {
            let path = entry.map_err(err)?.path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).map_err(err)?.display().to_string();
                files.push((rel, fs::read(&path).map_err(err)?));
            }
        }
    }
    files.sort();
    Ok(files)
}

fn determinism() -> Check {
    let tmp = tempfile::tempdir().map_err(err)?;
    let dir = |name: &str| tmp.path().join(name).display().to_string();
    let (a, b, c) = (dir("a"), dir("b"), dir("c"));
    let (sa, sb) = (dir("sim_a"), dir("sim_b"));

    run_cli(&["characterize", "--preset", "paper-2um", "--seed", "3", "--out", &a])?;
    run_cli(&["characterize", "--preset", "paper-2um", "--seed", "3", "--out", &b])?;
    let manifest = format!("{a}/manifest.txt");
    run_cli(&["characterize", "--config", &manifest, "--out", &c])?;
    run_cli(&["simulate", "--config", &manifest, "--traces", "64", "--out", &sa])?;
    run_cli(&["simulate", "--config", &manifest, "--traces", "64", "--out", &sb])?;

    let ta = tree(Path::new(&a))?;
    let same_repeat = ta == tree(Path::new(&b))?;
    let same_manifest = ta == tree(Path::new(&c))?;
    let sim = tree(Path::new(&sa))?;
    let same_sim = sim == tree(Path::new(&sb))?;
    verdict(
        same_repeat && same_manifest && same_sim && !ta.is_empty(),
        format!(
            "characterize repeat identical: {same_repeat}, replay from manifest identical: {same_manifest} ({} files); simulate repeat identical: {same_sim} ({} files)",
            ta.len(),
            sim.len()
        ),
    )
}

fn main() -> ExitCode {
    let mut suite = Suite { failures: 0 };
    suite.run("efficiency_recovery", efficiency_recovery);
    suite.run("coupling_decoupling", coupling_decoupling);
    suite.run("shot_noise_linearity", shot_noise_linearity);
    suite.run("saturation_onset", saturation_onset);
    suite.run("cmrr", cmrr_arithmetic);
    suite.run("snr_and_total_efficiency", snr_and_total_efficiency);
    suite.run("butterworth_round_trip", butterworth_round_trip);
    suite.run("electronic_noise_round_trip", electronic_noise_round_trip);
    suite.run("estimator_calibrations", estimator_calibrations);
    suite.run("determinism", determinism);
    println!("{} criteria, {} failed", 10, suite.failures);
    if suite.failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
