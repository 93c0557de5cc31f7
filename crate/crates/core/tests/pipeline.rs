use homodyne::analysis::{
    analyze, characterize_full, simulate_measurements, CharacterizationReport, DcPoint, MeasuredData, SweepConfig,
};
use homodyne::cli::diff::{diff_reports, Tolerances};
use homodyne::cli::files::{read_measurements, write_measurements};
use homodyne::dsp::SpectrumUnits;
use homodyne::presets::paper_2um;
use homodyne::Spectrum;
use proptest::prelude::*;

fn small(seed: u64) -> SweepConfig {
    let (_, lo) = paper_2um();
    let mut cfg = SweepConfig::reference(lo.repetition_rate, seed);
    cfg.sweep_powers = vec![0.3e-3, 0.6e-3, 0.9e-3, 1.2e-3, 1.5e-3];
    cfg.n_averages = 20;
    cfg.trace_samples = 32;
    cfg
}

#[test]
fn simulation_is_deterministic_per_seed() {
    let (model, lo) = paper_2um();
    let a = simulate_measurements(&model, &lo, &small(8)).unwrap();
    let b = simulate_measurements(&model, &lo, &small(8)).unwrap();
    let c = simulate_measurements(&model, &lo, &small(9)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.sweep[0].1.psd, c.sweep[0].1.psd);
}

#[test]
fn measurement_files_round_trip() {
    let (model, lo) = paper_2um();
    let data = simulate_measurements(&model, &lo, &small(2)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_measurements(dir.path(), &data).unwrap();
    let back = read_measurements(dir.path()).unwrap();
    assert_eq!(back, data);
    assert_eq!(back.traces.len(), 2 + 1 + 2 + 5);
}

#[test]
fn analysis_of_dbm_spectra_matches_linear() {
    let (model, lo) = paper_2um();
    let cfg = small(3);
    let data = simulate_measurements(&model, &lo, &cfg).unwrap();
    let to_dbm = |s: &Spectrum| s.to_dbm(model.sa_impedance).unwrap();
    let dbm = MeasuredData {
        dark: data.dark.as_ref().map(to_dbm),
        sweep: data.sweep.iter().map(|(p, s)| (*p, to_dbm(s))).collect(),
        ..data.clone()
    };
    let lin = analyze(&model, &lo, data, &cfg.analysis, cfg.seed).unwrap().report;
    let log = analyze(&model, &lo, dbm, &cfg.analysis, cfg.seed).unwrap().report;
    let tol = Tolerances::parse(["*=1e-9%", "linearity_intercept=1e-20"]).unwrap();
    let summary = diff_reports(&log, &lin, &tol);
    assert!(summary.passed(), "{summary}");
}

#[test]
fn zero_power_dc_sweep_leaves_efficiencies_unavailable() {
    let (model, lo) = paper_2um();
    let zeros: Vec<DcPoint> = (0..5).map(|_| DcPoint { power: 0.0, volts: model.v_offset }).collect();
    let data = MeasuredData { dc_plus: zeros.clone(), dc_minus: zeros, ..Default::default() };
    let run = analyze(&model, &lo, data, &Default::default(), 0).unwrap();
    let r = &run.report;
    assert_eq!(r.eta_total_plus, None);
    assert_eq!(r.eta_total_minus, None);
    assert_eq!(r.eta_coup, None);
    assert!(r.warnings.iter().any(|w| w.contains("PD+ efficiency unavailable")));
}

#[test]
fn empty_data_yields_all_warnings_not_errors() {
    let (model, lo) = paper_2um();
    let run = analyze(&model, &lo, MeasuredData::default(), &Default::default(), 0).unwrap();
    let fields = run.report.to_fields();
    assert_eq!(fields["butterworth_p"], serde_json::Value::Null);
    assert_eq!(fields["cmrr_db"], serde_json::Value::Null);
    assert!(run.report.warnings.len() >= 5);
}

#[test]
fn reference_preset_reproduces_headline_numbers() {
    let (model, lo) = paper_2um();
    let r = characterize_full(&model, &lo, &SweepConfig::reference(lo.repetition_rate, 1)).unwrap().report;
    let near = |x: Option<f64>, target: f64, tol: f64| (x.unwrap() - target).abs() <= tol;
    assert!(near(r.eta_total_plus, 0.653, 0.02));
    assert!(near(r.eta_total_minus, 0.66, 0.025));
    assert!(near(r.eta_coup, 0.755, 0.03));
    assert!(near(r.cmrr_db, 48.0, 1.0));
    assert!(near(r.saturation_onset_w, 1.8e-3, 0.36e-3));
    assert!(near(r.electronic_noise_density_a_per_rthz, 2.79e-12, 0.084e-12));
    assert!(near(r.butterworth_p, 1.12, 0.05));
    assert!(r.linearity_r_squared.unwrap() >= 0.99);
    assert_eq!(r.saturation_detected, Some(true));
}

fn report_strategy() -> impl Strategy<Value = CharacterizationReport> {
    (
        any::<u64>(),
        proptest::option::of(0.01f64..1.0),
        proptest::option::of(1e5f64..1e9),
        proptest::option::of(proptest::collection::vec(0usize..40, 0..6)),
        proptest::option::of(any::<bool>()),
        proptest::collection::vec("[a-z ]{0,12}", 0..3),
    )
        .prop_map(|(seed, eta, bw, excluded, flag, warnings)| {
            let mut r = CharacterizationReport::empty(seed, 2.07e-6, 0.865, 5e6);
            r.eta_total_plus = eta;
            r.bandwidth_3db_hz = bw;
            r.linearity_excluded_points = excluded;
            r.shot_noise_limited = flag;
            r.warnings = warnings;
            r
        })
}

proptest! {
    #[test]
    fn reports_survive_both_formats(r in report_strategy()) {
        let mut flat = Vec::new();
        r.write_flat(&mut flat).unwrap();
        let mut json = Vec::new();
        r.write_json(&mut json).unwrap();
        prop_assert_eq!(CharacterizationReport::read_json(json.as_slice()).unwrap(), r.clone());
        let back = CharacterizationReport::read_flat(flat.as_slice()).unwrap();
        prop_assert!(diff_reports(&back, &r, &Tolerances::default()).passed());
    }

    #[test]
    fn spectra_survive_text(psd in proptest::collection::vec(1e-30f64..1e-3, 1..50), rbw in 1e3f64..1e6) {
        let freqs: Vec<f64> = (0..psd.len()).map(|i| i as f64 * rbw / 2.0).collect();
        let s = Spectrum::new(freqs, psd, rbw, rbw / 10.0, 7, SpectrumUnits::V2PerHz).unwrap();
        let mut buf = Vec::new();
        s.write_to(&mut buf).unwrap();
        prop_assert_eq!(Spectrum::read_from(buf.as_slice()).unwrap(), s);
    }
}
