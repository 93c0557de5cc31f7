use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use homodyne::cli::{EXIT_CONFIG, EXIT_DIFF_FAILED, EXIT_IO, EXIT_OK, EXIT_PARSE, EXIT_USAGE};
use tempfile::TempDir;

fn homodyne(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_homodyne")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Preset with a short, cheap power sweep.
fn small_config(dir: &Path, extra: &str) -> std::path::PathBuf {
    let p = dir.join("small.cfg");
    let text =
        format!("preset = paper-2um\nseed = 4\nsweep_powers_mw = 0.2, 0.4, 0.6, 0.8, 1.0\nn_averages = 20\n{extra}");
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn presets_lists_and_prints() {
    let out = homodyne(&["presets"]);
    assert_eq!(code(&out), EXIT_OK);
    assert!(String::from_utf8_lossy(&out.stdout).lines().any(|l| l == "paper-2um"));

    let out = homodyne(&["presets", "paper-2um"]);
    assert_eq!(code(&out), EXIT_OK);
    assert!(String::from_utf8_lossy(&out.stdout).contains("feedback_resistance_ohm = 3900"));

    assert_eq!(code(&homodyne(&["presets", "nope"])), EXIT_CONFIG);
}

#[test]
fn usage_errors() {
    assert_eq!(code(&homodyne(&["frobnicate"])), EXIT_USAGE);
    assert_eq!(code(&homodyne(&["simulate", "--experiment", "bogus"])), EXIT_USAGE);
}

#[test]
fn empty_sweep_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = small_config(tmp.path(), "sweep_powers_w =\n");
    let out = homodyne(&[
        "simulate",
        "--config",
        path(&cfg),
        "--experiment",
        "power-sweep",
        "--out",
        path(&tmp.path().join("o")),
    ]);
    assert_eq!(code(&out), EXIT_CONFIG, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn config_and_preset_together_rejected() {
    let tmp = TempDir::new().unwrap();
    let cfg = small_config(tmp.path(), "");
    let out = homodyne(&["characterize", "--config", path(&cfg), "--preset", "paper-2um"]);
    assert_eq!(code(&out), EXIT_CONFIG);
}

#[test]
fn malformed_config_is_a_parse_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("bad.cfg");
    fs::write(&cfg, "preset = paper-2um\nthis line has no equals sign\n").unwrap();
    assert_eq!(code(&homodyne(&["simulate", "--config", path(&cfg)])), EXIT_PARSE);
}

#[test]
fn missing_ingest_directory_is_an_io_error() {
    let tmp = TempDir::new().unwrap();
    let out =
        homodyne(&["characterize", "--ingest", path(&tmp.path().join("absent")), "--out", path(&tmp.path().join("o"))]);
    assert_eq!(code(&out), EXIT_IO);
}

#[test]
fn ingest_without_dark_warns_and_succeeds() {
    let tmp = TempDir::new().unwrap();
    let cfg = small_config(tmp.path(), "");
    let meas = tmp.path().join("meas");
    let out = homodyne(&["simulate", "--config", path(&cfg), "--experiment", "power-sweep", "--out", path(&meas)]);
    assert_eq!(code(&out), EXIT_OK, "{}", String::from_utf8_lossy(&out.stderr));
    fs::remove_file(meas.join("dark.txt")).unwrap();

    let report_dir = tmp.path().join("report");
    let out = homodyne(&["characterize", "--config", path(&cfg), "--ingest", path(&meas), "--out", path(&report_dir)]);
    assert_eq!(code(&out), EXIT_OK, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
    let report = fs::read_to_string(report_dir.join("report.txt")).unwrap();
    assert!(report.contains("electronic_noise_density_a_per_rthz = unavailable"));
    assert!(report.contains("eta_total_plus = unavailable"));
}

#[test]
fn ingest_reproduces_direct_characterization() {
    let tmp = TempDir::new().unwrap();
    let cfg = small_config(tmp.path(), "");
    let (meas, direct, ingested) = (tmp.path().join("m"), tmp.path().join("d"), tmp.path().join("i"));
    assert_eq!(code(&homodyne(&["simulate", "--config", path(&cfg), "--out", path(&meas)])), EXIT_OK);
    assert_eq!(code(&homodyne(&["characterize", "--config", path(&cfg), "--out", path(&direct)])), EXIT_OK);
    assert_eq!(
        code(&homodyne(&["characterize", "--config", path(&cfg), "--ingest", path(&meas), "--out", path(&ingested)])),
        EXIT_OK
    );
    for name in ["report.txt", "report.json", "fig1b_dc.txt", "fig2b_linearity.txt"] {
        assert_eq!(fs::read(direct.join(name)).unwrap(), fs::read(ingested.join(name)).unwrap(), "{name}");
    }

    let a = direct.join("report.txt");
    let out = homodyne(&["report-diff", path(&a), path(&ingested.join("report.json"))]);
    assert_eq!(code(&out), EXIT_OK);
    assert!(String::from_utf8_lossy(&out.stdout).contains("0 failed"));
}

#[test]
fn report_diff_flags_changes() {
    let tmp = TempDir::new().unwrap();
    let cfg = small_config(tmp.path(), "");
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert_eq!(code(&homodyne(&["characterize", "--config", path(&cfg), "--out", path(&a)])), EXIT_OK);
    assert_eq!(code(&homodyne(&["characterize", "--config", path(&cfg), "--seed", "5", "--out", path(&b)])), EXIT_OK);

    let (ra, rb) = (a.join("report.txt"), b.join("report.txt"));
    let strict = homodyne(&["report-diff", path(&ra), path(&rb)]);
    assert_eq!(code(&strict), EXIT_DIFF_FAILED);

    let loose = homodyne(&[
        "report-diff",
        path(&ra),
        path(&rb),
        "--tol",
        "*=20%",
        "--tol",
        "seed=1",
        "--tol",
        "linearity_intercept=1e-15",
        "--tol",
        "eta_total_plus_stderr=100%",
        "--tol",
        "linearity_slope_stderr=100%",
    ]);
    assert_eq!(code(&loose), EXIT_OK, "{}", String::from_utf8_lossy(&loose.stdout));

    assert_eq!(code(&homodyne(&["report-diff", path(&ra), path(&rb), "--tol", "seed"])), EXIT_CONFIG);
}
