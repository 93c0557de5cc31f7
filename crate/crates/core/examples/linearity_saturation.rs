//! Power sweep: band-averaged noise variance against LO power, linear fit
//! and saturation onset.

use homodyne::analysis::{characterize_full, SweepConfig};
use homodyne::presets::paper_2um;

fn main() -> homodyne::Result<()> {
    let (model, lo) = paper_2um();
    let mut cfg = SweepConfig::reference(lo.repetition_rate, 1);
    cfg.dc_powers.clear();
    cfg.gain_power = None;
    cfg.cmrr_power = None;

    let run = characterize_full(&model, &lo, &cfg)?;
    let fit = run.linearity.as_ref().expect("sweep was simulated");
    println!(" P (mW)   variance (V^2/Hz)   fit");
    for (i, (p, v)) in run.variances.iter().enumerate() {
        let mark = if fit.excluded_points.contains(&i) { "excluded" } else { "" };
        println!("{:>7.2}   {v:.4e}          {:.4e} {mark}", p * 1e3, fit.predict(*p));
    }
    println!(
        "slope {:.4e} V^2/Hz/W, R^2 {:.5}, shot-noise limited: {}",
        fit.slope, fit.r_squared, fit.shot_noise_limited
    );
    match run.report.saturation_onset_w {
        Some(p) => println!("saturation onset {:.2} mW", p * 1e3),
        None => println!("no saturation in range"),
    }
    if let (Some(c), Some(p)) = (run.report.clearance_db, run.report.clearance_power_w) {
        println!("clearance at 5 MHz, {:.1} mW: {c:.2} dB", p * 1e3);
    }
    Ok(())
}
