//! Fits a second-order response to a simulated gain spectrum and reads off
//! the -3 dB bandwidth under both corner-unit readings.

use homodyne::analysis::{bandwidth_details, characterize_full, SweepConfig};
use homodyne::presets::paper_2um;

fn main() -> homodyne::Result<()> {
    let (model, lo) = paper_2um();
    let mut cfg = SweepConfig::reference(lo.repetition_rate, 3);
    cfg.dc_powers.clear();
    cfg.sweep_powers.clear();
    cfg.cmrr_power = None;

    let run = characterize_full(&model, &lo, &cfg)?;
    let fit = run.butterworth.as_ref().expect("gain spectrum was simulated");
    let gain = run.corrected_gain.as_ref().expect("gain spectrum was simulated");
    let truth = model.response();
    println!("generating p = {:.4}, f_star = {:.4} MHz", truth.p, truth.f_star / 1e6);
    println!(
        "fitted     p = {:.4}, f_star = {:.4} MHz, R^2 = {:.4}",
        fit.shape.p,
        fit.shape.f_star / 1e6,
        fit.r_squared
    );

    let bw = bandwidth_details(&fit.shape)?;
    println!("-3 dB from DC       {:.3} MHz", bw.relative_to_dc / 1e6);
    if let Some(peak) = bw.relative_to_peak {
        println!("-3 dB from peak     {:.3} MHz", peak / 1e6);
    }
    println!("corner read as Hz   {:.3} MHz", bw.omega_read_as_hz / 1e6);

    println!("\n  f (MHz)  measured  model");
    for (f, g) in gain.freqs.iter().zip(&gain.psd).filter(|(f, _)| **f <= 35e6).step_by(25) {
        println!("{:>8.2}  {g:.4}    {:.4}", f / 1e6, fit.model(*f));
    }
    Ok(())
}
