//! Emulates a spectrum analyzer sweep of the balanced output and compares
//! it with the analytic noise density.

use homodyne::detector::analytic_output_psd;
use homodyne::dsp::{band_average, estimate_psd, gaussian_smooth, samples_needed, to_db};
use homodyne::presets::paper_2um;
use homodyne::synth::simulate_homodyne;
use homodyne::{Scenario, SynthConfig};

fn main() -> homodyne::Result<()> {
    let (model, lo) = paper_2um();
    let fs = 16.0 * lo.repetition_rate;
    let (rbw, vbw, averages) = (300e3, 10e3, 100);
    let n = samples_needed(fs, rbw, averages);
    let cfg = SynthConfig::new(fs, n as f64 / fs, 7);

    let shot = estimate_psd(&simulate_homodyne(&model, &lo, &Scenario::balanced(), &cfg)?.ac, rbw, vbw, averages)?;
    let dark_lo = lo.with_power(0.0);
    let dark = estimate_psd(&simulate_homodyne(&model, &dark_lo, &Scenario::balanced(), &cfg)?.ac, rbw, vbw, averages)?;
    let shot_s = gaussian_smooth(&shot, 1.5e6)?;
    let dark_s = gaussian_smooth(&dark, 1.5e6)?;

    println!("   f (MHz)   shot (V^2/Hz)   analytic      dark        clearance (dB)");
    for f in [2e6, 5e6, 10e6, 15e6, 25e6] {
        let expected = analytic_output_psd(&model, &lo, &[f])[0];
        let (s, d) = (shot_s.value_at(f)?, dark_s.value_at(f)?);
        println!("{:>9.1}   {s:.4e}      {expected:.4e}   {d:.4e}   {:.2}", f / 1e6, to_db(s / d)?);
    }
    let band = band_average(&shot, 1e6, 13e6)? - band_average(&dark, 1e6, 13e6)?;
    println!("dark-subtracted 1-13 MHz average: {band:.4e} V^2/Hz");

    let dbm = shot.to_dbm(model.sa_impedance)?;
    println!("at 5 MHz the analyzer shows {:.2} dBm in {:.0} kHz RBW", dbm.value_at(5e6)?, rbw / 1e3);
    Ok(())
}
