//! Analytic view of the reference detector: responses, DC levels, noise
//! budget and shot-noise-equivalent power.

use homodyne::detector::{analytic_output_psd, butterworth_params, dc_voltage, shot_noise_density, snep};
use homodyne::presets::paper_2um;
use homodyne::Illumination;

fn main() -> homodyne::Result<()> {
    let (model, lo) = paper_2um();

    let circuit = butterworth_params(&model);
    let used = model.response();
    println!("circuit response   p = {:.3}, f_star = {:.2} MHz", circuit.p, circuit.f_star / 1e6);
    println!(
        "simulated response p = {:.3}, f_star = {:.3} MHz, peak at {:.3} MHz",
        used.p,
        used.f_star / 1e6,
        used.peak_frequency() / 1e6
    );

    let wl = lo.wavelength;
    println!(
        "total efficiency   PD+ {:.3}, PD- {:.3}",
        model.pd_plus.total_efficiency(wl),
        model.pd_minus.total_efficiency(wl)
    );
    for ill in [Illumination::Plus, Illumination::Minus, Illumination::Balanced] {
        println!("DC at 1 mW, {ill:?}: {:+.4} V", dc_voltage(&model, &lo, ill)?);
    }

    let shot = shot_noise_density(&model, lo.average_power).sqrt();
    println!(
        "current noise      shot {:.2} pA/rtHz, electronic {:.2} pA/rtHz",
        shot * 1e12,
        model.electronic_noise_density * 1e12
    );
    println!("SNEP               {:.1} uW", snep(&model) * 1e6);

    let freqs = [1e6, 5e6, 10e6, 20e6, 40e6];
    for (f, s) in freqs.iter().zip(analytic_output_psd(&model, &lo, &freqs)) {
        println!("S_V({:>4.0} MHz) = {s:.3e} V^2/Hz", f / 1e6);
    }
    Ok(())
}
