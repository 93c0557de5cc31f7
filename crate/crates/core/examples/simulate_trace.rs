//! Generates a short balanced output trace and summarizes it.

use homodyne::presets::paper_2um;
use homodyne::synth::simulate_homodyne;
use homodyne::{Scenario, ScenarioKind, SynthConfig};

fn main() -> homodyne::Result<()> {
    let (model, lo) = paper_2um();
    let fs = 16.0 * lo.repetition_rate;
    let cfg = SynthConfig::new(fs, (1 << 16) as f64 / fs, 42);

    for scenario in
        [Scenario::balanced(), Scenario::balanced().with_imbalance(0.01), Scenario::new(ScenarioKind::BlockedMinus)]
    {
        let out = simulate_homodyne(&model, &lo, &scenario, &cfg)?;
        let rms = (out.ac.samples().iter().map(|v| v * v).sum::<f64>() / out.ac.len() as f64).sqrt();
        println!(
            "{:?} (imbalance {}): DC {:+.4} V, AC rms {:.3} mV over {} samples",
            scenario.kind,
            scenario.arm_imbalance,
            out.dc_value,
            rms * 1e3,
            out.ac.len()
        );
    }

    let out = simulate_homodyne(&model, &lo, &Scenario::balanced(), &cfg)?;
    let head = out.ac.samples().iter().take(8).map(|v| format!("{:+.2e}", v)).collect::<Vec<_>>();
    println!("first samples: {}", head.join(" "));
    Ok(())
}
