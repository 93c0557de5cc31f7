//! Simulates the full measurement campaign on the reference preset and
//! prints the characterization report.

use homodyne::analysis::{characterize_full, SweepConfig};
use homodyne::presets::paper_2um;

fn main() -> homodyne::Result<()> {
    let (model, lo) = paper_2um();
    let cfg = SweepConfig::reference(lo.repetition_rate, 1);
    let run = characterize_full(&model, &lo, &cfg)?;

    println!("sweep point  variance (V^2/Hz)");
    for (p, v) in &run.variances {
        println!("{:>8.2} mW  {v:.4e}", p * 1e3);
    }
    println!();
    run.report.write_flat(std::io::stdout().lock())?;
    Ok(())
}
