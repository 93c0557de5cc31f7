//! Builds a run configuration from a preset plus overrides, writes it out
//! and reads it back.

use homodyne::config::RunConfig;

fn main() -> homodyne::Result<()> {
    let text = "\
preset = paper-2um
# lighter sweep, different seed
seed = 12
sweep_powers_mw = 0.5, 1.0, 1.5
rbw_khz = 100
gain_power_w = none
feedback_resistance_kohm = 4.7
";
    let cfg = RunConfig::read_from(text.as_bytes())?;
    println!(
        "seed {}, {} sweep points, rbw {} Hz, gain run {:?}, R_f {} Ohm",
        cfg.sweep.seed,
        cfg.sweep.sweep_powers.len(),
        cfg.sweep.rbw,
        cfg.sweep.gain_power,
        cfg.model.feedback.gain_resistor
    );

    let mut written = Vec::new();
    cfg.write_to(&mut written)?;
    let back = RunConfig::read_from(written.as_slice())?;
    assert_eq!(back.sweep, cfg.sweep);
    assert_eq!(back.model, cfg.model);
    println!("round trip exact; {} lines written", written.iter().filter(|&&b| b == b'\n').count());

    match RunConfig::read_from("preset = paper-2um\nrbw_parsecs = 3\n".as_bytes()) {
        Err(e) => println!("rejected: {e}"),
        Ok(_) => println!("unexpectedly accepted"),
    }
    Ok(())
}
