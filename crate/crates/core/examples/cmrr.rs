//! Common-mode rejection at the repetition rate for several splitter
//! imbalances, against the ideal-imbalance prediction.

use homodyne::analysis::{characterize_full, cmrr_from_raw_db, SweepConfig, ADDITION_CORRECTION_DB};
use homodyne::presets::paper_2um;

fn main() -> homodyne::Result<()> {
    let raw = 54.0;
    println!("{raw} dB raw difference -> {:.2} dB CMRR", cmrr_from_raw_db(raw).cmrr_db);

    let (model, lo) = paper_2um();
    println!("\nimbalance   simulated (dB)   predicted (dB)");
    for (i, eps) in [0.002, 0.005, 0.02, 0.1].into_iter().enumerate() {
        let mut cfg = SweepConfig::reference(lo.repetition_rate, i as u64);
        cfg.dc_powers.clear();
        cfg.sweep_powers.clear();
        cfg.gain_power = None;
        cfg.cmrr_imbalance = eps;
        let r = characterize_full(&model, &lo, &cfg)?.report;
        let predicted = -20.0 * eps.log10() - ADDITION_CORRECTION_DB;
        println!("{eps:>9}   {:>14.2}   {predicted:>14.2}", r.cmrr_db.unwrap_or(f64::NAN));
    }
    Ok(())
}
