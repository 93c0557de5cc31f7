//! DC efficiency fits and the resulting quantum-efficiency budget.

use homodyne::analysis::{characterize_full, decouple_coupling, eta_snr, total_efficiency, SweepConfig};
use homodyne::presets::paper_2um;

fn main() -> homodyne::Result<()> {
    let (model, lo) = paper_2um();
    let mut cfg = SweepConfig::reference(lo.repetition_rate, 1);
    cfg.gain_power = None;
    cfg.cmrr_power = None;
    let run = characterize_full(&model, &lo, &cfg)?;

    for (name, fit) in [("PD+", &run.dc_fit_plus), ("PD-", &run.dc_fit_minus)] {
        if let Some(f) = fit {
            println!("{name}: eta_total = {:.4} +/- {:.1e}, slope {:.2} V/W", f.eta_total, f.stderr, f.fit.slope);
        }
    }

    let eta_qe = model.pd_plus.quantum_efficiency;
    let r = &run.report;
    let eta_coup = r.eta_coup.unwrap_or(decouple_coupling(0.653, eta_qe)?);
    println!("coupling efficiency {eta_coup:.4} (QE {eta_qe})");

    if let Some(c) = r.clearance_db {
        let snr = eta_snr(c)?;
        println!(
            "simulated clearance {c:.2} dB -> eta_snr {snr:.4} -> eta_tot {:.4}",
            total_efficiency(snr, eta_coup, eta_qe)?
        );
    }
    let snr9 = eta_snr(9.0)?;
    println!("at 9 dB clearance: eta_snr {snr9:.4} -> eta_tot {:.4}", total_efficiency(snr9, eta_coup, eta_qe)?);
    Ok(())
}
