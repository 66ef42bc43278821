//! Run the event-driven spiking network on the built-in instance and print
//! a text raster of the spike trains, plus the current-range and
//! inter-spike-interval bounds the dynamics guarantee.
//!
//! Run with: cargo run --example spike_raster

use slca::harness::reference_problem;
use slca::spiking::{derive_bounds, run_event_driven, SpikingConfig};

fn main() -> slca::Result<()> {
    let problem = reference_problem();
    let mut cfg = SpikingConfig::for_problem(&problem);
    cfg.t_end = 30.0;
    let log = run_event_driven(&problem, &cfg)?;

    // 90 text columns spanning [0, t_end]; '|' marks at least one spike.
    let cols = 90usize;
    println!("raster over [0, {}]:", cfg.t_end);
    for (i, train) in log.spikes.iter().enumerate() {
        let mut row = vec!['.'; cols];
        for &t in train {
            let k = ((t / cfg.t_end) * cols as f64).min(cols as f64 - 1.0) as usize;
            row[k] = '|';
        }
        println!("neuron {i}: {}  ({} spikes)", row.iter().collect::<String>(), train.len());
    }

    let bounds = derive_bounds(&problem, &cfg, &log);
    println!();
    println!("currents stayed in [{:.4}, {:.4}]", bounds.mu_min_observed, bounds.mu_max_observed);
    println!("guaranteed envelope     [{:.4}, {:.4}]", bounds.b_minus, bounds.b_plus);
    if let (Some(observed), Some(floor)) = (bounds.min_observed_isi, bounds.min_isi) {
        println!("shortest interval between spikes {observed:.4} (guaranteed floor {floor:.4})");
    }
    println!("violations: {}", bounds.mu_violations + bounds.isi_violations);
    Ok(())
}
