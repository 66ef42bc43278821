//! Round-trip a problem and a spike log through their on-disk formats and
//! show nothing changes: CSV holds every f64 exactly, so a reloaded
//! problem solves to the bit-identical answer and a reloaded log decodes
//! to the bit-identical rates.
//!
//! Run with: cargo run --example save_and_reload

use slca::harness::gen_random;
use slca::io;
use slca::model::Mode;
use slca::readout::rate_thresholded_current;
use slca::solvers::coord_descent;
use slca::spiking::{run_event_driven, SpikingConfig};

fn main() -> slca::Result<()> {
    let dir = std::env::temp_dir().join("slca_roundtrip_example");
    std::fs::create_dir_all(&dir)?;

    let g = gen_random(12, 30, 0.8, 42)?;
    let descriptor = io::save_problem(&dir, &g.dictionary, &g.signal, g.lambda1, 0.0, Mode::Classo)?;
    println!("saved problem to {}", descriptor.display());

    let reloaded = io::load_problem(&descriptor)?;
    let direct = slca::harness::gen_random_problem(12, 30, 0.8, 42)?;
    let a_direct = coord_descent(&direct, 100_000, 1e-12)?.solution;
    let a_reload = coord_descent(&reloaded, 100_000, 1e-12)?.solution;
    let identical = a_direct.iter().zip(&a_reload).all(|(x, y)| x.to_bits() == y.to_bits());
    println!("solutions from the original and the reloaded problem are bit-identical: {identical}");

    let mut cfg = SpikingConfig::for_problem(&direct);
    cfg.t_end = 50.0;
    let log = run_event_driven(&direct, &cfg)?;
    let log_path = dir.join("log.json");
    io::save_spike_log(&log_path, &log)?;
    let log2 = io::load_spike_log(&log_path)?;
    println!("spike log round-trips exactly: {}", log == log2);

    let spec = direct.threshold_spec();
    let r1 = rate_thresholded_current(&log, 5.0, 50.0, &spec)?;
    let r2 = rate_thresholded_current(&log2, 5.0, 50.0, &spec)?;
    let same = r1.iter().zip(&r2).all(|(x, y)| x.to_bits() == y.to_bits());
    println!("readout from the reloaded log is bit-identical: {same}");
    Ok(())
}
