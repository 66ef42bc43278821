//! Accuracy of the fixed-step spiking engine as the step shrinks: each
//! tenfold step reduction buys roughly two digits of terminal objective
//! accuracy. The event-driven engine computes the same network exactly and
//! serves as the yardstick.
//!
//! Run with: cargo run --example step_size_tradeoff

use slca::harness::reference_problem;
use slca::readout::rate_thresholded_current;
use slca::solvers::coord_descent;
use slca::spiking::{run_event_driven, run_fixed_step, Engine, SpikingConfig};

fn main() -> slca::Result<()> {
    let problem = reference_problem();
    let optimum = coord_descent(&problem, 100_000, 1e-14)?.objective;
    let spec = problem.threshold_spec();
    let t_end = 100.0;

    println!("terminal objective error of the readout over ({}, {}]:", t_end / 10.0, t_end);
    let mut previous: Option<f64> = None;
    for &h in &[1e-1, 1e-2, 1e-3, 1e-4] {
        let mut cfg = SpikingConfig::for_problem(&problem);
        cfg.engine = Engine::FixedStep;
        cfg.step = Some(h);
        cfg.t_end = t_end;
        let log = run_fixed_step(&problem, &cfg)?;
        let a = rate_thresholded_current(&log, t_end / 10.0, t_end, &spec)?;
        let err = problem.objective(&a)? - optimum;
        match previous {
            Some(p) => println!("h = {h:6}: error {err:.3e}  ({:.0}x smaller)", p / err),
            None => println!("h = {h:6}: error {err:.3e}"),
        }
        previous = Some(err);
    }

    let mut cfg = SpikingConfig::for_problem(&problem);
    cfg.t_end = t_end;
    let log = run_event_driven(&problem, &cfg)?;
    let a = rate_thresholded_current(&log, t_end / 10.0, t_end, &spec)?;
    println!("exact    : error {:.3e} (event-driven; limited by the finite window, not the step)",
        problem.objective(&a)? - optimum);
    Ok(())
}
