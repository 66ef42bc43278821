//! Decode one spike train three ways (window counts, thresholded average
//! current, exponential kernel) at growing observation times and compare
//! their objective errors. The thresholded-current estimate converges
//! fastest because it reads the underlying currents, not just counts.
//!
//! Run with: cargo run --example readout_comparison

use slca::harness::reference_problem;
use slca::readout::{default_tau_kernel, rate_exp_kernel, rate_thresholded_current, rate_window};
use slca::solvers::coord_descent;
use slca::spiking::{run_event_driven, SpikingConfig};

fn main() -> slca::Result<()> {
    let problem = reference_problem();
    let mut cfg = SpikingConfig::for_problem(&problem);
    cfg.t_end = 100.0;
    let log = run_event_driven(&problem, &cfg)?;
    let optimum = coord_descent(&problem, 100_000, 1e-14)?.objective;
    let spec = problem.threshold_spec();
    let tau = default_tau_kernel(&log);

    println!("objective error above optimum, by estimator and window (0, t]:");
    println!("     t    window       thresh_current  exp_kernel");
    for &t in &[2.0, 5.0, 10.0, 20.0, 50.0, 100.0] {
        let e_win = problem.objective(&rate_window(&log, 0.0, t)?)? - optimum;
        let e_cur = problem.objective(&rate_thresholded_current(&log, 0.0, t, &spec)?)? - optimum;
        let e_ker = problem.objective(&rate_exp_kernel(&log, t, tau)?)? - optimum;
        println!("{t:6.1}  {e_win:12.3e}  {e_cur:14.3e}  {e_ker:10.3e}");
    }
    println!();
    println!("final thresholded-current estimate: {:?}", rate_thresholded_current(&log, 10.0, 100.0, &spec)?);
    Ok(())
}
