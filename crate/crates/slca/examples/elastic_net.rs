//! Add a squared penalty (lambda2 > 0) and watch the firing threshold do
//! the work: the spiking network solves the elastic-net problem when its
//! threshold is set to 2*lambda2 + 1, with no other change.
//!
//! Run with: cargo run --example elastic_net

use slca::harness::reference_problem;
use slca::model::{Mode, SparseCodingProblem};
use slca::readout::rate_thresholded_current;
use slca::solvers::coord_descent;
use slca::spiking::{run_event_driven, SpikingConfig};

fn main() -> slca::Result<()> {
    // Same dictionary and signal as the reference instance, new penalties.
    let base = reference_problem();
    let lambda2 = 0.5;
    let problem = SparseCodingProblem::new(
        base.ops().clone(),
        base.signal().to_vec(),
        base.lambda1(),
        lambda2,
        Mode::ElasticNet,
    )?;

    let oracle = coord_descent(&problem, 100_000, 1e-14)?;
    println!("elastic-net optimum (lambda2 = {lambda2}): {:?}", oracle.solution);
    println!("objective {:.12}, kkt {:.2e}", oracle.objective, oracle.kkt);

    let mut cfg = SpikingConfig::for_problem(&problem);
    assert_eq!(cfg.nu_f, 2.0 * lambda2 + 1.0);
    cfg.t_end = 200.0;
    let log = run_event_driven(&problem, &cfg)?;
    let a = rate_thresholded_current(&log, 20.0, 200.0, &problem.threshold_spec())?;

    println!();
    println!("spiking readout with firing threshold {}: {:?}", cfg.nu_f, a);
    let gap = (problem.objective(&a)? - oracle.objective) / oracle.objective.abs().max(1.0);
    println!("relative objective gap {gap:.2e}");
    println!("(the squared penalty shrinks both active coefficients relative to lambda2 = 0)");
    Ok(())
}
