//! Integrate the analog network and watch its energy descend monotonically
//! to the optimum: the defining property of the dynamics.
//!
//! Run with: cargo run --example analog_descent

use slca::analog::{alca_energy_descent_report, integrate, IntegratorConfig, IntegratorMethod};
use slca::harness::reference_problem;
use slca::solvers::coord_descent;

fn main() -> slca::Result<()> {
    let problem = reference_problem();
    let cfg = IntegratorConfig {
        method: IntegratorMethod::Rk4,
        step: 1e-3,
        t_end: 100.0,
        settle_tol: 1e-9,
        record_every: 2000,
    };
    let traj = integrate(&problem, &[0.0; 3], &cfg)?;

    println!("   t      energy            activities");
    for s in &traj.samples {
        println!("{:6.2}   {:.12}   [{:.4}, {:.4}, {:.4}]", s.t, s.energy, s.a[0], s.a[1], s.a[2]);
    }
    println!("stopped: {:?}", traj.terminated);

    let optimum = coord_descent(&problem, 100_000, 1e-12)?.objective;
    let last = traj.final_sample();
    println!("terminal energy {:.12} vs optimum {:.12}", last.energy, optimum);

    let report = alca_energy_descent_report(&traj);
    println!(
        "descent check over {} recorded intervals: {} increases beyond slack (max increase {:.2e})",
        report.samples.len().saturating_sub(1),
        report.flagged.len(),
        report.max_increase
    );
    Ok(())
}
