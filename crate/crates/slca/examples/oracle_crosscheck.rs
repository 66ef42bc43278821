//! Cross-check all four methods on a batch of seeded random instances.
//! Coordinate descent is the solver of record; everything else must land
//! within its advertised tolerance of it.
//!
//! Run with: cargo run --example oracle_crosscheck

use slca::harness::{compare_methods, gen_random_problem, CompareParams};

fn main() -> slca::Result<()> {
    let params = CompareParams::default();

    println!("seed   objective         fista gap  analog gap  spiking gap  spikes");
    let mut worst_spiking = 0.0f64;
    for seed in 1..=5u64 {
        let problem = gen_random_problem(16, 64, 1.0, seed)?;
        let r = compare_methods(&problem, &params)?;
        println!(
            "{seed:>4}   {:<15.12}  {:.2e}   {:.2e}    {:.2e}     {}",
            r.cd.objective, r.rel_gap_fista, r.rel_gap_analog, r.rel_gap_spiking, r.spike_total
        );
        worst_spiking = worst_spiking.max(r.rel_gap_spiking);
    }
    println!();
    println!("worst spiking gap {worst_spiking:.2e}; the dynamics solve the same problem the solvers do.");
    Ok(())
}
