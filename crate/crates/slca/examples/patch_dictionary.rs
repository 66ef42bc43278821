//! Sparse-code a small image with a matrix-free patch operator: a local
//! dictionary applied at every stride position, never materializing the
//! full matrix. The same solvers run unchanged because they only use
//! apply / transpose-apply / Gram columns.
//!
//! Run with: cargo run --example patch_dictionary

use std::sync::Arc;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use slca::model::{AtomOps, Dictionary, Mode, SparseCodingProblem};
use slca::patch::PatchOperator;
use slca::solvers::coord_descent;

fn main() -> slca::Result<()> {
    // A 16x16 single-channel image synthesized from 4x4 patterns, and a
    // random nonnegative local dictionary of 6 atoms over 4x4 patches.
    let (height, width, patch, stride) = (16usize, 16usize, 4usize, 4usize);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let local_cols: Vec<f64> =
        (0..patch * patch * 6).map(|_| if rng.random::<f64>() < 0.4 { rng.random::<f64>() } else { 0.0 }).collect();
    let local = Dictionary::from_col_major(patch * patch, 6, local_cols)?.normalize()?;
    let op = PatchOperator::new(height, width, 1, patch, stride, local)?;
    println!(
        "{} positions x {} local atoms = {} global atoms over {} pixels (nothing materialized)",
        op.num_positions(),
        op.local_atoms(),
        op.num_atoms(),
        op.signal_dim()
    );

    // Plant a sparse code and synthesize the image from it.
    let mut truth = vec![0.0; op.num_atoms()];
    for idx in rand::seq::index::sample(&mut rng, op.num_atoms(), 7) {
        truth[idx] = 0.5 + rng.random::<f64>();
    }
    let mut image = vec![0.0; op.signal_dim()];
    op.apply(&truth, &mut image);

    let ops: Arc<dyn AtomOps> = Arc::new(op);
    let problem = SparseCodingProblem::new(ops.clone(), image.clone(), 0.05, 0.0, Mode::Classo)?;
    let report = coord_descent(&problem, 100_000, 1e-12)?;

    let mut reconstruction = vec![0.0; image.len()];
    ops.apply(&report.solution, &mut reconstruction);
    let err: f64 = image
        .iter()
        .zip(&reconstruction)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let support: Vec<usize> =
        report.solution.iter().enumerate().filter(|(_, &v)| v > 1e-6).map(|(i, _)| i).collect();
    println!("planted support: {:?}", truth.iter().enumerate().filter(|(_, &v)| v > 0.0).map(|(i, _)| i).collect::<Vec<_>>());
    println!("recovered support: {support:?}");
    println!("reconstruction error {err:.3e}, objective {:.9}, kkt {:.2e}", report.objective, report.kkt);
    Ok(())
}
