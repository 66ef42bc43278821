//! Reference solvers: proximal gradient (FISTA) and cyclic coordinate
//! descent.
//!
//! Both minimize the same objective as the network dynamics and report a
//! final optimality residual, so every dynamical result in this crate can
//! be cross-checked against two independent optimizers. Coordinate descent
//! performs exact per-coordinate minimization and descends monotonically;
//! it is the higher-precision oracle of the two. FISTA's momentum makes
//! its objective trace ripple, but it converges fast on large instances.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SlcaError};
use crate::model::{Mode, SparseCodingProblem};

/// Default relative-objective-change tolerance for FISTA.
pub const DEFAULT_FISTA_TOL: f64 = 1e-10;
/// Default FISTA iteration cap.
pub const DEFAULT_FISTA_MAX_ITER: usize = 100_000;
/// Default max-coordinate-change tolerance for coordinate descent.
pub const DEFAULT_CD_TOL: f64 = 1e-12;
/// Default coordinate-descent sweep cap.
pub const DEFAULT_CD_MAX_SWEEPS: usize = 100_000;

/// Outcome of a solver run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverReport {
    /// Final coefficients.
    pub solution: Vec<f64>,
    /// Objective value at the solution.
    pub objective: f64,
    /// Optimality residual at the solution (see
    /// [`SparseCodingProblem::kkt_residual`]).
    pub kkt: f64,
    /// Iterations (FISTA) or sweeps (coordinate descent) performed.
    pub iterations: usize,
    /// (iteration, objective) pairs, one per iteration or sweep, with an
    /// initial entry at index 0.
    pub objective_trace: Vec<(usize, f64)>,
    /// True when the stopping tolerance was reached before the cap.
    pub converged: bool,
}

/// Largest eigenvalue of Phi^T Phi by power iteration, matrix-free.
///
/// Starts from a fixed-seed random vector so the estimate is reproducible,
/// and stops when the eigenvalue estimate changes by at most `rel_tol`
/// relatively.
pub fn max_gram_eigenvalue(problem: &SparseCodingProblem, rel_tol: f64) -> Result<f64> {
    let ops = problem.ops();
    let n = problem.num_atoms();
    let m = problem.signal_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5CA1_AB1E);
    let mut x: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(SlcaError::InvalidConfig("power iteration start vector is zero".into()));
    }
    for v in x.iter_mut() {
        *v /= norm;
    }
    let mut fit = vec![0.0; m];
    let mut z = vec![0.0; n];
    let mut eig = 0.0f64;
    for _ in 0..10_000 {
        ops.apply(&x, &mut fit);
        ops.transpose_apply(&fit, &mut z);
        let new_eig = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        if new_eig <= 0.0 {
            return Err(SlcaError::InvalidConfig("operator maps the start vector to zero; cannot estimate a step size".into()));
        }
        for (xi, &zi) in x.iter_mut().zip(&z) {
            *xi = zi / new_eig;
        }
        if (new_eig - eig).abs() <= rel_tol * new_eig {
            return Ok(new_eig);
        }
        eig = new_eig;
    }
    Ok(eig)
}

fn prox(x: f64, eta: f64, lambda1: f64, lambda2: f64, two_sided: bool) -> f64 {
    let scale = 1.0 / (1.0 + 2.0 * eta * lambda2);
    if two_sided {
        x.signum() * (x.abs() - eta * lambda1).max(0.0) * scale
    } else {
        (x - eta * lambda1).max(0.0) * scale
    }
}

/// Accelerated proximal gradient (FISTA) with step 1/L.
///
/// Stops when the objective changes by at most `tol` relative to
/// max(1, |previous objective|) on three consecutive iterations, or after
/// `max_iter` iterations. The streak requirement matters: momentum makes
/// the objective ripple, and a single tiny change can be a crest of the
/// ripple far from the minimum. A zero tol disables the early exit, so
/// exactly `max_iter` iterations run.
pub fn fista(problem: &SparseCodingProblem, max_iter: usize, tol: f64) -> Result<SolverReport> {
    if !(tol >= 0.0) {
        return Err(SlcaError::InvalidConfig(format!("fista tol must be nonnegative, got {tol}")));
    }
    let n = problem.num_atoms();
    let m = problem.signal_dim();
    let lipschitz = max_gram_eigenvalue(problem, 1e-6)? + 2.0 * problem.lambda2();
    let eta = 1.0 / lipschitz;
    let two_sided = problem.mode() == Mode::Lasso;
    let (l1, l2) = (problem.lambda1(), problem.lambda2());
    let ops = problem.ops();

    let mut a = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut a_prev = vec![0.0; n];
    let mut fit = vec![0.0; m];
    let mut grad = vec![0.0; n];
    let mut t = 1.0f64;
    let mut energy = problem.objective(&a)?;
    let mut trace = vec![(0usize, energy)];
    let mut converged = false;
    let mut iterations = 0usize;
    let mut small_streak = 0usize;

    for k in 1..=max_iter {
        // Gradient of the smooth part at y: Phi^T (Phi y - s) + 2 lambda2 y.
        ops.apply(&y, &mut fit);
        for (f, &s) in fit.iter_mut().zip(problem.signal()) {
            *f -= s;
        }
        ops.transpose_apply(&fit, &mut grad);
        a_prev.copy_from_slice(&a);
        for i in 0..n {
            // The squared penalty stays inside the prox, so the gradient
            // here is the fit term only.
            a[i] = prox(y[i] - eta * grad[i], eta, l1, l2, two_sided);
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let momentum = (t - 1.0) / t_next;
        for i in 0..n {
            y[i] = a[i] + momentum * (a[i] - a_prev[i]);
        }
        t = t_next;
        let new_energy = problem.objective(&a)?;
        trace.push((k, new_energy));
        iterations = k;
        if tol > 0.0 && (new_energy - energy).abs() <= tol * energy.abs().max(1.0) {
            small_streak += 1;
            if small_streak >= 3 {
                converged = true;
                energy = new_energy;
                break;
            }
        } else {
            small_streak = 0;
        }
        energy = new_energy;
    }

    let kkt = problem.kkt_residual(&a)?;
    Ok(SolverReport { solution: a, objective: energy, kkt, iterations, objective_trace: trace, converged })
}

/// Cyclic coordinate descent with exact per-coordinate minimization.
///
/// Maintains g_i = sum_{j != i} w_ij a_j incrementally; each update solves
/// its one-dimensional subproblem in closed form:
///
/// ```text
/// a_i <- max(b_i - g_i - lambda1, 0) / (w_ii + 2 lambda2)
/// ```
///
/// (signed analogue in two-sided mode). Stops when no coordinate moved by
/// more than `tol` during a full sweep; a zero tol disables the early
/// exit, so exactly `max_sweeps` sweeps run.
pub fn coord_descent(problem: &SparseCodingProblem, max_sweeps: usize, tol: f64) -> Result<SolverReport> {
    if !(tol >= 0.0) {
        return Err(SlcaError::InvalidConfig(format!("coordinate-descent tol must be nonnegative, got {tol}")));
    }
    let n = problem.num_atoms();
    let b = problem.biases();
    let gram = problem.gram();
    let two_sided = problem.mode() == Mode::Lasso;
    let (l1, l2) = (problem.lambda1(), problem.lambda2());

    let mut a = vec![0.0; n];
    let mut g = vec![0.0; n]; // g[i] = sum_{j != i} w_ij a_j
    let mut trace = vec![(0usize, problem.objective(&a)?)];
    let mut converged = false;
    let mut sweeps = 0usize;

    for sweep in 1..=max_sweeps {
        let mut max_change = 0.0f64;
        for i in 0..n {
            let z = b[i] - g[i];
            let denom = gram.diag(i) + 2.0 * l2;
            let new_ai = if two_sided {
                z.signum() * (z.abs() - l1).max(0.0) / denom
            } else {
                (z - l1).max(0.0) / denom
            };
            let delta = new_ai - a[i];
            if delta != 0.0 {
                a[i] = new_ai;
                gram.with_column(i, |col| {
                    for (k, gk) in g.iter_mut().enumerate() {
                        if k != i {
                            *gk += delta * col[k];
                        }
                    }
                });
                max_change = max_change.max(delta.abs());
            }
        }
        trace.push((sweep, problem.objective(&a)?));
        sweeps = sweep;
        if tol > 0.0 && max_change <= tol {
            converged = true;
            break;
        }
    }

    let objective = trace.last().expect("trace has initial entry").1;
    let kkt = problem.kkt_residual(&a)?;
    Ok(SolverReport { solution: a, objective, kkt, iterations: sweeps, objective_trace: trace, converged })
}
