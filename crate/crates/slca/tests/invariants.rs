//! Cross-module property tests: randomized instances exercising the
//! relationships the library promises between its solvers, simulators,
//! and readouts.

use proptest::prelude::*;

use slca::analog::{integrate, IntegratorConfig, IntegratorMethod};
use slca::error::SlcaError;
use slca::harness::{channel_merge, channel_split, gen_random_problem, reference_problem};
use slca::model::{Dictionary, Mode, SparseCodingProblem};
use slca::readout::{rate_thresholded_current, rate_window};
use slca::solvers::{coord_descent, fista};
use slca::spiking::{run_event_driven, run_fixed_step, Engine, SpikingConfig};

fn small_random(seed: u64) -> SparseCodingProblem {
    gen_random_problem(10, 20, 1.0, seed).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// The two conventional solvers are independent implementations; on any
    /// generated instance they must land on the same objective value.
    #[test]
    fn solvers_agree_on_random_instances(seed in 0u64..10_000) {
        let problem = small_random(seed);
        let cd = coord_descent(&problem, 50_000, 1e-12).unwrap();
        let fi = fista(&problem, 100_000, 1e-13).unwrap();
        let gap = (fi.objective - cd.objective).abs() / cd.objective.abs().max(1.0);
        prop_assert!(gap <= 1e-8, "objective gap {gap:.3e} (cd {}, fista {})", cd.objective, fi.objective);
        prop_assert!(cd.kkt <= 1e-8, "cd kkt {:.3e}", cd.kkt);
    }

    /// A settled analog trajectory is a solution of the same problem the
    /// coordinate-descent oracle solves.
    #[test]
    fn analog_settles_onto_the_oracle_solution(seed in 0u64..10_000) {
        let problem = small_random(seed);
        let cfg = IntegratorConfig {
            method: IntegratorMethod::Rk4,
            step: 2e-3,
            t_end: 150.0,
            settle_tol: 1e-10,
            record_every: 10_000,
        };
        let traj = integrate(&problem, &vec![0.0; problem.num_atoms()], &cfg).unwrap();
        let cd = coord_descent(&problem, 50_000, 1e-12).unwrap();
        let gap = (problem.objective(&traj.final_sample().a).unwrap() - cd.objective).abs()
            / cd.objective.abs().max(1.0);
        prop_assert!(gap <= 1e-5, "relative objective gap {gap:.3e}");
    }

    /// Splitting a signed vector into nonnegative channel pairs and merging
    /// back is the identity, and the split never goes negative.
    #[test]
    fn channel_split_round_trips(xs in prop::collection::vec(-10.0f64..10.0, 0..40)) {
        let split = channel_split(&xs);
        prop_assert_eq!(split.len(), 2 * xs.len());
        prop_assert!(split.iter().all(|&v| v >= 0.0));
        let merged = channel_merge(&split).unwrap();
        prop_assert_eq!(merged, xs);
    }

    /// Every rate estimator returns nonnegative rates, zero for neurons
    /// that never spiked.
    #[test]
    fn readouts_are_nonnegative(seed in 0u64..10_000) {
        let problem = small_random(seed);
        let mut cfg = SpikingConfig::for_problem(&problem);
        cfg.t_end = 30.0;
        let log = run_event_driven(&problem, &cfg).unwrap();
        let window = rate_window(&log, 3.0, 30.0).unwrap();
        let current = rate_thresholded_current(&log, 3.0, 30.0, &problem.threshold_spec()).unwrap();
        for i in 0..problem.num_atoms() {
            prop_assert!(window[i] >= 0.0 && current[i] >= 0.0);
            if log.spikes[i].is_empty() {
                prop_assert_eq!(window[i], 0.0);
            }
        }
    }
}

/// Runs are pure functions of (problem, config): repeating one must
/// reproduce every field of the log, bit for bit.
#[test]
fn spiking_runs_are_deterministic() {
    for seed in [3u64, 17, 29] {
        let problem = small_random(seed);
        let mut cfg = SpikingConfig::for_problem(&problem);
        cfg.t_end = 40.0;
        let a = run_event_driven(&problem, &cfg).unwrap();
        let b = run_event_driven(&problem, &cfg).unwrap();
        assert!(a == b, "event-driven logs differ for seed {seed}");
    }
}

/// The fixed-step engine at a small step must see the same spikes the
/// exact event-driven engine emits, up to an occasional boundary case
/// where a spike lands within one step of the horizon.
#[test]
fn engines_agree_on_spike_counts() {
    for seed in [1u64, 2, 3, 4, 5] {
        let problem = small_random(seed);
        let mut cfg = SpikingConfig::for_problem(&problem);
        cfg.t_end = 30.0;
        let exact = run_event_driven(&problem, &cfg).unwrap();
        cfg.engine = Engine::FixedStep;
        cfg.step = Some(1e-3);
        let stepped = run_fixed_step(&problem, &cfg).unwrap();
        for i in 0..problem.num_atoms() {
            let d = exact.spikes[i].len().abs_diff(stepped.spikes[i].len());
            assert!(
                d <= 1,
                "seed {seed} neuron {i}: {} exact vs {} fixed-step spikes",
                exact.spikes[i].len(),
                stepped.spikes[i].len()
            );
        }
    }
}

/// A tiny per-neuron spike cap must abort the run with the offending
/// neuron identified, not truncate silently.
#[test]
fn tiny_spike_cap_aborts_loudly() {
    let problem = reference_problem();
    let mut cfg = SpikingConfig::for_problem(&problem);
    cfg.t_end = 100.0;
    cfg.max_spikes_per_neuron = 5;
    match run_event_driven(&problem, &cfg) {
        Err(SlcaError::ExplodingRate { neuron, limit, t }) => {
            assert_eq!(limit, 5);
            assert!(neuron < 3 && t > 0.0 && t <= 100.0);
        }
        other => panic!("expected an exploding-rate error, got {other:?}"),
    }
}

/// Relabeling atoms relabels the outputs: simulate a column-permuted
/// problem and check the spike trains and readouts permute with it.
#[test]
fn readouts_commute_with_atom_permutation() {
    let problem = small_random(7);
    let n = problem.num_atoms();
    let m = problem.signal_dim();
    let perm: Vec<usize> = (0..n).map(|i| (i * 7 + 3) % n).collect();
    {
        let mut sorted = perm.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..n).collect::<Vec<_>>(), "7 and 20 are coprime, so this is a permutation");
    }

    let ops = problem.ops();
    let mut permuted = vec![0.0; m * n];
    let mut unit = vec![0.0; n];
    let mut col = vec![0.0; m];
    for (new_j, &old_j) in perm.iter().enumerate() {
        unit[old_j] = 1.0;
        ops.apply(&unit, &mut col);
        unit[old_j] = 0.0;
        permuted[new_j * m..(new_j + 1) * m].copy_from_slice(&col);
    }
    let dict = Dictionary::from_col_major(m, n, permuted).unwrap();
    let shuffled = SparseCodingProblem::from_dictionary(
        dict,
        problem.signal().to_vec(),
        problem.lambda1(),
        problem.lambda2(),
        Mode::Classo,
    )
    .unwrap();

    let mut cfg = SpikingConfig::for_problem(&problem);
    cfg.t_end = 30.0;
    let base_log = run_event_driven(&problem, &cfg).unwrap();
    let perm_log = run_event_driven(&shuffled, &cfg).unwrap();
    let base_rates = rate_window(&base_log, 3.0, 30.0).unwrap();
    let perm_rates = rate_window(&perm_log, 3.0, 30.0).unwrap();
    for (new_j, &old_j) in perm.iter().enumerate() {
        assert_eq!(
            base_log.spikes[old_j], perm_log.spikes[new_j],
            "spike train of atom {old_j} must follow it to slot {new_j}"
        );
        assert_eq!(base_rates[old_j], perm_rates[new_j]);
    }
}

/// Problems, spike logs, and solver reports survive a JSON round-trip
/// exactly (full float precision, not shortest-repr truncation).
#[test]
fn json_round_trips_preserve_every_bit() {
    let dir = tempfile::tempdir().unwrap();
    let problem = small_random(11);
    let mut cfg = SpikingConfig::for_problem(&problem);
    cfg.t_end = 25.0;
    let log = run_event_driven(&problem, &cfg).unwrap();
    let path = dir.path().join("log.json");
    slca::io::save_spike_log(&path, &log).unwrap();
    let reloaded = slca::io::load_spike_log(&path).unwrap();
    assert!(reloaded == log, "spike log changed across save/load");

    let report = coord_descent(&problem, 10_000, 1e-12).unwrap();
    let rpath = dir.path().join("report.json");
    slca::io::save_json(&rpath, &report).unwrap();
    let back: slca::solvers::SolverReport = slca::io::load_json(&rpath).unwrap();
    assert_eq!(back.solution, report.solution);
    assert_eq!(back.objective, report.objective);
    assert_eq!(back.objective_trace, report.objective_trace);
}
