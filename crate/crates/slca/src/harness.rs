//! Problem sources, cross-method comparison, and canned experiments.
//!
//! Everything here is deterministic given its inputs: random problems are
//! fully determined by their seed, and experiment outputs contain no
//! wall-clock fields (timing lives in separate structures so the solution
//! artifacts can be diffed byte-for-byte across runs).

use std::path::PathBuf;
use std::sync::Arc;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analog::{integrate, IntegratorConfig, IntegratorMethod};
use crate::error::{Result, SlcaError};
use crate::io;
use crate::model::{AtomOps, Dictionary, Mode, SparseCodingProblem};
use crate::patch::PatchOperator;
use crate::readout::{self, estimate_rates, rate_exp_kernel, rate_thresholded_current, rate_window, ReadoutKind};
use crate::solvers::{coord_descent, fista};
use crate::spiking::{derive_bounds, run_event_driven, run_fixed_step, DerivedBounds, Engine, SpikeLog, SpikingConfig};

/// The hand-checkable 3-atom, 3-pixel instance used as the ground truth
/// fixture throughout: unit-norm nonnegative atoms, signal [0.5, 1, 1.5],
/// lambda1 = 0.1. Small enough that every quantity can be verified by
/// hand, rich enough that one atom shuts down during the run.
pub fn reference_problem() -> SparseCodingProblem {
    let rows = vec![
        vec![0.3313, 0.8148, 0.4364],
        vec![0.8835, 0.3621, 0.2182],
        vec![0.3313, 0.4527, 0.8729],
    ];
    let dict = Dictionary::from_rows(&rows).expect("the pinned instance is well formed");
    SparseCodingProblem::from_dictionary(dict, vec![0.5, 1.0, 1.5], 0.1, 0.0, Mode::Classo)
        .expect("the pinned instance is well formed")
}

/// A generated problem together with the sparse code that produced its
/// signal.
#[derive(Debug, Clone)]
pub struct GeneratedProblem {
    pub dictionary: Dictionary,
    pub signal: Vec<f64>,
    pub lambda1: f64,
    /// The planted nonnegative code: signal = dictionary * truth.
    pub truth: Vec<f64>,
}

/// Draws a random nonnegative sparse-coding instance, fully determined by
/// the seed.
///
/// Dictionary entries are uniform [0,1), kept with probability `density`
/// and zeroed otherwise, then columns are normalized (an all-zero column
/// is redrawn up to 10 times). The signal is synthesized from a planted
/// code with max(1, N/20) active coefficients uniform in [0.5, 1.5), and
/// lambda1 is set to a tenth of the strongest atom response.
pub fn gen_random(m: usize, n: usize, density: f64, seed: u64) -> Result<GeneratedProblem> {
    if m == 0 || n == 0 {
        return Err(SlcaError::InvalidConfig("need at least one row and one atom".into()));
    }
    if !(density > 0.0 && density <= 1.0) {
        return Err(SlcaError::InvalidConfig(format!("density must lie in (0, 1], got {density}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(m * n);
    for j in 0..n {
        let mut attempts = 0;
        loop {
            let col: Vec<f64> = (0..m)
                .map(|_| {
                    let v = rng.random::<f64>();
                    if density >= 1.0 || rng.random::<f64>() < density {
                        v
                    } else {
                        0.0
                    }
                })
                .collect();
            if col.iter().any(|&x| x != 0.0) {
                data.extend_from_slice(&col);
                break;
            }
            attempts += 1;
            if attempts > 10 {
                return Err(SlcaError::ZeroAtom { index: j, norm: 0.0 });
            }
        }
    }
    let dictionary = Dictionary::from_col_major(m, n, data)?.normalize()?;

    let k = (n / 20).max(1);
    let mut truth = vec![0.0; n];
    for idx in rand::seq::index::sample(&mut rng, n, k) {
        truth[idx] = 0.5 + rng.random::<f64>();
    }
    let mut signal = vec![0.0; m];
    dictionary.apply(&truth, &mut signal);
    let mut b = vec![0.0; n];
    dictionary.transpose_apply(&signal, &mut b);
    let lambda1 = 0.1 * b.iter().fold(0.0f64, |acc, &x| acc.max(x));
    Ok(GeneratedProblem { dictionary, signal, lambda1, truth })
}

/// [`gen_random`] packaged directly as a problem (plain nonnegative mode).
pub fn gen_random_problem(m: usize, n: usize, density: f64, seed: u64) -> Result<SparseCodingProblem> {
    let g = gen_random(m, n, density, seed)?;
    SparseCodingProblem::from_dictionary(g.dictionary, g.signal, g.lambda1, 0.0, Mode::Classo)
}

/// Splits a signed vector into concatenated positive and negative parts:
/// x -> (max(x,0) ‖ max(-x,0)). Both halves are nonnegative, so signed
/// data can feed the nonnegative pipeline.
pub fn channel_split(signal: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * signal.len());
    out.extend(signal.iter().map(|&x| x.max(0.0)));
    out.extend(signal.iter().map(|&x| (-x).max(0.0)));
    out
}

/// Inverse of [`channel_split`]: first half minus second half.
pub fn channel_merge(split: &[f64]) -> Result<Vec<f64>> {
    if split.len() % 2 != 0 {
        return Err(SlcaError::DimensionMismatch {
            context: format!("channel merge needs an even length, got {}", split.len()),
        });
    }
    let m = split.len() / 2;
    Ok((0..m).map(|i| split[i] - split[m + i]).collect())
}

/// Where an experiment's problem comes from. Serializes with a `kind` tag
/// so config files read naturally:
/// `{"kind": "random", "m": 16, "n": 64, "density": 1.0, "seed": 3}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProblemSource {
    /// The built-in 3-atom instance from [`reference_problem`].
    Reference,
    /// A seeded random instance from [`gen_random_problem`].
    Random { m: usize, n: usize, density: f64, seed: u64 },
    /// A problem descriptor on disk (see [`io::load_problem`]).
    Files { problem: PathBuf },
    /// A matrix-free patch-convolution problem: `image` is a CSV of
    /// channels*height rows by width columns (channels stacked), and
    /// `local_dict` a CSV with channels*patch^2 rows, one column per
    /// local atom.
    Patch {
        image: PathBuf,
        local_dict: PathBuf,
        height: usize,
        width: usize,
        channels: usize,
        patch: usize,
        stride: usize,
        lambda1: f64,
        #[serde(default)]
        lambda2: f64,
    },
}

impl Default for ProblemSource {
    fn default() -> Self {
        ProblemSource::Reference
    }
}

/// Materializes a problem from its source description.
pub fn build_problem(source: &ProblemSource) -> Result<SparseCodingProblem> {
    match source {
        ProblemSource::Reference => Ok(reference_problem()),
        ProblemSource::Random { m, n, density, seed } => gen_random_problem(*m, *n, *density, *seed),
        ProblemSource::Files { problem } => io::load_problem(problem),
        ProblemSource::Patch { image, local_dict, height, width, channels, patch, stride, lambda1, lambda2 } => {
            let rows = io::load_matrix_csv(image)?;
            if rows.len() != channels * height || rows.first().map_or(true, |r| r.len() != *width) {
                return Err(SlcaError::DimensionMismatch {
                    context: format!(
                        "image CSV must be {}x{} (channels*height by width), got {}x{}",
                        channels * height,
                        width,
                        rows.len(),
                        rows.first().map_or(0, Vec::len)
                    ),
                });
            }
            let signal: Vec<f64> = rows.concat();
            let local = Dictionary::from_rows(&io::load_matrix_csv(local_dict)?)?;
            let op = PatchOperator::new(*height, *width, *channels, *patch, *stride, local)?;
            SparseCodingProblem::new(Arc::new(op), signal, *lambda1, *lambda2, Mode::Classo)
        }
    }
}

/// One neuron's spike count against the analog prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountVsIntegral {
    pub neuron: usize,
    pub count: usize,
    /// Trapezoidal integral of the thresholded analog state over [0, t].
    pub integral: f64,
    pub rel_error: f64,
}

/// Result of checking count_i(t) ~ integral of T(u_i) over [0, t].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpikeCountComparison {
    pub t: f64,
    pub per_neuron: Vec<CountVsIntegral>,
    /// sum_i |count_i - integral_i| / sum_i integral_i.
    pub aggregate_rel_error: f64,
}

/// Compares cumulative spike counts with the integrated thresholded
/// analog state at time t. Both runs must start from rest (zero initial
/// state) on the same problem and cover [0, t].
pub fn spike_count_vs_alca(
    problem: &SparseCodingProblem,
    log: &SpikeLog,
    traj: &crate::analog::AnalogTrajectory,
    t: f64,
) -> Result<SpikeCountComparison> {
    let n = problem.num_atoms();
    if log.num_neurons() != n || traj.samples.first().map_or(0, |s| s.u.len()) != n {
        return Err(SlcaError::DimensionMismatch {
            context: "spiking log, analog trajectory, and problem must agree on the atom count".into(),
        });
    }
    let traj_end = traj.samples.last().map_or(0.0, |s| s.t);
    if t > log.t_end() * (1.0 + 1e-12) || t > traj_end * (1.0 + 1e-12) {
        return Err(SlcaError::CoverageMismatch {
            context: "count-vs-integral comparison".into(),
            requested: t,
            available: log.t_end().min(traj_end),
        });
    }

    let counts = log.spike_counts_in(0.0, t);
    let integrals = integrate_activity(traj, t);
    let per_neuron: Vec<CountVsIntegral> = (0..n)
        .map(|i| {
            let diff = (counts[i] as f64 - integrals[i]).abs();
            CountVsIntegral {
                neuron: i,
                count: counts[i],
                integral: integrals[i],
                rel_error: if integrals[i] > 0.0 { diff / integrals[i] } else { diff },
            }
        })
        .collect();
    let total_integral: f64 = integrals.iter().sum();
    let total_diff: f64 = per_neuron.iter().map(|r| (r.count as f64 - r.integral).abs()).sum();
    let aggregate_rel_error = if total_integral > 0.0 { total_diff / total_integral } else { total_diff };
    Ok(SpikeCountComparison { t, per_neuron, aggregate_rel_error })
}

/// Trapezoidal cumulative integral of each thresholded coordinate of the
/// trajectory up to time t (interpolating the final partial interval).
fn integrate_activity(traj: &crate::analog::AnalogTrajectory, t: f64) -> Vec<f64> {
    let n = traj.samples.first().map_or(0, |s| s.u.len());
    let mut acc = vec![0.0; n];
    for pair in traj.samples.windows(2) {
        let (s0, s1) = (&pair[0], &pair[1]);
        if s0.t >= t {
            break;
        }
        if s1.t <= t {
            let h = s1.t - s0.t;
            for i in 0..n {
                acc[i] += 0.5 * (s0.a[i] + s1.a[i]) * h;
            }
        } else {
            let h = t - s0.t;
            let w = h / (s1.t - s0.t);
            for i in 0..n {
                let a_t = s0.a[i] + w * (s1.a[i] - s0.a[i]);
                acc[i] += 0.5 * (s0.a[i] + a_t) * h;
            }
            break;
        }
    }
    acc
}

/// How each method is run in a four-way comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CompareParams {
    /// Spiking horizon; the readout window is (readout_frac * t_end, t_end].
    pub spiking_t_end: f64,
    pub readout_frac: f64,
    /// Trace cadence override for the spiking run; the exact readout works
    /// from segments, so a coarse trace saves memory on large instances.
    pub trace_cadence: Option<f64>,
    /// Estimator used for the spiking solution.
    #[serde(default = "default_readout_kind")]
    pub readout: ReadoutKind,
    pub analog: IntegratorConfig,
    pub fista_tol: f64,
    pub fista_max_iter: usize,
    pub cd_tol: f64,
    pub cd_max_sweeps: usize,
}

fn default_readout_kind() -> ReadoutKind {
    ReadoutKind::ThreshCurrent
}

impl Default for CompareParams {
    fn default() -> Self {
        Self {
            spiking_t_end: 200.0,
            readout_frac: 0.1,
            trace_cadence: Some(2.0),
            readout: ReadoutKind::ThreshCurrent,
            analog: IntegratorConfig {
                method: IntegratorMethod::ExplicitEuler,
                step: 2e-3,
                t_end: 150.0,
                settle_tol: 1e-9,
                record_every: 10_000,
            },
            fista_tol: 1e-13,
            fista_max_iter: 200_000,
            cd_tol: 1e-12,
            cd_max_sweeps: 100_000,
        }
    }
}

/// One method's solution quality. The trace pairs a budget with an
/// objective: iterations for the solvers, simulated time for the
/// networks (the spiking trace decodes an origin window (0, t] at ten
/// checkpoints).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub objective: f64,
    pub kkt: f64,
    pub solution: Vec<f64>,
    pub objective_trace: Vec<(f64, f64)>,
}

/// Four-way agreement report; relative gaps are against coordinate
/// descent, the solver of record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub cd: MethodSummary,
    pub fista: MethodSummary,
    pub analog: MethodSummary,
    pub spiking: MethodSummary,
    pub rel_gap_fista: f64,
    pub rel_gap_analog: f64,
    pub rel_gap_spiking: f64,
    pub spike_total: usize,
    pub analog_settled: bool,
    pub bounds: DerivedBounds,
}

/// Solves one problem four ways: coordinate descent, accelerated proximal
/// gradient, the analog network, and the spiking network with the
/// selected readout over the window (readout_frac * t_end, t_end].
pub fn compare_methods(problem: &SparseCodingProblem, params: &CompareParams) -> Result<ComparisonReport> {
    let cd = coord_descent(problem, params.cd_max_sweeps, params.cd_tol)?;
    let fi = fista(problem, params.fista_max_iter, params.fista_tol)?;

    let u0 = vec![0.0; problem.num_atoms()];
    let traj = integrate(problem, &u0, &params.analog)?;
    let analog_a = traj.final_sample().a.clone();
    let analog_trace: Vec<(f64, f64)> = traj.samples.iter().map(|s| (s.t, s.energy)).collect();
    let analog_settled = matches!(traj.terminated, crate::analog::TerminationReason::Settled);

    let mut cfg = SpikingConfig::for_problem(problem);
    cfg.t_end = params.spiking_t_end;
    cfg.trace_cadence = params.trace_cadence;
    let log = run_event_driven(problem, &cfg)?;
    let spec = problem.threshold_spec();
    let t0 = params.readout_frac * params.spiking_t_end;
    let spiking_a = estimate_rates(&log, &spec, params.readout, t0, params.spiking_t_end)?;
    let mut spiking_trace = Vec::with_capacity(10);
    for k in 1..=10 {
        let t = params.spiking_t_end * k as f64 / 10.0;
        let a = estimate_rates(&log, &spec, params.readout, 0.0, t)?;
        spiking_trace.push((t, problem.objective(&a)?));
    }
    let bounds = derive_bounds(problem, &cfg, &log);

    let iter_trace = |trace: &[(usize, f64)]| trace.iter().map(|&(k, e)| (k as f64, e)).collect();
    let summarize = |solution: Vec<f64>, objective_trace: Vec<(f64, f64)>| -> Result<MethodSummary> {
        let objective = problem.objective(&solution)?;
        let kkt = problem.kkt_residual(&solution)?;
        Ok(MethodSummary { objective, kkt, solution, objective_trace })
    };
    let cd_summary = summarize(cd.solution, iter_trace(&cd.objective_trace))?;
    let fista_summary = summarize(fi.solution, iter_trace(&fi.objective_trace))?;
    let analog_summary = summarize(analog_a, analog_trace)?;
    let spiking_summary = summarize(spiking_a, spiking_trace)?;

    let rel = |e: f64| (e - cd_summary.objective).abs() / cd_summary.objective.abs().max(1.0);
    Ok(ComparisonReport {
        rel_gap_fista: rel(fista_summary.objective),
        rel_gap_analog: rel(analog_summary.objective),
        rel_gap_spiking: rel(spiking_summary.objective),
        spike_total: log.spikes.iter().map(Vec::len).sum(),
        analog_settled,
        bounds,
        cd: cd_summary,
        fista: fista_summary,
        analog: analog_summary,
        spiking: spiking_summary,
    })
}

/// Side-by-side run of both networks on the reference instance, dumping
/// every observable: events, currents, potentials, the final readout
/// table, and cumulative spike counts against the analog prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Fig1Params {
    pub t_end: f64,
    pub out_dir: PathBuf,
}

impl Default for Fig1Params {
    fn default() -> Self {
        Self { t_end: 20.0, out_dir: PathBuf::from("out") }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fig1Summary {
    pub t_end: f64,
    pub spike_counts: Vec<usize>,
    pub aggregate_rel_error: f64,
    pub per_neuron: Vec<CountVsIntegral>,
    pub bounds: DerivedBounds,
}

pub fn run_fig1(params: &Fig1Params) -> Result<Fig1Summary> {
    let problem = reference_problem();
    let mut cfg = SpikingConfig::for_problem(&problem);
    cfg.t_end = params.t_end;
    let log = run_event_driven(&problem, &cfg)?;

    let analog_cfg = IntegratorConfig {
        method: IntegratorMethod::Rk4,
        step: 1e-3,
        t_end: params.t_end,
        settle_tol: 0.0, // run the whole horizon so the comparison covers it
        record_every: 10,
    };
    let traj = integrate(&problem, &[0.0; 3], &analog_cfg)?;
    let comparison = spike_count_vs_alca(&problem, &log, &traj, params.t_end)?;

    std::fs::create_dir_all(&params.out_dir)?;
    io::save_spike_events_csv(&params.out_dir.join("events.csv"), &log)?;
    io::save_trace_csv(&params.out_dir.join("currents.csv"), &log)?;
    io::save_potentials_csv(&params.out_dir.join("potentials.csv"), &log)?;
    io::save_trajectory_csv(&params.out_dir.join("analog_trajectory.csv"), &traj)?;
    let table = readout::readout_table(&log, &problem.threshold_spec(), None, None, None)?;
    io::save_readout_csv(&params.out_dir.join("readout.csv"), &table)?;

    // Cumulative count and integral per neuron on the analog sample grid.
    let n = problem.num_atoms();
    let mut rows = Vec::with_capacity(traj.samples.len());
    let mut acc = vec![0.0; n];
    let mut prev: Option<&crate::analog::AnalogSample> = None;
    for s in &traj.samples {
        if let Some(p) = prev {
            let h = s.t - p.t;
            for i in 0..n {
                acc[i] += 0.5 * (p.a[i] + s.a[i]) * h;
            }
        }
        let counts = log.spike_counts_in(0.0, s.t);
        let mut row = vec![s.t];
        row.extend(counts.iter().map(|&c| c as f64));
        row.extend(acc.iter().copied());
        rows.push(row);
        prev = Some(s);
    }
    let header: Vec<String> = std::iter::once("t".to_string())
        .chain((1..=n).map(|i| format!("count_{i}")))
        .chain((1..=n).map(|i| format!("integral_{i}")))
        .collect();
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    io::save_table_csv(&params.out_dir.join("counts_vs_integral.csv"), &header_refs, &rows)?;

    Ok(Fig1Summary {
        t_end: params.t_end,
        spike_counts: log.spikes.iter().map(Vec::len).collect(),
        aggregate_rel_error: comparison.aggregate_rel_error,
        per_neuron: comparison.per_neuron,
        bounds: derive_bounds(&problem, &cfg, &log),
    })
}

/// Objective error of each readout as the observation window grows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Fig2bParams {
    pub t_end: f64,
    pub num_samples: usize,
    pub out_dir: PathBuf,
}

impl Default for Fig2bParams {
    fn default() -> Self {
        Self { t_end: 20.0, num_samples: 12, out_dir: PathBuf::from("out") }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fig2bSummary {
    pub t_end: f64,
    pub optimum: f64,
    /// Final objective errors E(a(t_end)) - E*.
    pub err_window: f64,
    pub err_thresh_current: f64,
    pub err_exp_kernel: f64,
}

pub fn run_fig2b(params: &Fig2bParams) -> Result<Fig2bSummary> {
    if params.num_samples < 2 {
        return Err(SlcaError::InvalidConfig("need at least two sample times".into()));
    }
    let problem = reference_problem();
    let mut cfg = SpikingConfig::for_problem(&problem);
    cfg.t_end = params.t_end;
    let log = run_event_driven(&problem, &cfg)?;
    let optimum = coord_descent(&problem, 100_000, 1e-14)?.objective;
    let spec = problem.threshold_spec();
    let tau_kernel = readout::default_tau_kernel(&log);

    let t_lo = (params.t_end / 20.0).max(0.5);
    let ratio = (params.t_end / t_lo).powf(1.0 / (params.num_samples - 1) as f64);
    let mut rows = Vec::with_capacity(params.num_samples);
    for k in 0..params.num_samples {
        let t = if k + 1 == params.num_samples { params.t_end } else { t_lo * ratio.powi(k as i32) };
        let win = rate_window(&log, 0.0, t)?;
        let thr = rate_thresholded_current(&log, 0.0, t, &spec)?;
        let kern = rate_exp_kernel(&log, t, tau_kernel)?;
        rows.push(vec![
            t,
            problem.objective(&win)? - optimum,
            problem.objective(&thr)? - optimum,
            problem.objective(&kern)? - optimum,
        ]);
    }
    std::fs::create_dir_all(&params.out_dir)?;
    io::save_table_csv(
        &params.out_dir.join("readout_error.csv"),
        &["t", "err_window", "err_thresh_current", "err_exp_kernel"],
        &rows,
    )?;
    let last = rows.last().expect("at least two samples");
    Ok(Fig2bSummary {
        t_end: params.t_end,
        optimum,
        err_window: last[1],
        err_thresh_current: last[2],
        err_exp_kernel: last[3],
    })
}

/// Objective-versus-budget benchmark of the fixed-step network against
/// the accelerated proximal solver on one generated instance. Wall-clock
/// seconds go only into the returned timing cells, never into the
/// deterministic artifacts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchParams {
    pub m: usize,
    pub n: usize,
    pub density: f64,
    pub seed: u64,
    pub step: f64,
    pub t_end: f64,
    pub out_dir: PathBuf,
}

impl Default for BenchParams {
    fn default() -> Self {
        Self { m: 128, n: 400, density: 0.5, seed: 1, step: 0.01, t_end: 20.0, out_dir: PathBuf::from("out") }
    }
}

/// One (method, budget) measurement. `budget` is iterations for the
/// proximal solver and simulated time for the network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchCell {
    pub method: String,
    pub budget: f64,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimedBenchCell {
    pub method: String,
    pub budget: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSummary {
    pub m: usize,
    pub n: usize,
    pub density: f64,
    pub seed: u64,
    pub optimum: f64,
    pub cells: Vec<BenchCell>,
}

/// Timing companion to [`BenchSummary`]; saved separately so solution
/// artifacts stay deterministic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchTimings {
    pub cells: Vec<TimedBenchCell>,
}

pub fn run_bench(params: &BenchParams) -> Result<(BenchSummary, BenchTimings)> {
    let problem = gen_random_problem(params.m, params.n, params.density, params.seed)?;
    let optimum = coord_descent(&problem, 100_000, 1e-12)?.objective;
    let mut cells = Vec::new();
    let mut timed = Vec::new();

    // Each budget gets a fresh run so its wall-clock time is honest.
    for &iters in &[1usize, 2, 5, 10, 20, 50, 100, 200] {
        let start = std::time::Instant::now();
        let report = fista(&problem, iters, 0.0)?;
        let seconds = start.elapsed().as_secs_f64();
        cells.push(BenchCell { method: "fista".into(), budget: iters as f64, objective: report.objective });
        timed.push(TimedBenchCell { method: "fista".into(), budget: iters as f64, seconds });
    }

    let spec = problem.threshold_spec();
    for &t in &[0.5, 1.0, 2.0, 5.0, 10.0, 20.0] {
        if t > params.t_end {
            break;
        }
        let mut cfg = SpikingConfig::for_problem(&problem);
        cfg.engine = Engine::FixedStep;
        cfg.step = Some(params.step);
        cfg.t_end = t;
        // Full-resolution trace up to 2000 samples: the readout integrates
        // the current trace by trapezoid, so its quadrature must not get
        // coarser as the budget grows.
        cfg.trace_cadence = Some(params.step.max(t / 2000.0));
        let start = std::time::Instant::now();
        let log = run_fixed_step(&problem, &cfg)?;
        let a = rate_thresholded_current(&log, t / 10.0, t, &spec)?;
        let seconds = start.elapsed().as_secs_f64();
        let objective = problem.objective(&a)?;
        cells.push(BenchCell { method: "slca_fixed_step".into(), budget: t, objective });
        timed.push(TimedBenchCell { method: "slca_fixed_step".into(), budget: t, seconds });
    }

    std::fs::create_dir_all(&params.out_dir)?;
    let mut lines = String::from("method,budget,objective\n");
    for c in &cells {
        lines.push_str(&format!("{},{},{}\n", c.method, c.budget, c.objective));
    }
    std::fs::write(params.out_dir.join("bench.csv"), lines)?;

    let summary = BenchSummary {
        m: params.m,
        n: params.n,
        density: params.density,
        seed: params.seed,
        optimum,
        cells,
    };
    let timings = BenchTimings { cells: timed };
    Ok((summary, timings))
}
