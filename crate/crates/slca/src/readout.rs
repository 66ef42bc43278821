//! Decoding sparse codes from spike trains.
//!
//! A spiking run never produces coefficients directly; it produces spike
//! times and currents. The estimators here turn a [`SpikeLog`] into
//! coefficient vectors, and the residual helpers quantify how far a finite
//! run still is from the stationary rates the network converges to.
//!
//! All estimators read a half-open window (t0, t]: spikes at exactly t0
//! belong to the warm-up and are excluded, spikes at t count.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SlcaError};
use crate::model::{SparseCodingProblem, ThresholdSpec};
use crate::spiking::SpikeLog;

/// Which estimator turns a spike log into coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReadoutKind {
    /// Spike counts over the window.
    Window,
    /// Thresholded average soma current (usually the most accurate).
    ThreshCurrent,
    /// Exponentially weighted spike rate.
    ExpKernel,
}

impl std::str::FromStr for ReadoutKind {
    type Err = SlcaError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "window" => Ok(Self::Window),
            "thresh_current" | "thresh-current" | "current" => Ok(Self::ThreshCurrent),
            "exp_kernel" | "exp-kernel" | "kernel" => Ok(Self::ExpKernel),
            other => Err(SlcaError::InvalidConfig(format!(
                "unknown readout {other:?}; expected window, thresh_current, or exp_kernel"
            ))),
        }
    }
}

/// Runs the selected estimator over (t0, t]. The exponential kernel has no
/// window start; it is evaluated at t with its default width.
pub fn estimate_rates(
    log: &SpikeLog,
    spec: &ThresholdSpec,
    kind: ReadoutKind,
    t0: f64,
    t: f64,
) -> Result<Vec<f64>> {
    match kind {
        ReadoutKind::Window => rate_window(log, t0, t),
        ReadoutKind::ThreshCurrent => rate_thresholded_current(log, t0, t, spec),
        ReadoutKind::ExpKernel => rate_exp_kernel(log, t, default_tau_kernel(log)),
    }
}

/// Default window start: skip the first tenth of the run as transient.
pub fn default_t0(t_end: f64) -> f64 {
    t_end / 10.0
}

/// Default exponential-kernel width: ten nominal inter-spike intervals of
/// the fastest neuron, 10 * nu_f / max_i(b_i - bias). Falls back to the
/// soma time constant when nothing can spike.
pub fn default_tau_kernel(log: &SpikeLog) -> f64 {
    let drive = log.b.iter().fold(f64::NEG_INFINITY, |acc, &x| acc.max(x)) - log.cfg.bias;
    if drive > 0.0 {
        10.0 * log.cfg.nu_f / drive
    } else {
        log.cfg.tau
    }
}

fn window_checks(log: &SpikeLog, t0: f64, t: f64) -> Result<()> {
    if !(t > t0) {
        return Err(SlcaError::EmptyWindow { t0, t });
    }
    if t0 < 0.0 {
        return Err(SlcaError::InvalidConfig(format!("window start must be nonnegative, got {t0}")));
    }
    if t > log.t_end() * (1.0 + 1e-12) {
        return Err(SlcaError::CoverageMismatch {
            context: "readout window extends past the simulated horizon".into(),
            requested: t,
            available: log.t_end(),
        });
    }
    Ok(())
}

/// Spike-count rates: spikes in (t0, t] divided by the window length.
pub fn rate_window(log: &SpikeLog, t0: f64, t: f64) -> Result<Vec<f64>> {
    window_checks(log, t0, t)?;
    Ok(log.spike_counts_in(t0, t).into_iter().map(|c| c as f64 / (t - t0)).collect())
}

/// Time-averaged soma currents over (t0, t]: exact for event-driven logs,
/// trapezoidal over the trace for fixed-step logs.
pub fn avg_current(log: &SpikeLog, t0: f64, t: f64) -> Result<Vec<f64>> {
    window_checks(log, t0, t)?;
    (0..log.num_neurons())
        .map(|i| log.integrate_current(i, t0, t).map(|x| x / (t - t0)))
        .collect()
}

/// Coefficients from thresholded average currents:
/// max(u_i - lambda1, 0) / nu_f.
///
/// The hinge at lambda1 pairs with the firing threshold nu_f = 2*lambda2+1,
/// so at stationarity this equals the window rate and, in the limit, the
/// optimal coefficient for both plain and elastic-net penalties.
pub fn rate_thresholded_current(log: &SpikeLog, t0: f64, t: f64, spec: &ThresholdSpec) -> Result<Vec<f64>> {
    let u = avg_current(log, t0, t)?;
    Ok(u.into_iter().map(|ui| (ui - spec.lambda1).max(0.0) / log.cfg.nu_f).collect())
}

/// Instantaneous rate estimate at time t from an exponential kernel:
/// sum over spikes t_k <= t of e^{-(t - t_k)/tau_kernel} / tau_kernel.
pub fn rate_exp_kernel(log: &SpikeLog, t: f64, tau_kernel: f64) -> Result<Vec<f64>> {
    if !(tau_kernel > 0.0) {
        return Err(SlcaError::InvalidConfig(format!("tau_kernel must be positive, got {tau_kernel}")));
    }
    if t < 0.0 || t > log.t_end() * (1.0 + 1e-12) {
        return Err(SlcaError::CoverageMismatch {
            context: "kernel readout time outside the simulated horizon".into(),
            requested: t,
            available: log.t_end(),
        });
    }
    Ok(log
        .spikes
        .iter()
        .map(|train| {
            train
                .iter()
                .take_while(|&&tk| tk <= t)
                .map(|&tk| (-(t - tk) / tau_kernel).exp() / tau_kernel)
                .sum()
        })
        .collect())
}

/// Gap between the thresholded-current and window-rate readouts:
/// Delta_i = max(u_i - lambda1, 0) - a_i * nu_f.
///
/// With the window starting at t0 = 0 (zero initial potentials, zero
/// reset) this equals v_i(t)/t exactly, so it shrinks like 1/t; it is the
/// natural convergence diagnostic for a finite run.
pub fn delta_gap(log: &SpikeLog, t0: f64, t: f64, spec: &ThresholdSpec, nu_f: f64) -> Result<Vec<f64>> {
    let u = avg_current(log, t0, t)?;
    let a = rate_window(log, t0, t)?;
    Ok(u.iter().zip(&a).map(|(&ui, &ai)| (ui - spec.lambda1).max(0.0) - ai * nu_f).collect())
}

/// One neuron's row of every readout over the same window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReadoutRow {
    pub neuron: usize,
    pub a_window: f64,
    pub a_thresh_current: f64,
    pub a_exp_kernel: f64,
    pub u_avg: f64,
    pub delta_gap: f64,
}

/// All readouts of a run, evaluated on one window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReadoutTable {
    pub t0: f64,
    pub t: f64,
    pub tau_kernel: f64,
    pub rows: Vec<ReadoutRow>,
}

/// Evaluates every estimator over (t0, t] (defaults: t0 = t_end/10,
/// t = t_end, kernel width from [`default_tau_kernel`]).
pub fn readout_table(
    log: &SpikeLog,
    spec: &ThresholdSpec,
    t0: Option<f64>,
    t: Option<f64>,
    tau_kernel: Option<f64>,
) -> Result<ReadoutTable> {
    let t = t.unwrap_or_else(|| log.t_end());
    let t0 = t0.unwrap_or_else(|| default_t0(log.t_end()));
    let tau_kernel = tau_kernel.unwrap_or_else(|| default_tau_kernel(log));
    let a_window = rate_window(log, t0, t)?;
    let u_avg = avg_current(log, t0, t)?;
    let a_thresh = rate_thresholded_current(log, t0, t, spec)?;
    let a_kernel = rate_exp_kernel(log, t, tau_kernel)?;
    let gap = delta_gap(log, t0, t, spec, log.cfg.nu_f)?;
    let rows = (0..log.num_neurons())
        .map(|i| ReadoutRow {
            neuron: i,
            a_window: a_window[i],
            a_thresh_current: a_thresh[i],
            a_exp_kernel: a_kernel[i],
            u_avg: u_avg[i],
            delta_gap: gap[i],
        })
        .collect();
    Ok(ReadoutTable { t0, t, tau_kernel, rows })
}

/// Residual of the bookkeeping identity tying readouts from the origin to
/// the membrane potential: for windows (0, t] with zero initial and reset
/// potentials, (u_i - bias) - a_i * nu_f - v_i(t)/t vanishes to machine
/// precision on event-driven logs. Returns the worst neuron's |residual|.
pub fn window_identity_residual(log: &SpikeLog, t: f64) -> Result<f64> {
    let zeros_ok = log.cfg.nu_r == 0.0 && log.cfg.v0.as_ref().map_or(true, |v| v.iter().all(|&x| x == 0.0));
    if !zeros_ok {
        return Err(SlcaError::InvalidConfig(
            "identity check requires zero reset and zero initial potentials".into(),
        ));
    }
    let u = avg_current(log, 0.0, t)?;
    let a = rate_window(log, 0.0, t)?;
    let v = log.potential_at(t)?;
    Ok((0..log.num_neurons())
        .map(|i| ((u[i] - log.cfg.bias) - a[i] * log.cfg.nu_f - v[i] / t).abs())
        .fold(0.0, f64::max))
}

/// Stationarity residual of a rate vector under the network's averaged
/// dynamics: a stationary rate a satisfies, per neuron with g_i = b_i -
/// sum_{j != i} w_ij a_j,
///
/// ```text
/// a_i > 0:  g_i - bias = a_i * nu_f
/// a_i = 0:  g_i - bias <= 0
/// ```
///
/// Returns per-neuron magnitudes of the violated parts.
pub fn rate_fixed_point_residual(problem: &SparseCodingProblem, nu_f: f64, bias: f64, rates: &[f64]) -> Result<Vec<f64>> {
    let n = problem.num_atoms();
    if rates.len() != n {
        return Err(SlcaError::DimensionMismatch {
            context: format!("rate vector has {} entries, problem has {n} atoms", rates.len()),
        });
    }
    let active: Vec<usize> = (0..n).filter(|&i| rates[i] != 0.0).collect();
    let mut coupling = vec![0.0; n];
    problem.gram().accumulate_offdiag_product(rates, &active, 1.0, &mut coupling);
    Ok((0..n)
        .map(|i| {
            let g = problem.biases()[i] - coupling[i] - bias;
            if rates[i] > 0.0 {
                (g - rates[i] * nu_f).abs()
            } else {
                g.max(0.0)
            }
        })
        .collect())
}

/// Central-difference residual of the averaged-current dynamics: the
/// window average u(t) over (t0, t] obeys
///
/// ```text
/// du/dt = (b - u)/tau - sum_{j != i} w_ij a_j(t) - (u - mu(t0))/(t - t0)
/// ```
///
/// between spikes. `delta` is the differencing half-width; pick t so no
/// spike lands in [t - delta, t + delta] or the step in a(t) pollutes the
/// derivative estimate.
pub fn averaged_dynamics_residual(
    problem: &SparseCodingProblem,
    log: &SpikeLog,
    t0: f64,
    t: f64,
    delta: f64,
) -> Result<Vec<f64>> {
    if !(delta > 0.0) || t - delta <= t0 || t + delta > log.t_end() * (1.0 + 1e-12) {
        return Err(SlcaError::InvalidConfig(format!(
            "differencing stencil [t-delta, t+delta] = [{}, {}] must fit inside ({t0}, t_end]",
            t - delta,
            t + delta
        )));
    }
    let n = log.num_neurons();
    let u_minus = avg_current(log, t0, t - delta)?;
    let u_plus = avg_current(log, t0, t + delta)?;
    let u = avg_current(log, t0, t)?;
    let a = rate_window(log, t0, t)?;
    let mu0 = log.current_at(t0)?;
    let active: Vec<usize> = (0..n).filter(|&i| a[i] != 0.0).collect();
    let mut coupling = vec![0.0; n];
    problem.gram().accumulate_offdiag_product(&a, &active, 1.0, &mut coupling);
    Ok((0..n)
        .map(|i| {
            let du = (u_plus[i] - u_minus[i]) / (2.0 * delta);
            let rhs = (problem.biases()[i] - u[i]) / log.cfg.tau - coupling[i] - (u[i] - mu0[i]) / (t - t0);
            (du - rhs).abs()
        })
        .collect())
}

/// Samples max_i |delta_gap_i| from the origin window at `num` log-spaced
/// times in [t_lo, t_hi], for decay-rate analysis.
pub fn gap_decay_samples(
    log: &SpikeLog,
    spec: &ThresholdSpec,
    t_lo: f64,
    t_hi: f64,
    num: usize,
) -> Result<Vec<(f64, f64)>> {
    if !(t_lo > 0.0 && t_hi > t_lo) || num < 2 {
        return Err(SlcaError::InvalidConfig("need 0 < t_lo < t_hi and at least two samples".into()));
    }
    let ratio = (t_hi / t_lo).powf(1.0 / (num - 1) as f64);
    (0..num)
        .map(|k| {
            let t = t_lo * ratio.powi(k as i32);
            let gap = delta_gap(log, 0.0, t, spec, log.cfg.nu_f)?;
            Ok((t, gap.iter().fold(0.0f64, |acc, &x| acc.max(x.abs()))))
        })
        .collect()
}

/// Least-squares slope of ln(y) against ln(x); zero-or-negative samples
/// are skipped (a gap of exactly zero has no log).
pub fn log_log_slope(samples: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    sxy / sxx
}
