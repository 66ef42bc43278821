//! Problem model for nonnegative sparse coding.
//!
//! The objective is
//!
//! ```text
//! E(a) = 1/2 ||s - Phi a||^2 + lambda1 ||a||_1 + lambda2 ||a||^2
//! ```
//!
//! minimized over a >= 0 (one-sided modes) or over all of R^N (two-sided).
//! This module holds:
//!
//! - [`Dictionary`]: a dense M x N atom matrix, column-major.
//! - [`AtomOps`]: the operator interface (`apply`, `transpose_apply`) that
//!   lets solvers run matrix-free.
//! - [`Gram`]: atom inner products w_ij, dense for small N, cached per
//!   column above a size limit.
//! - [`SparseCodingProblem`]: signal, regularization, mode, cached biases
//!   b = Phi^T s, and the Gram matrix.
//! - [`ThresholdSpec`] / [`threshold_apply`]: the soft threshold T that maps
//!   potentials to activities.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::error::{Result, SlcaError};

/// Activities at or below this magnitude count as inactive (zero).
pub const DEFAULT_TOL_ACTIVE: f64 = 1e-9;

/// Gram matrices with at most this many atoms are materialized densely;
/// larger ones are computed per column on demand and cached.
pub const DEFAULT_DENSE_GRAM_LIMIT: usize = 4096;

/// Columns with norm at or below this are rejected as zero atoms.
pub const ZERO_ATOM_TOL: f64 = 1e-12;

/// Which penalty/constraint combination the problem uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Two-sided l1 penalty, unconstrained sign.
    Lasso,
    /// One-sided l1 penalty with a >= 0; lambda2 must be zero.
    Classo,
    /// a >= 0 with both l1 and squared-l2 penalties.
    ElasticNet,
}

impl Mode {
    /// Serde default for descriptors that omit the mode field.
    pub(crate) fn default_classo() -> Self {
        Mode::Classo
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Lasso => write!(f, "lasso"),
            Mode::Classo => write!(f, "classo"),
            Mode::ElasticNet => write!(f, "elastic_net"),
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = SlcaError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lasso" => Ok(Mode::Lasso),
            "classo" => Ok(Mode::Classo),
            "elastic_net" | "elastic-net" => Ok(Mode::ElasticNet),
            other => Err(SlcaError::Parse(format!("unknown mode {other:?}"))),
        }
    }
}

/// Parameters of the activation threshold T.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSpec {
    /// Threshold location (the l1 weight).
    pub lambda1: f64,
    /// Squared-l2 weight; flattens the slope to 1/(1 + 2 lambda2).
    pub lambda2: f64,
    /// Two-sided thresholds act on |u| and keep the sign; one-sided
    /// thresholds clamp negative potentials to zero.
    pub two_sided: bool,
}

impl ThresholdSpec {
    /// Firing threshold that makes spiking fixed points match the
    /// elastic-net optimality condition: nu_f = 2 lambda2 + 1.
    pub fn firing_threshold(&self) -> f64 {
        2.0 * self.lambda2 + 1.0
    }
}

/// Soft threshold: max(u - lambda1, 0) / (1 + 2 lambda2), mirrored for
/// negative u when the spec is two-sided.
pub fn threshold_apply(u: f64, spec: &ThresholdSpec) -> f64 {
    let slope = 1.0 / (1.0 + 2.0 * spec.lambda2);
    if spec.two_sided {
        u.signum() * ((u.abs() - spec.lambda1).max(0.0) * slope)
    } else {
        (u - spec.lambda1).max(0.0) * slope
    }
}

/// Applies [`threshold_apply`] elementwise; `out` must have `u`'s length.
pub fn threshold_map(u: &[f64], spec: &ThresholdSpec, out: &mut [f64]) {
    debug_assert_eq!(u.len(), out.len());
    for (o, &ui) in out.iter_mut().zip(u) {
        *o = threshold_apply(ui, spec);
    }
}

/// Linear-operator view of a dictionary: everything solvers and network
/// simulators need, without assuming a dense matrix.
pub trait AtomOps: Send + Sync {
    /// Length M of signals.
    fn signal_dim(&self) -> usize;

    /// Number of atoms N.
    fn num_atoms(&self) -> usize;

    /// out = Phi a. `a` has length N, `out` length M.
    fn apply(&self, a: &[f64], out: &mut [f64]);

    /// out = Phi^T r. `r` has length M, `out` length N.
    fn transpose_apply(&self, r: &[f64], out: &mut [f64]);

    /// out = Phi^T phi_j (column j of the Gram matrix). `out` has length N.
    fn gram_column(&self, j: usize, out: &mut [f64]);

    /// Squared Euclidean norm of atom j (the Gram diagonal entry).
    fn atom_norm_sq(&self, j: usize) -> f64;

    /// True when every atom entry is >= 0 (required by spiking networks,
    /// whose inhibition weights must not be excitatory).
    fn is_nonnegative(&self) -> bool;
}

/// Dense M x N dictionary, stored column-major so atoms are contiguous.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dictionary {
    m: usize,
    n: usize,
    /// Column-major entries; atom j is data[j*m .. (j+1)*m].
    data: Vec<f64>,
    /// Euclidean norms the columns had before the last normalization
    /// (or their current norms if never normalized).
    column_norms: Vec<f64>,
    nonnegative: bool,
}

impl Dictionary {
    /// Builds from column-major storage.
    pub fn from_col_major(m: usize, n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != m * n {
            return Err(SlcaError::DimensionMismatch {
                context: format!("dictionary storage: expected {}x{}={} entries, got {}", m, n, m * n, data.len()),
            });
        }
        if m == 0 || n == 0 {
            return Err(SlcaError::InvalidConfig("dictionary must have at least one row and one column".into()));
        }
        let nonnegative = data.iter().all(|&x| x >= 0.0);
        let mut column_norms = vec![0.0; n];
        for (j, norm) in column_norms.iter_mut().enumerate() {
            *norm = data[j * m..(j + 1) * m].iter().map(|x| x * x).sum::<f64>().sqrt();
        }
        Ok(Self { m, n, data, column_norms, nonnegative })
    }

    /// Builds from row-major rows (the CSV on-disk layout).
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let m = rows.len();
        let n = rows.first().map_or(0, Vec::len);
        if m == 0 || n == 0 {
            return Err(SlcaError::InvalidConfig("dictionary must have at least one row and one column".into()));
        }
        let mut data = vec![0.0; m * n];
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(SlcaError::DimensionMismatch {
                    context: format!("dictionary row {i} has {} entries, expected {n}", row.len()),
                });
            }
            for (j, &x) in row.iter().enumerate() {
                data[j * m + i] = x;
            }
        }
        Self::from_col_major(m, n, data)
    }

    /// Atom j as a contiguous slice.
    pub fn column(&self, j: usize) -> &[f64] {
        &self.data[j * self.m..(j + 1) * self.m]
    }

    /// Row count M.
    pub fn rows(&self) -> usize {
        self.m
    }

    /// Column count N.
    pub fn cols(&self) -> usize {
        self.n
    }

    /// Norms recorded at construction or by [`Dictionary::normalize`].
    pub fn column_norms(&self) -> &[f64] {
        &self.column_norms
    }

    /// Entry (i, j) in row/column indexing.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.m + i]
    }

    /// Returns a copy whose columns have unit norm; the returned
    /// dictionary's `column_norms` records the norms scaled away.
    pub fn normalize(&self) -> Result<Dictionary> {
        let mut data = self.data.clone();
        let mut norms = vec![0.0; self.n];
        for j in 0..self.n {
            let col = &mut data[j * self.m..(j + 1) * self.m];
            let norm = col.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm <= ZERO_ATOM_TOL {
                return Err(SlcaError::ZeroAtom { index: j, norm });
            }
            for x in col.iter_mut() {
                *x /= norm;
            }
            norms[j] = norm;
        }
        let nonnegative = self.nonnegative;
        Ok(Dictionary { m: self.m, n: self.n, data, column_norms: norms, nonnegative })
    }
}

impl AtomOps for Dictionary {
    fn signal_dim(&self) -> usize {
        self.m
    }

    fn num_atoms(&self) -> usize {
        self.n
    }

    fn apply(&self, a: &[f64], out: &mut [f64]) {
        debug_assert_eq!(a.len(), self.n);
        debug_assert_eq!(out.len(), self.m);
        out.fill(0.0);
        for (j, &aj) in a.iter().enumerate() {
            if aj == 0.0 {
                continue;
            }
            for (o, &x) in out.iter_mut().zip(self.column(j)) {
                *o += aj * x;
            }
        }
    }

    fn transpose_apply(&self, r: &[f64], out: &mut [f64]) {
        debug_assert_eq!(r.len(), self.m);
        debug_assert_eq!(out.len(), self.n);
        for (j, o) in out.iter_mut().enumerate() {
            *o = self.column(j).iter().zip(r).map(|(&x, &ri)| x * ri).sum();
        }
    }

    fn gram_column(&self, j: usize, out: &mut [f64]) {
        let col_j = self.column(j);
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.column(i).iter().zip(col_j).map(|(&x, &y)| x * y).sum();
        }
    }

    fn atom_norm_sq(&self, j: usize) -> f64 {
        self.column(j).iter().map(|x| x * x).sum()
    }

    fn is_nonnegative(&self) -> bool {
        self.nonnegative
    }
}

/// Atom inner products w_ij = phi_i . phi_j.
///
/// Dense storage materializes all N^2 entries once and mirrors the upper
/// triangle so w_ij and w_ji are the same float. Lazy storage computes
/// whole columns on first use and caches them; columns come out of one
/// fixed summation order, so symmetry again holds bitwise.
pub struct Gram {
    n: usize,
    diag: Vec<f64>,
    storage: GramStorage,
}

enum GramStorage {
    Dense { data: Vec<f64> },
    Lazy { ops: Arc<dyn AtomOps>, cache: Mutex<HashMap<usize, Arc<[f64]>>> },
}

impl fmt::Debug for Gram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.storage {
            GramStorage::Dense { .. } => "dense",
            GramStorage::Lazy { .. } => "lazy",
        };
        f.debug_struct("Gram").field("n", &self.n).field("storage", &kind).finish()
    }
}

impl Gram {
    /// Materializes all columns now.
    pub fn dense(ops: &dyn AtomOps) -> Self {
        let n = ops.num_atoms();
        let mut data = vec![0.0; n * n];
        let mut col = vec![0.0; n];
        for j in 0..n {
            ops.gram_column(j, &mut col);
            data[j * n..(j + 1) * n].copy_from_slice(&col);
        }
        // Mirror the upper triangle over the lower so both orderings of
        // (i, j) read the identical float.
        for j in 0..n {
            for i in 0..j {
                data[j + i * n] = data[i + j * n];
            }
        }
        let diag = (0..n).map(|j| data[j + j * n]).collect();
        Self { n, diag, storage: GramStorage::Dense { data } }
    }

    /// Computes columns on demand; only the diagonal is computed eagerly.
    pub fn lazy(ops: Arc<dyn AtomOps>) -> Self {
        let n = ops.num_atoms();
        let diag = (0..n).map(|j| ops.atom_norm_sq(j)).collect();
        Self { n, diag, storage: GramStorage::Lazy { ops, cache: Mutex::new(HashMap::new()) } }
    }

    /// Number of atoms.
    pub fn n(&self) -> usize {
        self.n
    }

    /// True when all N^2 entries are held in memory.
    pub fn is_dense(&self) -> bool {
        matches!(self.storage, GramStorage::Dense { .. })
    }

    /// Diagonal entry w_jj.
    pub fn diag(&self, j: usize) -> f64 {
        self.diag[j]
    }

    /// Runs `f` on column j (length N, diagonal included).
    pub fn with_column<R>(&self, j: usize, f: impl FnOnce(&[f64]) -> R) -> R {
        match &self.storage {
            GramStorage::Dense { data } => f(&data[j * self.n..(j + 1) * self.n]),
            GramStorage::Lazy { ops, cache } => {
                let col = {
                    let mut cache = cache.lock().expect("gram cache poisoned");
                    if let Some(col) = cache.get(&j) {
                        Arc::clone(col)
                    } else {
                        let mut out = vec![0.0; self.n];
                        ops.gram_column(j, &mut out);
                        let col: Arc<[f64]> = out.into();
                        cache.insert(j, Arc::clone(&col));
                        col
                    }
                };
                f(&col)
            }
        }
    }

    /// Entry w_ij. Prefer [`Gram::with_column`] in loops.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.with_column(j, |col| col[i])
    }

    /// For each row i, the sum of its off-diagonal entries.
    pub fn row_offdiag_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.n];
        for j in 0..self.n {
            self.with_column(j, |col| {
                for (i, &w) in col.iter().enumerate() {
                    if i != j {
                        sums[i] += w;
                    }
                }
            });
        }
        sums
    }

    /// out += scale * W0 a, where W0 is this matrix with a zeroed diagonal
    /// and only the listed coefficients of `a` are treated as nonzero.
    pub fn accumulate_offdiag_product(&self, a: &[f64], active: &[usize], scale: f64, out: &mut [f64]) {
        for &j in active {
            let aj = a[j] * scale;
            if aj == 0.0 {
                continue;
            }
            self.with_column(j, |col| {
                for (o, &w) in out.iter_mut().zip(col) {
                    *o += aj * w;
                }
            });
            // The column included the diagonal; remove its contribution.
            out[j] -= aj * self.diag[j];
        }
    }
}

/// A sparse-coding instance: operator, signal, penalties, mode, plus the
/// cached biases b = Phi^T s and the Gram matrix.
pub struct SparseCodingProblem {
    ops: Arc<dyn AtomOps>,
    signal: Vec<f64>,
    lambda1: f64,
    lambda2: f64,
    mode: Mode,
    b: Vec<f64>,
    gram: Gram,
}

impl fmt::Debug for SparseCodingProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SparseCodingProblem")
            .field("m", &self.ops.signal_dim())
            .field("n", &self.ops.num_atoms())
            .field("lambda1", &self.lambda1)
            .field("lambda2", &self.lambda2)
            .field("mode", &self.mode)
            .finish()
    }
}

impl SparseCodingProblem {
    /// Builds a problem with the default dense-Gram size limit.
    pub fn new(ops: Arc<dyn AtomOps>, signal: Vec<f64>, lambda1: f64, lambda2: f64, mode: Mode) -> Result<Self> {
        Self::with_gram_limit(ops, signal, lambda1, lambda2, mode, DEFAULT_DENSE_GRAM_LIMIT)
    }

    /// Builds a problem, materializing the Gram densely only when
    /// N <= `dense_gram_limit`.
    pub fn with_gram_limit(
        ops: Arc<dyn AtomOps>,
        signal: Vec<f64>,
        lambda1: f64,
        lambda2: f64,
        mode: Mode,
        dense_gram_limit: usize,
    ) -> Result<Self> {
        if signal.len() != ops.signal_dim() {
            return Err(SlcaError::DimensionMismatch {
                context: format!("signal has {} entries, operator expects {}", signal.len(), ops.signal_dim()),
            });
        }
        if !(lambda1 >= 0.0) || !(lambda2 >= 0.0) {
            return Err(SlcaError::InvalidConfig(format!(
                "penalties must be nonnegative finite, got lambda1={lambda1}, lambda2={lambda2}"
            )));
        }
        if mode == Mode::Classo && lambda2 != 0.0 {
            return Err(SlcaError::InvalidConfig(format!(
                "classo has no squared penalty; use elastic_net for lambda2={lambda2}"
            )));
        }
        let n = ops.num_atoms();
        let mut b = vec![0.0; n];
        ops.transpose_apply(&signal, &mut b);
        let gram = if n <= dense_gram_limit { Gram::dense(ops.as_ref()) } else { Gram::lazy(Arc::clone(&ops)) };
        Ok(Self { ops, signal, lambda1, lambda2, mode, b, gram })
    }

    /// Convenience constructor for a dense dictionary.
    pub fn from_dictionary(dict: Dictionary, signal: Vec<f64>, lambda1: f64, lambda2: f64, mode: Mode) -> Result<Self> {
        Self::new(Arc::new(dict), signal, lambda1, lambda2, mode)
    }

    /// Signal length M.
    pub fn signal_dim(&self) -> usize {
        self.ops.signal_dim()
    }

    /// Atom count N.
    pub fn num_atoms(&self) -> usize {
        self.ops.num_atoms()
    }

    /// Input biases b = Phi^T s, computed once at construction.
    pub fn biases(&self) -> &[f64] {
        &self.b
    }

    /// The operator.
    pub fn ops(&self) -> &Arc<dyn AtomOps> {
        &self.ops
    }

    /// The signal s.
    pub fn signal(&self) -> &[f64] {
        &self.signal
    }

    /// Atom inner products.
    pub fn gram(&self) -> &Gram {
        &self.gram
    }

    /// l1 weight.
    pub fn lambda1(&self) -> f64 {
        self.lambda1
    }

    /// Squared-l2 weight.
    pub fn lambda2(&self) -> f64 {
        self.lambda2
    }

    /// Penalty/constraint mode.
    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Threshold parameters implied by the penalties and mode.
    pub fn threshold_spec(&self) -> ThresholdSpec {
        ThresholdSpec {
            lambda1: self.lambda1,
            lambda2: self.lambda2,
            two_sided: self.mode == Mode::Lasso,
        }
    }

    fn check_coefficients(&self, a: &[f64], context: &str) -> Result<()> {
        if a.len() != self.num_atoms() {
            return Err(SlcaError::DimensionMismatch {
                context: format!("{context}: coefficient vector has {} entries, expected {}", a.len(), self.num_atoms()),
            });
        }
        if self.mode != Mode::Lasso {
            let violations: Vec<usize> =
                a.iter().enumerate().filter(|(_, &x)| x < 0.0).map(|(i, _)| i).collect();
            if !violations.is_empty() {
                return Err(SlcaError::DomainViolation { indices: violations });
            }
        }
        Ok(())
    }

    /// E(a) = 1/2 ||s - Phi a||^2 + lambda1 ||a||_1 + lambda2 ||a||^2.
    /// One-sided modes reject negative coefficients.
    pub fn objective(&self, a: &[f64]) -> Result<f64> {
        self.check_coefficients(a, "objective")?;
        let mut residual = vec![0.0; self.signal_dim()];
        self.ops.apply(a, &mut residual);
        for (r, &s) in residual.iter_mut().zip(&self.signal) {
            *r = s - *r;
        }
        let fit = 0.5 * residual.iter().map(|r| r * r).sum::<f64>();
        let l1: f64 = a.iter().map(|x| x.abs()).sum();
        let l2: f64 = a.iter().map(|x| x * x).sum();
        Ok(fit + self.lambda1 * l1 + self.lambda2 * l2)
    }

    /// Max-norm violation of the first-order optimality conditions.
    ///
    /// With c = Phi^T (s - Phi a), one-sided modes score active atoms
    /// (a_i > tol_active) by |c_i - lambda1 - 2 lambda2 a_i| and inactive
    /// ones by max(0, c_i - lambda1); the two-sided mode uses the signed
    /// analogue. Zero means a satisfies the optimality conditions exactly.
    pub fn kkt_residual(&self, a: &[f64]) -> Result<f64> {
        self.check_coefficients(a, "kkt_residual")?;
        let mut fit = vec![0.0; self.signal_dim()];
        self.ops.apply(a, &mut fit);
        for (r, &s) in fit.iter_mut().zip(&self.signal) {
            *r = s - *r;
        }
        let mut c = vec![0.0; self.num_atoms()];
        self.ops.transpose_apply(&fit, &mut c);
        let mut worst = 0.0f64;
        for (i, (&ci, &ai)) in c.iter().zip(a).enumerate() {
            let _ = i;
            let r = if self.mode == Mode::Lasso {
                if ai.abs() > DEFAULT_TOL_ACTIVE {
                    (ci - ai.signum() * self.lambda1 - 2.0 * self.lambda2 * ai).abs()
                } else {
                    (ci.abs() - self.lambda1).max(0.0)
                }
            } else if ai > DEFAULT_TOL_ACTIVE {
                (ci - self.lambda1 - 2.0 * self.lambda2 * ai).abs()
            } else {
                (ci - self.lambda1).max(0.0)
            };
            worst = worst.max(r);
        }
        Ok(worst)
    }
}
