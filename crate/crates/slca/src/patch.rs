//! Matrix-free patch dictionary operator.
//!
//! A small local dictionary of K atoms, each a C-channel p x p patch, is
//! placed at every stride-aligned position of an H x W image grid. The
//! resulting global dictionary has one column per (position, local atom)
//! pair but is never materialized: products against it are computed by
//! sliding the local atoms over the image. Combined with the lazy Gram
//! backend this scales to dictionaries whose dense form would not fit in
//! memory.
//!
//! Layouts are channel-major: a signal stores channel c of pixel (r, q)
//! at c*H*W + r*W + q, and a local atom stores its (dr, dq) offset of
//! channel c at (c*p + dr)*p + dq. Global atom j places local atom
//! j % K at position j / K (positions enumerated row-major).

use crate::error::{Result, SlcaError};
use crate::model::{AtomOps, Dictionary};

/// A local dictionary slid over an image grid.
#[derive(Debug, Clone)]
pub struct PatchOperator {
    height: usize,
    width: usize,
    channels: usize,
    patch: usize,
    stride: usize,
    local: Dictionary,
    /// Top-left (row, col) corners, row-major.
    positions: Vec<(usize, usize)>,
    local_norms_sq: Vec<f64>,
}

impl PatchOperator {
    /// Builds the operator; the local dictionary must have exactly
    /// channels * patch^2 rows, and patches must fit inside the grid.
    pub fn new(height: usize, width: usize, channels: usize, patch: usize, stride: usize, local: Dictionary) -> Result<Self> {
        if patch == 0 || stride == 0 || channels == 0 {
            return Err(SlcaError::InvalidConfig("patch, stride, and channels must be positive".into()));
        }
        if patch > height || patch > width {
            return Err(SlcaError::InvalidConfig(format!(
                "a {patch}x{patch} patch does not fit a {height}x{width} grid"
            )));
        }
        let expected_rows = channels * patch * patch;
        if local.signal_dim() != expected_rows {
            return Err(SlcaError::DimensionMismatch {
                context: format!(
                    "local dictionary has {} rows, a {channels}-channel {patch}x{patch} patch needs {expected_rows}",
                    local.signal_dim()
                ),
            });
        }
        let mut positions = Vec::new();
        let mut r = 0;
        while r + patch <= height {
            let mut q = 0;
            while q + patch <= width {
                positions.push((r, q));
                q += stride;
            }
            r += stride;
        }
        let local_norms_sq = (0..local.num_atoms()).map(|k| local.atom_norm_sq(k)).collect();
        Ok(Self { height, width, channels, patch, stride, local, positions, local_norms_sq })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn patch(&self) -> usize {
        self.patch
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn num_positions(&self) -> usize {
        self.positions.len()
    }

    pub fn local_atoms(&self) -> usize {
        self.local.num_atoms()
    }

    /// Splits a global atom index into (position index, local atom index).
    pub fn split_index(&self, j: usize) -> (usize, usize) {
        (j / self.local.num_atoms(), j % self.local.num_atoms())
    }

    /// Offset of channel-major pixel (c, r, q) in a signal vector.
    fn pixel(&self, c: usize, r: usize, q: usize) -> usize {
        (c * self.height + r) * self.width + q
    }
}

impl AtomOps for PatchOperator {
    fn signal_dim(&self) -> usize {
        self.channels * self.height * self.width
    }

    fn num_atoms(&self) -> usize {
        self.positions.len() * self.local.num_atoms()
    }

    fn apply(&self, coeffs: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        let k_atoms = self.local.num_atoms();
        for (j, &aj) in coeffs.iter().enumerate() {
            if aj == 0.0 {
                continue;
            }
            let (pos, k) = (j / k_atoms, j % k_atoms);
            let (r0, q0) = self.positions[pos];
            let atom = self.local.column(k);
            for c in 0..self.channels {
                for dr in 0..self.patch {
                    let row_base = self.pixel(c, r0 + dr, q0);
                    let atom_base = (c * self.patch + dr) * self.patch;
                    for dq in 0..self.patch {
                        out[row_base + dq] += aj * atom[atom_base + dq];
                    }
                }
            }
        }
    }

    fn transpose_apply(&self, signal: &[f64], out: &mut [f64]) {
        let k_atoms = self.local.num_atoms();
        for (pos, &(r0, q0)) in self.positions.iter().enumerate() {
            for k in 0..k_atoms {
                let atom = self.local.column(k);
                let mut dot = 0.0;
                for c in 0..self.channels {
                    for dr in 0..self.patch {
                        let row_base = self.pixel(c, r0 + dr, q0);
                        let atom_base = (c * self.patch + dr) * self.patch;
                        for dq in 0..self.patch {
                            dot += atom[atom_base + dq] * signal[row_base + dq];
                        }
                    }
                }
                out[pos * k_atoms + k] = dot;
            }
        }
    }

    fn gram_column(&self, j: usize, out: &mut [f64]) {
        // Densify only this column: Phi^T (Phi e_j). Could exploit that
        // only overlapping positions interact, but one apply per cached
        // column is already cheap at the scales this operator targets.
        let mut unit = vec![0.0; self.num_atoms()];
        unit[j] = 1.0;
        let mut image = vec![0.0; self.signal_dim()];
        self.apply(&unit, &mut image);
        self.transpose_apply(&image, out);
    }

    fn atom_norm_sq(&self, j: usize) -> f64 {
        // Patches always fit inside the grid, so placement preserves norms.
        self.local_norms_sq[j % self.local.num_atoms()]
    }

    fn is_nonnegative(&self) -> bool {
        self.local.is_nonnegative()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Mode, SparseCodingProblem};
    use crate::solvers::coord_descent;
    use approx::assert_abs_diff_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn random_local(rows: usize, atoms: usize, seed: u64) -> Dictionary {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<f64> = (0..rows * atoms).map(|_| rng.random::<f64>()).collect();
        Dictionary::from_col_major(rows, atoms, data).unwrap().normalize().unwrap()
    }

    /// Materializes the operator into an ordinary dense dictionary.
    fn densify(op: &PatchOperator) -> Dictionary {
        let mut data = Vec::with_capacity(op.signal_dim() * op.num_atoms());
        let mut unit = vec![0.0; op.num_atoms()];
        let mut col = vec![0.0; op.signal_dim()];
        for j in 0..op.num_atoms() {
            unit[j] = 1.0;
            op.apply(&unit, &mut col);
            unit[j] = 0.0;
            data.extend_from_slice(&col);
        }
        Dictionary::from_col_major(op.signal_dim(), op.num_atoms(), data).unwrap()
    }

    #[test]
    fn grid_enumeration_counts_positions() {
        let local = random_local(2 * 4 * 4, 3, 1);
        let op = PatchOperator::new(12, 12, 2, 4, 4, local).unwrap();
        assert_eq!(op.num_positions(), 9);
        assert_eq!(op.num_atoms(), 27);
        assert_eq!(op.signal_dim(), 2 * 12 * 12);
    }

    #[test]
    fn overlapping_placements_accumulate() {
        // One flat local atom, two positions overlapping by half.
        let local = Dictionary::from_col_major(16, 1, vec![0.25; 16]).unwrap();
        let op = PatchOperator::new(4, 6, 1, 4, 2, local).unwrap();
        assert_eq!(op.num_positions(), 2);
        let mut image = vec![0.0; 24];
        op.apply(&[1.0, 1.0], &mut image);
        for r in 0..4 {
            for q in 0..6 {
                let expected = if (2..4).contains(&q) { 0.5 } else { 0.25 };
                assert_abs_diff_eq!(image[r * 6 + q], expected, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn matches_dense_materialization() {
        let local = random_local(2 * 3 * 3, 4, 42);
        let op = PatchOperator::new(9, 9, 2, 3, 2, local).unwrap();
        let dense = densify(&op);
        assert_eq!(dense.num_atoms(), op.num_atoms());

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let coeffs: Vec<f64> = (0..op.num_atoms()).map(|_| rng.random::<f64>()).collect();
        let signal: Vec<f64> = (0..op.signal_dim()).map(|_| rng.random::<f64>()).collect();

        let mut img_op = vec![0.0; op.signal_dim()];
        let mut img_dense = vec![0.0; op.signal_dim()];
        op.apply(&coeffs, &mut img_op);
        dense.apply(&coeffs, &mut img_dense);
        for (a, b) in img_op.iter().zip(&img_dense) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }

        let mut bt_op = vec![0.0; op.num_atoms()];
        let mut bt_dense = vec![0.0; op.num_atoms()];
        op.transpose_apply(&signal, &mut bt_op);
        dense.transpose_apply(&signal, &mut bt_dense);
        for (a, b) in bt_op.iter().zip(&bt_dense) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }

        let mut g_op = vec![0.0; op.num_atoms()];
        let mut g_dense = vec![0.0; op.num_atoms()];
        for j in [0, 5, op.num_atoms() - 1] {
            op.gram_column(j, &mut g_op);
            dense.gram_column(j, &mut g_dense);
            for (a, b) in g_op.iter().zip(&g_dense) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-12);
            }
            assert_abs_diff_eq!(op.atom_norm_sq(j), dense.atom_norm_sq(j), epsilon = 1e-12);
        }
    }

    #[test]
    fn lazy_patch_solve_matches_dense_solve() {
        let local = random_local(2 * 3 * 3, 2, 9);
        let op = PatchOperator::new(7, 7, 2, 3, 2, local).unwrap();
        let dense = densify(&op);

        // A signal synthesized from a handful of active atoms.
        let mut coeffs = vec![0.0; op.num_atoms()];
        coeffs[1] = 0.8;
        coeffs[6] = 1.3;
        coeffs[11] = 0.4;
        let mut signal = vec![0.0; op.signal_dim()];
        op.apply(&coeffs, &mut signal);

        // Force the lazy Gram path for the operator-backed problem.
        let p_lazy = SparseCodingProblem::with_gram_limit(
            Arc::new(op),
            signal.clone(),
            0.05,
            0.0,
            Mode::Classo,
            0,
        )
        .unwrap();
        let p_dense = SparseCodingProblem::from_dictionary(dense, signal, 0.05, 0.0, Mode::Classo).unwrap();

        let lazy = coord_descent(&p_lazy, 100_000, 1e-12).unwrap();
        let direct = coord_descent(&p_dense, 100_000, 1e-12).unwrap();
        assert!(lazy.converged && direct.converged);
        for (a, b) in lazy.solution.iter().zip(&direct.solution) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-10);
        }
        assert_abs_diff_eq!(lazy.objective, direct.objective, epsilon = 1e-12);
    }

    #[test]
    fn rejects_malformed_geometry() {
        let local = random_local(16, 2, 3);
        assert!(PatchOperator::new(3, 8, 1, 4, 2, local.clone()).is_err()); // patch taller than grid
        assert!(PatchOperator::new(8, 8, 1, 4, 0, local.clone()).is_err()); // zero stride
        assert!(PatchOperator::new(8, 8, 2, 4, 2, local).is_err()); // row-count mismatch
    }

    #[test]
    fn nonnegativity_follows_the_local_dictionary() {
        let nonneg = random_local(16, 2, 5);
        assert!(PatchOperator::new(8, 8, 1, 4, 4, nonneg).unwrap().is_nonnegative());
        let mut data = vec![0.5; 32];
        data[3] = -0.5;
        let signed = Dictionary::from_col_major(16, 2, data).unwrap();
        assert!(!PatchOperator::new(8, 8, 1, 4, 4, signed).unwrap().is_nonnegative());
    }
}
