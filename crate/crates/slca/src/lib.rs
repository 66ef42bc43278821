//! Sparse coding by locally competitive dynamics.
//!
//! This crate solves the nonnegative sparse-coding problem
//!
//! ```text
//! min_{a >= 0}  1/2 ||s - Phi a||^2 + lambda1 ||a||_1 + lambda2 ||a||^2
//! ```
//!
//! four ways and cross-checks them against each other:
//!
//! - [`analog`]: an ODE network whose thresholded state descends the
//!   objective and settles at the optimum.
//! - [`spiking`]: an integrate-and-fire network whose firing rates converge
//!   to the optimum, simulated exactly (event-driven) or on a fixed grid.
//! - [`solvers`]: proximal-gradient (FISTA) and coordinate-descent
//!   reference solvers.
//! - [`readout`]: spike-train decoders that turn a simulation into a
//!   coefficient estimate, with convergence diagnostics.
//!
//! [`model`] defines problems and dictionaries, [`patch`] adds a
//! matrix-free patch-convolution operator, [`io`] the on-disk formats, and
//! [`harness`] ready-made experiments behind the `slca` binary.

pub mod error;
pub mod harness;
pub mod io;
pub mod model;
pub mod patch;
pub mod readout;
pub mod analog;
pub mod solvers;
pub mod spiking;

pub use error::{Result, SlcaError};
pub use model::{AtomOps, Dictionary, Gram, Mode, SparseCodingProblem, ThresholdSpec};
