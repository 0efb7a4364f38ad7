//! Equilibrium labor-productivity toolkit.
//!
//! Workers spread across clusters of firms sharing a productivity level
//! `c` (value added per worker). Clusters can hold at most `g(c) = A
//! c^(-gamma)` workers, and pairwise random job switches that conserve
//! total output drive the occupancy toward a capacity-limited equilibrium
//!
//! ```text
//!     n(c) = g(c) / (g(c) exp(beta (c - mu)) + 1)
//! ```
//!
//! with `beta` typically negative: exponential growth at low productivity,
//! a `c^(-gamma)` tail at high productivity, and a peak in between.
//!
//! The crate provides four layers plus a command-line binary (`prodeq`):
//!
//! - [`model`]: the closed-form laws (capacity, limiter, occupancy,
//!   partition function, peak position) and a fixed-point solver used to
//!   cross-check them.
//! - [`sim`]: the paired-exchange Markov chain over a discrete grid, with
//!   exact integer conservation, flux bookkeeping for detailed-balance
//!   diagnostics, and stationary-shape regressions.
//! - [`fit`]: multi-start simplex chi-square estimation of
//!   `(beta, mu, A, gamma)` from a binned curve, plus synthetic-curve
//!   generation for round-trip validation.
//! - [`pipeline`]: firm-record ingestion, cleaning, log-binned firm and
//!   worker densities, and the mean-workers curve the fitter consumes.
//!
//! [`verify`] bundles the cross-layer consistency suites the `prodeq
//! verify` subcommand runs, and [`manifest`] defines the reproducibility
//! manifest every run emits.

// Validation uses `!(x > 0.0)`-style comparisons on purpose: a NaN must
// fail the check, which the un-negated form would let through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod fit;
pub mod manifest;
pub mod model;
pub mod pipeline;
pub mod sim;
pub mod verify;

pub use fit::{BinnedCurve, CurveBin, FitOptions, FitResult};
pub use model::{CapacityLaw, Limiter, ModelParams};
pub use pipeline::{CleanRecord, FirmRecord, LogBinning};
pub use sim::{ProductivityGrid, SimConfig, SystemState};
