//! Paired-exchange chain over a discrete productivity grid: workers swap
//! clusters two at a time under exact output conservation and
//! capacity-limited acceptance, with flux bookkeeping and stationary-shape
//! diagnostics.

mod analysis;
mod chain;
mod flux;
mod output;
mod state;

pub use analysis::{
    boltzmann_beta_from_totals, g_linearity_check, g_linearity_from_means, linear_regression,
    GLinearity, LinearFit,
};
pub use chain::{
    acceptance_probability, propose_move, run, ProposedMove, RunResult, SimConfig, TimeAverages,
};
pub use flux::{
    flux_balance_report, FluxLedger, FluxLine, FluxReport, TransitionSignature, MIN_SIGNATURE_COUNT,
};
pub use output::{write_flux_csv, write_occupancy_csv};
pub use state::{init_state, InitSpec, ProductivityGrid, SystemState};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("infeasible state: {0}")]
    Infeasible(String),
    #[error("need at least 2 workers to propose a move, have {0}")]
    TooFewWorkers(u64),
    #[error("internal invariant violated: {0}")]
    Invariant(String),
    #[error("insufficient data: need {needed} usable levels, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
