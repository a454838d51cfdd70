//! Monte Carlo harness for spiked matrices observed through an elementwise
//! transformation: signal generation, noisy observation, extreme singular
//! triples and the metrics the limiting theory predicts.

pub mod experiment;
pub mod linalg;
pub mod metrics;
pub mod model;

use thiserror::Error;

pub use experiment::{
    monte_carlo, replicate_rng, run_once, summarize, MetricSummary, Model, MonteCarlo, RunOptions, ShrinkageLoss,
    SimulationResult,
};
pub use linalg::{eig_sym, op_norm, svd_top, EigenPair, SingularTriple};
pub use metrics::{cosines, esd_ks, hadamard_alignment, Reference};
pub use model::{draw_noise, gen_signal, observe, binomial_observe, Signal, SpikeConfig, VectorScheme};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("requested {requested} components but only {available} exist")]
    TooManyComponents { requested: usize, available: usize },
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("Lanczos did not converge for {requested} components after {steps} steps")]
    NoConvergence { requested: usize, steps: usize },
    #[error("bulk is empty after removing {removed} outliers from {total} eigenvalues")]
    EmptyBulk { removed: usize, total: usize },
    #[error("Hadamard alignment needs a rank-one signal, got rank {0}")]
    NotRankOne(usize),
    #[error("replicate {rep} (seed {seed}) failed: {message}")]
    Replicate { rep: u64, seed: u64, message: String },
    #[error("worker pool: {0}")]
    Pool(String),
    #[error(transparent)]
    Transform(#[from] spiketrans_core::TransformError),
    #[error(transparent)]
    Shrinkage(#[from] spiketrans_core::ShrinkageError),
}
