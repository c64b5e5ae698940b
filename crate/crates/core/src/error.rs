use alloc::string::String;

use crate::semi_markov::ValidityReport;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid time grid: t_max = {t_max}, steps = {steps}")]
    InvalidGrid { t_max: f64, steps: usize },

    #[error("grid mismatch: expected {expected} samples, found {found}")]
    GridMismatch { expected: usize, found: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not Hermitian: max |M - M†| = {deviation:e}")]
    NotHermitian { deviation: f64 },

    #[error("matrix is not positive semidefinite: minimal eigenvalue {min_eig:e}")]
    NotPositiveSemidefinite { min_eig: f64 },

    #[error("invalid classical generator: {0}")]
    InvalidGenerator(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid semi-Markov kernel: {0}")]
    InvalidJumpKernel(ValidityReport),

    #[error("series did not converge after {terms} terms (newest term sup-norm {residual:e})")]
    SeriesNotConverged { terms: usize, residual: f64 },

    #[error("grid step {step:e} too coarse for kernel deconvolution (need <= {max_step:e})")]
    GridTooCoarse { step: f64, max_step: f64 },

    #[error("ill-conditioned deconvolution for column {column}: {reason}")]
    IllConditioned { column: usize, reason: String },

    #[error("unsupported: {0}")]
    Unsupported(&'static str),

    #[error("solver unstable at step {step}: norm grew by {growth:e}")]
    SolverUnstable { step: usize, growth: f64 },

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error(
        "Choi matrix and CP witness disagree at node {node}: Choi min-eig {choi:e}, witness {witness:e}"
    )]
    WitnessMismatch { node: usize, choi: f64, witness: f64 },

    #[error(
        "population map has negative entry {min_entry:e} at node {node}; \
         decoherence cannot restore complete positivity"
    )]
    PopulationsNotPositive { node: usize, min_entry: f64 },

    #[error(
        "map is not completely positive even at gamma_max = {gamma_max} (margin {margin:e}); \
         retry with a larger gamma_max"
    )]
    InfeasibleBracket { gamma_max: f64, margin: f64 },

    #[error("coherence schedule singular for pair ({k}, {l}) at node {node}: {reason}")]
    SingularSchedule { k: usize, l: usize, node: usize, reason: &'static str },
}
