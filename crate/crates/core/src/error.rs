use std::io;

use thiserror::Error;

/// Errors produced by the eigenpair solvers and their supporting machinery.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("degenerate triangle {index} (area {area:e})")]
    DegenerateTriangle { index: usize, area: f64 },

    #[error("exponent p = {0} outside (1, inf)")]
    InvalidExponent(f64),

    #[error("coefficient vector has length {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("cannot scale zero function to S")]
    ZeroFunction,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("linear solver did not converge after {iterations} iterations (relative residual {residual:e})")]
    LinearSolver { iterations: usize, residual: f64 },

    #[error("augmented Lagrangian did not converge in {iterations} iterations (last residual {last_residual:e})")]
    AlNotConverged {
        iterations: usize,
        last_residual: f64,
        history: Vec<f64>,
    },

    #[error("function is not on S: J(u) = {0}")]
    NotOnConstraint(f64),

    #[error("eigenvalue estimate needs nu > 0, got {0:e}")]
    NonPositiveNu(f64),

    #[error("path passes through zero; choose different e_M")]
    PathThroughZero,

    #[error("{method} stalled after {iterations} iterations: step fell below {dt_min:e} (|w| = {w_norm:e})")]
    Stalled {
        method: &'static str,
        iterations: usize,
        dt_min: f64,
        w_norm: f64,
        best: Box<crate::cdm::EigenpairResult>,
    },

    #[error("{method} reached the iteration cap {iterations} (|w| = {w_norm:e})")]
    MaxIterations {
        method: &'static str,
        iterations: usize,
        w_norm: f64,
        best: Box<crate::cdm::EigenpairResult>,
    },

    #[error("symmetry class {class} is not supported on {domain}")]
    UnsupportedSymmetry { class: String, domain: String },

    #[error("mesh is not invariant under {0}")]
    MeshNotInvariant(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
