//! Error types shared across the crate.

use thiserror::Error;

/// Failures while reading or validating a metric graph.
#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("duplicate name `{0}`")]
    DuplicateName(String),
    #[error("unknown vertex `{vertex}` referenced at line {line}")]
    UnknownVertex { vertex: String, line: usize },
    #[error("edge `{edge}` has nonpositive length {length}")]
    NonpositiveLength { edge: String, length: f64 },
    #[error("graph is disconnected")]
    Disconnected,
    #[error("graph has no half-lines (must be noncompact)")]
    ZeroHalfLines,
    #[error("empty compact core: at least one bounded edge is required")]
    EmptyCompactCore,
    #[error("graph has no vertices")]
    Empty,
}

/// Failures while building a grid on a metric graph.
#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("step size must be positive, got {0}")]
    NonpositiveStep(f64),
    #[error("truncation length must be positive, got {0}")]
    NonpositiveTruncation(f64),
    #[error("edge `{edge}` (length {length}) shorter than 2h = {min}")]
    EdgeTooShort { edge: String, length: f64, min: f64 },
    #[error("truncation length {l_trunc} shorter than 10h = {min}")]
    TruncationTooShort { l_trunc: f64, min: f64 },
}

/// Failures in the nonlinear solvers and eigensolvers.
#[derive(Debug, Error)]
pub enum SolveError {
    #[error("{method} failed: {detail}")]
    LinearSolver {
        method: &'static str,
        detail: String,
    },
    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("energy increased beyond line-search tolerance at iteration {iteration}")]
    EnergyIncrease { iteration: usize },
    #[error("field does not match the grid: expected {expected} samples, got {got}")]
    GridMismatch { expected: usize, got: usize },
    #[error("field has zero mass")]
    ZeroMass,
    #[error("refused regime: {0}")]
    RefusedRegime(String),
    #[error("frequency {omega} outside spectral gap (-{gap}, {gap})")]
    OutsideSpectralGap { omega: f64, gap: f64 },
    #[error("Newton iteration collapsed to the trivial solution")]
    TrivialSolution,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
