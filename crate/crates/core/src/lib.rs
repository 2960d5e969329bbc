//! Standing waves of nonlinear Schrödinger and Dirac equations on noncompact
//! metric graphs with the nonlinearity localized on the compact core.
//!
//! The pipeline: [`graph`] models and classifies the metric graph, [`grid`]
//! and [`assemble`] turn it into finite-dimensional operators (P1 elements
//! for the Laplacian, a staggered two-component scheme for the Dirac
//! operator), [`nls`] computes constrained ground states and optimal
//! functional-inequality constants, [`rearrange`] provides the monotone and
//! symmetric rearrangements used as verification instruments, and [`dirac`]
//! computes bound states at fixed frequency and follows them through the
//! nonrelativistic limit.

pub mod assemble;
pub mod dirac;
pub mod error;
pub mod export;
pub mod field;
pub mod graph;
pub mod grid;
pub mod linalg;
pub mod nls;
pub mod rearrange;
