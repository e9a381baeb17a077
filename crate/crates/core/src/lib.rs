//! State-space realizations of multidimensional convolutional layers.
//!
//! A convolutional layer with kernel `K`, bias `b`, and zero padding on the
//! low-index side,
//!
//! ```text
//! y[i] = b + sum_{0 <= t <= r} K[t] u[i - t],      u[j] = 0 outside [0, N],
//! ```
//!
//! admits an exact realization as a Roesser-type state-space system: one
//! state vector per grid direction, each propagating along its own axis,
//! with zero state on every boundary face. This crate builds those
//! realizations (plain, dilated, and strided), simulates them over finite
//! grids, and checks them against direct convolution.
//!
//! * [`tensor`]: dense grid signals, kernels, and the direct-convolution
//!   reference operations (convolve, crop, dilate, strided reshape).
//! * [`realization`]: Roesser model construction for 1-D, 2-D, N-D,
//!   dilated, and strided layers.
//! * [`simulator`]: the grid recursion, impulse responses, and the
//!   end-to-end layer runner.
//! * [`analysis`]: rank certificates, observability checks, dimension
//!   reports, and randomized equivalence verification.
//! * [`fixtures`]: seeded, platform-independent test data.

// Grid recursions here walk several parallel per-direction arrays with one
// shared index; iterator rewrites of those loops hide the coupling.
#![allow(clippy::needless_range_loop)]

pub mod analysis;
pub mod fixtures;
pub mod realization;
pub mod simulator;
pub mod tensor;

use thiserror::Error;

/// Errors shared by all modules.
#[derive(Debug, Error)]
pub enum Error {
    /// Operands have incompatible grid dimensions or channel counts.
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    /// A container was constructed from data of the wrong length or shape.
    #[error("invalid shape: {0}")]
    Shape(String),
    /// A coefficient is NaN or infinite.
    #[error("non-finite value in {0}")]
    NonFinite(String),
    /// A cropping window came out empty.
    #[error("empty window: {0}")]
    EmptyWindow(String),
    /// The requested combination is outside what the construction supports.
    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;
