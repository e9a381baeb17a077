//! Construction of state-space systems that reproduce convolutional layers.
//!
//! The builders turn a [`Kernel`](crate::tensor::Kernel) into a
//! [`Realization`] whose blocks are identity shifts and verbatim kernel
//! taps, one state vector per grid direction. Strided layers come out as a
//! [`StridedRealization`]: a patch-lumping reshape plus a plain system on
//! the coarse grid.

mod build;
mod model;
mod strided;

pub use build::{build, build_1d, build_2d, build_dilated, build_nd, mat_kernel};
pub use model::{LayerRealization, Realization, StridedRealization};
pub use strided::build_strided;
