//! Dense multichannel grid data and the direct-convolution reference ops.
//!
//! Layout contract shared by every container and by the JSON interchange
//! format: grid indices are stored row-major (the last grid index varies
//! fastest) with the channel dimension innermost. A [`Signal`] with extent
//! `N` covers the box `[0, N]`, so it holds `(N_1+1) * ... * (N_d+1)`
//! grid points; a [`Kernel`] with extents `r` holds one `c_out x c_in`
//! coefficient block per tap in `[0, r]`.
//!
//! The operations here are deliberately plain nested loops over that
//! layout. They serve as the ground truth the state-space machinery in the
//! other modules is tested against.

mod config;
mod index;
mod kernel;
mod ops;
mod signal;

pub use config::{ConvConfig, Padding};
pub use index::MultiIndex;
pub use kernel::Kernel;
pub use ops::{convolve, crop_for_padding, dilate_kernel, patch_offsets, reshape_strided};
pub use signal::{max_abs_diff, Signal};

pub(crate) use index::advance;
