//! Deterministic test-data generation.
//!
//! Randomized tests and the CLI's `gen` command both need reproducible
//! inputs, and reproducibility here has to hold across library versions
//! and even across languages (so fixtures can be regenerated elsewhere
//! and compared byte-for-byte). General-purpose RNG crates don't promise
//! a stable stream, so this uses SplitMix64, which is small enough to
//! specify exactly:
//!
//! ```text
//! state += 0x9E3779B97F4A7C15
//! z = state
//! z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//! z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//! output = z ^ (z >> 31)
//! ```
//!
//! Coefficients are drawn as `2 * (output >> 11) * 2^-53 - 1`, uniform on
//! `[-1, 1)`. Kernels fill coefficient storage in order, then the bias;
//! signals fill their storage in order. Storage order is documented on
//! [`Kernel`](crate::tensor::Kernel) and [`Signal`](crate::tensor::Signal).

use crate::tensor::{Kernel, MultiIndex, Signal};
use crate::Result;

/// SplitMix64 generator (Steele, Lea and Flood's `java.util.SplittableRandom`
/// finalizer), chosen for its trivially portable definition.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^ (z >> 31)
    }

    /// Uniform draw from `[-1, 1)` with 53 random mantissa bits.
    pub fn next_coeff(&mut self) -> f64 {
        2.0 * ((self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)) - 1.0
    }
}

/// Kernel with all coefficients and biases drawn from `rng` in storage order
/// (coefficients first, then the bias vector).
pub fn random_kernel(
    extents: &MultiIndex,
    c_out: usize,
    c_in: usize,
    rng: &mut SplitMix64,
) -> Result<Kernel> {
    let n_coeffs = extents.box_len() * c_out * c_in;
    let coeffs: Vec<f64> = (0..n_coeffs).map(|_| rng.next_coeff()).collect();
    let bias: Vec<f64> = (0..c_out).map(|_| rng.next_coeff()).collect();
    Kernel::new(extents.clone(), c_out, c_in, coeffs, bias)
}

/// Signal with all samples drawn from `rng` in storage order.
pub fn random_signal(extent: &MultiIndex, channels: usize, rng: &mut SplitMix64) -> Result<Signal> {
    let n = extent.box_len() * channels;
    let data: Vec<f64> = (0..n).map(|_| rng.next_coeff()).collect();
    Signal::new(extent.clone(), channels, data)
}
