//! Runs the state recursion over a finite grid.
//!
//! ```text
//! x_k[i + e_k] = f_k + sum_l A_kl x_l[i] + B_k u[i]
//! y[i]         = g   + sum_k C_k x_k[i]  + D u[i]
//! ```
//!
//! with `x_k = 0` wherever `i_k = 0`. Each `x_k[i]` depends only on the
//! cell at `i - e_k`, so a plain row-major sweep visits every dependency
//! first. Storage keeps only the frontier: state `k` written at cell `i`
//! is consumed exactly `prod_{j>k}(N_j + 1)` cells later, so a ring buffer
//! of that length per direction replaces the full state grid.

use nalgebra::DVector;

use crate::realization::{
    build, build_strided, LayerRealization, Realization, StridedRealization,
};
use crate::tensor::{
    crop_for_padding, dilate_kernel, patch_offsets, reshape_strided, ConvConfig, Kernel,
    MultiIndex, Signal,
};
use crate::{Error, Result};

/// Sweeps the grid `[0, input.extent()]` in row-major order and returns the
/// output signal on the same grid.
pub fn simulate(real: &Realization, input: &Signal) -> Result<Signal> {
    let d = real.dim();
    if input.dim() != d {
        return Err(Error::DimMismatch(format!(
            "realization has {d} directions, input has {}",
            input.dim()
        )));
    }
    if input.channels() != real.input_dim() {
        return Err(Error::DimMismatch(format!(
            "realization expects {} input channels, signal has {}",
            real.input_dim(),
            input.channels()
        )));
    }
    let n = input.extent();

    // ring_len[k] = prod_{j>k} (N_j + 1): cells between writing x_k and
    // reading it at the successor along direction k.
    let mut ring_len = vec![1usize; d];
    for k in (0..d.saturating_sub(1)).rev() {
        ring_len[k] = ring_len[k + 1] * (n[k + 1] + 1);
    }
    let mut rings: Vec<Vec<DVector<f64>>> = (0..d)
        .map(|k| vec![DVector::zeros(real.state_dims()[k]); ring_len[k]])
        .collect();

    let mut out = Vec::with_capacity(n.box_len() * real.output_dim());
    let mut x: Vec<DVector<f64>> = real.state_dims().iter().map(|&nk| DVector::zeros(nk)).collect();
    let mut i = vec![0usize; d];
    let mut flat = 0usize;
    loop {
        for k in 0..d {
            if i[k] == 0 {
                x[k].fill(0.0);
            } else {
                x[k].copy_from(&rings[k][flat % ring_len[k]]);
            }
        }
        let u = DVector::from_column_slice(input.get(&i));

        let mut y = real.g().clone();
        for k in 0..d {
            y += real.c(k) * &x[k];
        }
        y += real.d() * &u;
        out.extend_from_slice(y.as_slice());

        for k in 0..d {
            let mut next = real.f(k).clone();
            for l in 0..d {
                next += real.a(k, l) * &x[l];
            }
            next += real.b(k) * &u;
            rings[k][flat % ring_len[k]] = next;
        }

        flat += 1;
        if !crate::tensor::advance(&mut i, n.as_slice()) {
            break;
        }
    }
    Signal::new(n.clone(), real.output_dim(), out)
}

/// Runs a strided realization on an unreshaped input signal.
///
/// The wrapped system consumes patch vectors and produces the convolution
/// sampled at the far corner of each patch, so the input is first shifted
/// by `s - 1` (zeros in front), cut into patches, reordered into the
/// realization's `patch_order`, and only then simulated. The output lands
/// on the coarse grid `[0, floor(N/s)]`.
pub fn simulate_strided(sr: &StridedRealization, input: &Signal) -> Result<Signal> {
    let s = sr.stride();
    let d = s.dim();
    if input.dim() != d {
        return Err(Error::DimMismatch(format!(
            "realization has {d} directions, input has {}",
            input.dim()
        )));
    }
    let c = sr.channels_in();
    if input.channels() != c {
        return Err(Error::DimMismatch(format!(
            "strided realization expects {c} input channels, signal has {}",
            input.channels()
        )));
    }
    let n = input.extent();

    let shift: Vec<usize> = s.as_slice().iter().map(|&sk| sk - 1).collect();
    let padded_extent = MultiIndex::new(
        n.as_slice().iter().zip(&shift).map(|(&nk, &sh)| nk + sh).collect(),
    )?;
    let padded = Signal::from_fn(padded_extent, c, |i, ch| {
        let mut src = Vec::with_capacity(d);
        for k in 0..d {
            match i[k].checked_sub(shift[k]) {
                Some(p) => src.push(p),
                None => return 0.0,
            }
        }
        input.at(&src, ch)
    })?;
    let reshaped = reshape_strided(&padded, s)?;

    // reshape_strided enumerates patch offsets with the first coordinate
    // fastest; map each of the realization's patch blocks to its position
    // in that enumeration.
    let canonical = patch_offsets(s);
    let source_block: Vec<usize> = sr
        .patch_order()
        .iter()
        .map(|off| {
            canonical
                .iter()
                .position(|cand| *cand == *off)
                .expect("patch order entries lie in the stride box")
        })
        .collect();

    let coarse = n.floor_div(s);
    let lumped = Signal::from_fn(coarse, c * source_block.len(), |i, ch| {
        let (blk, q) = (ch / c, ch % c);
        reshaped.at(i, source_block[blk] * c + q)
    })?;
    simulate(sr.inner(), &lumped)
}

/// Feeds one unit impulse per input channel through the system (affine
/// offsets forced to zero) and collects the outputs over `[0, extent]`
/// as a kernel-shaped tensor.
pub fn impulse_response(real: &Realization, extent: &MultiIndex) -> Result<Kernel> {
    let sys = real.without_offsets();
    let c_in = sys.input_dim();
    let c_out = sys.output_dim();
    let mut responses = Vec::with_capacity(c_in);
    for q in 0..c_in {
        let imp = Signal::from_fn(extent.clone(), c_in, |i, ch| {
            if ch == q && i.iter().all(|&x| x == 0) {
                1.0
            } else {
                0.0
            }
        })?;
        responses.push(simulate(&sys, &imp)?);
    }
    Kernel::from_fn(extent.clone(), c_out, c_in, vec![0.0; c_out], |t, o, q| {
        responses[q].at(t, o)
    })
}

/// Picks the builder matching a layer configuration. Dilation expands the
/// kernel first; a non-unit stride selects the patch-reshaping form and is
/// available for two-direction kernels only.
pub fn realize_layer(kernel: &Kernel, config: &ConvConfig) -> Result<LayerRealization> {
    if config.dim() != kernel.dim() {
        return Err(Error::DimMismatch(format!(
            "config has {} directions, kernel has {}",
            config.dim(),
            kernel.dim()
        )));
    }
    let keff = dilate_kernel(kernel, config.dilation())?;
    if config.stride().is_ones() {
        Ok(LayerRealization::Plain(build(&keff)?))
    } else if kernel.dim() == 2 {
        Ok(LayerRealization::Strided(build_strided(&keff, config.stride())?))
    } else {
        Err(Error::Unsupported(format!(
            "strided realizations cover two directions, kernel has {}",
            kernel.dim()
        )))
    }
}

/// Runs a realized layer on an input, producing the uncropped output (the
/// full grid `[0, N]`, or `[0, floor(N/s)]` for the strided form).
pub fn apply_realization(lr: &LayerRealization, input: &Signal) -> Result<Signal> {
    match lr {
        LayerRealization::Plain(r) => simulate(r, input),
        LayerRealization::Strided(s) => simulate_strided(s, input),
    }
}

/// Full layer pipeline: expand by dilation, build the matching realization,
/// simulate, and crop per the padding mode. Produces the same signal as
/// [`convolve`](crate::tensor::convolve) with the same configuration.
pub fn run_layer(kernel: &Kernel, input: &Signal, config: &ConvConfig) -> Result<Signal> {
    let lr = realize_layer(kernel, config)?;
    let full = apply_realization(&lr, input)?;
    let r_eff = kernel.extents().mul(config.dilation());
    let r_out = r_eff.ceil_div(config.stride());
    crop_for_padding(&full, &r_out, config.padding())
}
