use std::borrow::Cow;

use super::config::{ConvConfig, Padding};
use super::index::{advance, MultiIndex};
use super::kernel::Kernel;
use super::signal::Signal;
use crate::{Error, Result};

/// Direct (zero-padded, strided, dilated) convolution:
///
/// ```text
/// y[i] = b + sum_{0 <= t <= r_eff} K_eff[t] u[s∘i - t]
/// ```
///
/// where `K_eff` is the kernel expanded by the dilation and reads left of
/// the support are zero. The uncropped output covers `[0, floor(N/s)]`;
/// the configured padding mode then crops it (with the effective kernel
/// extent mapped to the output grid, `ceil(r_eff/s)`).
///
/// This is the plain-loop reference the realizations are tested against.
pub fn convolve(kernel: &Kernel, input: &Signal, config: &ConvConfig) -> Result<Signal> {
    check_layer_dims(kernel, input, config)?;
    let keff: Cow<Kernel> = if config.dilation().is_ones() {
        Cow::Borrowed(kernel)
    } else {
        Cow::Owned(dilate_kernel(kernel, config.dilation())?)
    };

    let d = input.dim();
    let c_in = kernel.c_in();
    let c_out = kernel.c_out();
    let n = input.extent();
    let s = config.stride();
    let m = n.floor_div(s);
    let r = keff.extents();

    let mut data = Vec::with_capacity(m.box_len() * c_out);
    let mut i = vec![0usize; d];
    let mut pos = vec![0usize; d];
    loop {
        let start = data.len();
        data.extend_from_slice(keff.bias());
        let mut t = vec![0usize; d];
        'taps: loop {
            for k in 0..d {
                match (s[k] * i[k]).checked_sub(t[k]) {
                    Some(p) => pos[k] = p,
                    Option::None => {
                        if !advance(&mut t, r.as_slice()) {
                            break 'taps;
                        }
                        continue 'taps;
                    }
                }
            }
            let u = input.get(&pos);
            for o in 0..c_out {
                let mut acc = 0.0;
                for q in 0..c_in {
                    acc += keff.coeff(&t, o, q) * u[q];
                }
                data[start + o] += acc;
            }
            if !advance(&mut t, r.as_slice()) {
                break;
            }
        }
        if !advance(&mut i, m.as_slice()) {
            break;
        }
    }

    let full = Signal::new(m, c_out, data)?;
    crop_for_padding(&full, &r.ceil_div(s), config.padding())
}

/// Crops a convolution output according to the padding mode.
///
/// With `N` the extent of `y` and `r` the kernel extent on `y`'s grid, the
/// retained support is
///
/// * `Full`: `[0, N]` (identity),
/// * `Same`: `[floor(r/2), N - ceil(r/2)]`,
/// * `None`: `[r, N - r]`,
///
/// re-based to the origin. Errors when any direction's window is empty.
pub fn crop_for_padding(y: &Signal, r: &MultiIndex, mode: Padding) -> Result<Signal> {
    if r.dim() != y.dim() {
        return Err(Error::DimMismatch(format!(
            "crop extent {} does not match signal dimension {}",
            r,
            y.dim()
        )));
    }
    if mode == Padding::Full {
        return Ok(y.clone());
    }
    let d = y.dim();
    let n = y.extent();
    let mut lo = Vec::with_capacity(d);
    let mut hi = Vec::with_capacity(d);
    for k in 0..d {
        let (l, h) = match mode {
            Padding::Full => unreachable!(),
            Padding::Same => (r[k] / 2, n[k].checked_sub(r[k].div_ceil(2))),
            Padding::None => (r[k], n[k].checked_sub(r[k])),
        };
        match h {
            Some(h) if l <= h => {
                lo.push(l);
                hi.push(h);
            }
            _ => {
                return Err(Error::EmptyWindow(format!(
                    "padding crop along direction {k} needs extent at least {}, signal has {}",
                    match mode {
                        Padding::Same => r[k],
                        _ => 2 * r[k],
                    },
                    n[k]
                )))
            }
        }
    }
    let lo = MultiIndex::new(lo)?;
    let hi = MultiIndex::new(hi)?;
    let out_extent = hi.checked_sub(&lo).expect("window bounds are ordered");
    Signal::from_fn(out_extent, y.channels(), |j, ch| {
        let mut src = Vec::with_capacity(d);
        for k in 0..d {
            src.push(j[k] + lo[k]);
        }
        y.at(&src, ch)
    })
}

/// Expands a kernel by a dilation factor: the tap at `t` moves to
/// `dilation ∘ t` and every position in between is zero. The effective
/// extent is `dilation ∘ r`; the bias is unchanged.
pub fn dilate_kernel(kernel: &Kernel, dilation: &MultiIndex) -> Result<Kernel> {
    if dilation.dim() != kernel.dim() {
        return Err(Error::DimMismatch(format!(
            "dilation {} does not match kernel dimension {}",
            dilation,
            kernel.dim()
        )));
    }
    if dilation.as_slice().contains(&0) {
        return Err(Error::Shape(format!("dilation entries must be at least 1, got {dilation}")));
    }
    if dilation.is_ones() {
        return Ok(kernel.clone());
    }
    let d = kernel.dim();
    let r_eff = kernel.extents().mul(dilation);
    let mut src = vec![0usize; d];
    Kernel::from_fn(r_eff, kernel.c_out(), kernel.c_in(), kernel.bias().to_vec(), |t, o, i| {
        for k in 0..d {
            if t[k] % dilation[k] != 0 {
                return 0.0;
            }
            src[k] = t[k] / dilation[k];
        }
        kernel.coeff(&src, o, i)
    })
}

/// Patch offsets of a stride box `[0, s-1]` in the order used by
/// [`reshape_strided`]: the first grid index varies fastest, so for
/// `s = (2, 2)` the offsets come out `(0,0), (1,0), (0,1), (1,1)`.
pub fn patch_offsets(stride: &MultiIndex) -> Vec<MultiIndex> {
    assert!(
        stride.as_slice().iter().all(|&e| e >= 1),
        "stride entries must be at least 1"
    );
    let d = stride.dim();
    let count = stride.product();
    let mut out = Vec::with_capacity(count);
    let mut cur = vec![0usize; d];
    for _ in 0..count {
        out.push(MultiIndex::new(cur.clone()).expect("stride dim is at least 1"));
        for k in 0..d {
            cur[k] += 1;
            if cur[k] < stride[k] {
                break;
            }
            cur[k] = 0;
        }
    }
    out
}

/// Lumps each `s_1 x ... x s_d` patch of the input into the channel
/// dimension: output grid point `i` carries the patch at `[s∘i, s∘i + s - 1]`,
/// flattened in [`patch_offsets`] order with the original channels innermost.
///
/// The output extent is `floor(N/s)`; a trailing patch that sticks out past
/// the support is zero-filled in the entries beyond it, consistent with the
/// zero-padding convention of [`convolve`].
pub fn reshape_strided(input: &Signal, stride: &MultiIndex) -> Result<Signal> {
    if stride.dim() != input.dim() {
        return Err(Error::DimMismatch(format!(
            "stride {} does not match signal dimension {}",
            stride,
            input.dim()
        )));
    }
    if stride.as_slice().contains(&0) {
        return Err(Error::Shape(format!("stride entries must be at least 1, got {stride}")));
    }
    let d = input.dim();
    let c = input.channels();
    let n = input.extent();
    let m = n.floor_div(stride);
    let offsets = patch_offsets(stride);
    let mut pos = vec![0usize; d];
    Signal::from_fn(m, c * offsets.len(), |i, ch| {
        let block = ch / c;
        let q = ch % c;
        let off = &offsets[block];
        for k in 0..d {
            pos[k] = stride[k] * i[k] + off[k];
            if pos[k] > n[k] {
                return 0.0;
            }
        }
        input.at(&pos, q)
    })
}

fn check_layer_dims(kernel: &Kernel, input: &Signal, config: &ConvConfig) -> Result<()> {
    if kernel.dim() != input.dim() || kernel.dim() != config.dim() {
        return Err(Error::DimMismatch(format!(
            "kernel (d={}), input (d={}) and config (d={}) must agree",
            kernel.dim(),
            input.dim(),
            config.dim()
        )));
    }
    if kernel.c_in() != input.channels() {
        return Err(Error::DimMismatch(format!(
            "kernel expects {} input channels, signal has {}",
            kernel.c_in(),
            input.channels()
        )));
    }
    Ok(())
}
