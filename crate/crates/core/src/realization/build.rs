use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

use super::model::Realization;
use crate::tensor::{dilate_kernel, Kernel, MultiIndex};
use crate::{Error, Result};

/// Writes an identity block of the given size at a block position.
fn place_identity(m: &mut DMatrix<f64>, row: usize, col: usize, size: usize) {
    for j in 0..size {
        m[(row + j, col + j)] = 1.0;
    }
}

/// Writes the `c_out x c_in` tap `K[t]` at a block position.
fn place_tap(m: &mut DMatrix<f64>, row: usize, col: usize, k: &Kernel, t: &[usize]) {
    for o in 0..k.c_out() {
        for q in 0..k.c_in() {
            m[(row + o, col + q)] = k.coeff(t, o, q);
        }
    }
}

/// Builds the state-space form of a 1-D convolution.
///
/// The state stacks the last `r` input samples, oldest first, so the
/// recursion is a pure shift register: the superdiagonal of `A` carries
/// identity blocks, `B` loads the newest sample into the last block, `C`
/// reads the taps `[K[r], ..., K[1]]` and `D = K[0]`.
pub fn build_1d(kernel: &Kernel) -> Result<Realization> {
    if kernel.dim() != 1 {
        return Err(Error::DimMismatch(format!(
            "one-direction builder got a {}-dimensional kernel",
            kernel.dim()
        )));
    }
    let r = kernel.extents()[0];
    let c_in = kernel.c_in();
    let c_out = kernel.c_out();
    let n = c_in * r;

    let mut a = DMatrix::zeros(n, n);
    for j in 0..r.saturating_sub(1) {
        place_identity(&mut a, j * c_in, (j + 1) * c_in, c_in);
    }
    let mut b = DMatrix::zeros(n, c_in);
    if r > 0 {
        place_identity(&mut b, (r - 1) * c_in, 0, c_in);
    }
    let mut c = DMatrix::zeros(c_out, n);
    for j in 0..r {
        place_tap(&mut c, 0, j * c_in, kernel, &[r - j]);
    }
    let mut d = DMatrix::zeros(c_out, c_in);
    place_tap(&mut d, 0, 0, kernel, &[0]);

    Realization::new(
        vec![n],
        c_in,
        c_out,
        vec![vec![a]],
        vec![b],
        vec![c],
        d,
        vec![DVector::zeros(n)],
        DVector::from_column_slice(kernel.bias()),
    )
}

/// Builds the state-space form of a 2-D convolution.
///
/// State 2 stores the last `r2` input columns sample-wise (a shift register
/// along direction 2, decoupled from state 1). State 1 accumulates the
/// kernel-weighted row sums of past steps along direction 1, so that every
/// nonzero block of the system is either an identity shift or a verbatim
/// kernel tap:
///
/// * `A_11` subdiagonal identities, `A_12[v][l] = K[r1-v, r2-l]`,
/// * `B_1[v] = K[r1-v, 0]`, `A_22` superdiagonal identities,
/// * `B_2 = [0; ...; 0; I]`, `C_1 = [0, ..., 0, I]`,
/// * `C_2[l] = K[0, r2-l]`, `D = K[0,0]`, `A_21 = 0`.
pub fn build_2d(kernel: &Kernel) -> Result<Realization> {
    if kernel.dim() != 2 {
        return Err(Error::DimMismatch(format!(
            "two-direction builder got a {}-dimensional kernel",
            kernel.dim()
        )));
    }
    let (r1, r2) = (kernel.extents()[0], kernel.extents()[1]);
    let c_in = kernel.c_in();
    let c_out = kernel.c_out();
    let n1 = c_out * r1;
    let n2 = c_in * r2;

    let mut a11 = DMatrix::zeros(n1, n1);
    for j in 0..r1.saturating_sub(1) {
        place_identity(&mut a11, (j + 1) * c_out, j * c_out, c_out);
    }
    let mut a12 = DMatrix::zeros(n1, n2);
    let mut b1 = DMatrix::zeros(n1, c_in);
    for v in 0..r1 {
        for l in 0..r2 {
            place_tap(&mut a12, v * c_out, l * c_in, kernel, &[r1 - v, r2 - l]);
        }
        place_tap(&mut b1, v * c_out, 0, kernel, &[r1 - v, 0]);
    }
    let a21 = DMatrix::zeros(n2, n1);
    let mut a22 = DMatrix::zeros(n2, n2);
    for l in 0..r2.saturating_sub(1) {
        place_identity(&mut a22, l * c_in, (l + 1) * c_in, c_in);
    }
    let mut b2 = DMatrix::zeros(n2, c_in);
    if r2 > 0 {
        place_identity(&mut b2, (r2 - 1) * c_in, 0, c_in);
    }
    let mut c1 = DMatrix::zeros(c_out, n1);
    if r1 > 0 {
        place_identity(&mut c1, 0, (r1 - 1) * c_out, c_out);
    }
    let mut c2 = DMatrix::zeros(c_out, n2);
    for l in 0..r2 {
        place_tap(&mut c2, 0, l * c_in, kernel, &[0, r2 - l]);
    }
    let mut d = DMatrix::zeros(c_out, c_in);
    place_tap(&mut d, 0, 0, kernel, &[0, 0]);

    Realization::new(
        vec![n1, n2],
        c_in,
        c_out,
        vec![vec![a11, a12], vec![a21, a22]],
        vec![b1, b2],
        vec![c1, c2],
        d,
        vec![DVector::zeros(n1), DVector::zeros(n2)],
        DVector::from_column_slice(kernel.bias()),
    )
}

/// Flattens a kernel (d >= 2) into a single block matrix of shape
/// `c_out*(r1+1) x c_in*prod_{k>=2}(r_k+1)`.
///
/// Block rows run over the first tap index in reverse (`K[r1,...]` on top,
/// `K[0,...]` at the bottom); block columns enumerate the remaining tap
/// indices `(t_2, ..., t_d)` in descending lexicographic order, so the
/// rightmost column block is `K[., 0, ..., 0]`. For d = 3 with unit extents
/// the column order is `K[., 1,1], K[., 1,0], K[., 0,1], K[., 0,0]`.
pub fn mat_kernel(kernel: &Kernel) -> Result<DMatrix<f64>> {
    let d = kernel.dim();
    if d < 2 {
        return Err(Error::DimMismatch(
            "kernel flattening needs at least two directions".into(),
        ));
    }
    let r1 = kernel.extents()[0];
    let tail: Vec<usize> = kernel.extents().as_slice()[1..].to_vec();
    let tail_count: usize = tail.iter().map(|&e| e + 1).product();
    let c_in = kernel.c_in();
    let c_out = kernel.c_out();
    let mut m = DMatrix::zeros(c_out * (r1 + 1), c_in * tail_count);
    let mut t = vec![0usize; d];
    let mut w = vec![0usize; d - 1];
    for j in 0..tail_count {
        for (k, &wk) in w.iter().enumerate() {
            t[k + 1] = tail[k] - wk;
        }
        for v in 0..=r1 {
            t[0] = r1 - v;
            place_tap(&mut m, v * c_out, j * c_in, kernel, &t);
        }
        crate::tensor::advance(&mut w, &tail);
    }
    Ok(m)
}

/// State-entry bookkeeping for [`build_nd`]: direction `k` (0-based, k >= 1)
/// stores one input sample per offset tuple `(b_k, ..., b_{d-1})` with
/// `b_k >= 1` and the later offsets free, enumerated in descending
/// lexicographic order. Concatenating these groups for k = 1..d and the
/// all-zero tuple (the current input) tiles exactly the column order of
/// [`mat_kernel`].
fn state_tuples(extents: &[usize], k: usize) -> Vec<Vec<usize>> {
    let tail = &extents[k..];
    let mut out = Vec::new();
    if tail[0] == 0 {
        return out;
    }
    let mut cur: Vec<usize> = tail.to_vec();
    'outer: loop {
        out.push(cur.clone());
        let mut pos = cur.len();
        loop {
            if pos == 0 {
                break 'outer;
            }
            pos -= 1;
            let low = if pos == 0 { 1 } else { 0 };
            if cur[pos] > low {
                cur[pos] -= 1;
                cur[pos + 1..].copy_from_slice(&tail[pos + 1..]);
                break;
            }
        }
    }
    out
}

/// Builds the state-space form of a convolution in two or more directions.
///
/// Directions 2..d store delayed input samples one tuple-offset at a time
/// (shift registers chained across directions), direction 1 accumulates
/// the kernel-weighted sums; the blocks `[A_12 ... A_1d B_1; C_2 ... C_d D]`
/// are exactly the partition of [`mat_kernel`]. State dimensions come out
/// as `n_1 = c_out*r_1` and `n_k = c_in * r_k * prod_{j>k}(r_j+1)`.
pub fn build_nd(kernel: &Kernel) -> Result<Realization> {
    let d = kernel.dim();
    if d < 2 {
        return Err(Error::DimMismatch(
            "multi-direction builder needs at least two directions; use the 1-D builder".into(),
        ));
    }
    let extents = kernel.extents().as_slice();
    let c_in = kernel.c_in();
    let c_out = kernel.c_out();
    let r1 = extents[0];
    let n1 = c_out * r1;

    let tuples: Vec<Vec<Vec<usize>>> = (1..d).map(|k| state_tuples(extents, k)).collect();
    let positions: Vec<HashMap<Vec<usize>, usize>> = tuples
        .iter()
        .map(|ts| ts.iter().cloned().enumerate().map(|(p, b)| (b, p)).collect())
        .collect();
    let mut state_dims = vec![n1];
    state_dims.extend(tuples.iter().map(|ts| ts.len() * c_in));

    let m = mat_kernel(kernel)?;
    debug_assert_eq!(m.ncols(), state_dims[1..].iter().sum::<usize>() + c_in);

    let mut a: Vec<Vec<DMatrix<f64>>> = (0..d)
        .map(|k| (0..d).map(|l| DMatrix::zeros(state_dims[k], state_dims[l])).collect())
        .collect();
    let mut b: Vec<DMatrix<f64>> = (0..d).map(|k| DMatrix::zeros(state_dims[k], c_in)).collect();
    let mut c: Vec<DMatrix<f64>> = (0..d).map(|k| DMatrix::zeros(c_out, state_dims[k])).collect();

    // Direction 1: identity shift down the block rows, read out at the end.
    for j in 0..r1.saturating_sub(1) {
        place_identity(&mut a[0][0], (j + 1) * c_out, j * c_out, c_out);
    }
    if r1 > 0 {
        place_identity(&mut c[0], 0, (r1 - 1) * c_out, c_out);
    }

    // Row blocks of the flattened kernel: top n1 rows feed direction 1,
    // bottom c_out rows feed the output.
    let mut col = 0;
    for k in 1..d {
        let nk = state_dims[k];
        a[0][k].copy_from(&m.view((0, col), (n1, nk)));
        c[k].copy_from(&m.view((n1, col), (c_out, nk)));
        col += nk;
    }
    b[0].copy_from(&m.view((0, col), (n1, c_in)));
    let dmat = m.view((n1, col), (c_out, c_in)).into_owned();

    // Directions 2..d: each stored sample either shifts within its own
    // direction (leading offset >= 2), hands over to a later direction's
    // stored sample (leading offset 1, next nonzero offset at j), or loads
    // the fresh input (offset tuple (1, 0, ..., 0)).
    for k in 1..d {
        for (p, tup) in tuples[k - 1].iter().enumerate() {
            if tup[0] >= 2 {
                let mut prev = tup.clone();
                prev[0] -= 1;
                let q = positions[k - 1][&prev];
                place_identity(&mut a[k][k], p * c_in, q * c_in, c_in);
            } else if tup[1..].iter().all(|&x| x == 0) {
                place_identity(&mut b[k], p * c_in, 0, c_in);
            } else {
                let j_rel = tup[1..].iter().position(|&x| x != 0).unwrap() + 1;
                let j = k + j_rel;
                let q = positions[j - 1][&tup[j_rel..].to_vec()];
                place_identity(&mut a[k][j], p * c_in, q * c_in, c_in);
            }
        }
    }

    let f = state_dims.iter().map(|&n| DVector::zeros(n)).collect();
    Realization::new(
        state_dims,
        c_in,
        c_out,
        a,
        b,
        c,
        dmat,
        f,
        DVector::from_column_slice(kernel.bias()),
    )
}

/// Dispatches to [`build_1d`] or [`build_nd`] by kernel dimension.
pub fn build(kernel: &Kernel) -> Result<Realization> {
    if kernel.dim() == 1 {
        build_1d(kernel)
    } else {
        build_nd(kernel)
    }
}

/// Realizes a dilated convolution by expanding the kernel first.
pub fn build_dilated(kernel: &Kernel, dilation: &MultiIndex) -> Result<Realization> {
    build(&dilate_kernel(kernel, dilation)?)
}
