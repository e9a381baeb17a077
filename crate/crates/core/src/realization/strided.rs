use nalgebra::{DMatrix, DVector};

use super::model::{Realization, StridedRealization};
use crate::tensor::{Kernel, MultiIndex};
use crate::{Error, Result};

/// Builds the state-space form of a strided 2-D convolution.
///
/// The layer splits into a reshape that lumps each `s1 x s2` input patch
/// into the channel dimension and a plain two-direction system on the
/// coarsened grid. The inner system's input vector enumerates patch
/// offsets `(o1, o2)` with `o2` fastest (the returned `patch_order`), each
/// carrying the original `c_in` channels.
///
/// State 2 stores reshaped input columns: block `(rho, l)` (for
/// `rho < s1`, `l < r2 - s2 + 1`) holds the samples with fine-grid row
/// offset `rho` seen `ceil((l+1)/s2)` coarse steps ago along direction 2.
/// State 1 holds `ceil((r1+1)/s1) - 1` kernel-weighted partial sums. Taps
/// whose row index would exceed `r1` leave zero blocks behind, which is
/// where the non-divisible case `(r1+1) % s1 != 0` shows up.
///
/// Requires `s_k <= r_k + 1` in both directions; a larger stride would skip
/// input patches entirely and has no state-space form on this grid.
pub fn build_strided(kernel: &Kernel, stride: &MultiIndex) -> Result<StridedRealization> {
    if kernel.dim() != 2 {
        return Err(Error::Unsupported(format!(
            "strided builder covers two directions, kernel has {}",
            kernel.dim()
        )));
    }
    if stride.dim() != 2 {
        return Err(Error::DimMismatch(format!(
            "stride {} does not match kernel dimension 2",
            stride
        )));
    }
    let (r1, r2) = (kernel.extents()[0], kernel.extents()[1]);
    let (s1, s2) = (stride[0], stride[1]);
    if s1 == 0 || s2 == 0 {
        return Err(Error::Shape(format!("stride entries must be at least 1, got {stride}")));
    }
    if s1 > r1 + 1 || s2 > r2 + 1 {
        return Err(Error::Unsupported(format!(
            "stride {stride} exceeds the kernel size ({} x {}); patches would be skipped",
            r1 + 1,
            r2 + 1
        )));
    }
    let c_in = kernel.c_in();
    let c_out = kernel.c_out();

    // Block counts: history depth along each direction on the coarse grid.
    let l1 = (r1 + 1).div_ceil(s1) - 1;
    let l2 = r2 + 1 - s2;
    let n1 = c_out * l1;
    let n2 = c_in * s1 * l2;
    let n_u = c_in * s1 * s2;

    // Patch offsets (o1, o2) with o2 fastest; block p = o1*s2 + o2.
    let patch_order: Vec<MultiIndex> =
        MultiIndex::new(vec![s1 - 1, s2 - 1])?.iter_box().collect();

    // Kernel tap at block position, skipping row indices past the kernel.
    let tap = |m: &mut DMatrix<f64>, row_blk: usize, col_blk: usize, t1: usize, t2: usize| {
        if t1 > r1 {
            return;
        }
        for o in 0..c_out {
            for q in 0..c_in {
                m[(row_blk * c_out + o, col_blk * c_in + q)] = kernel.coeff(&[t1, t2], o, q);
            }
        }
    };
    let eye = |m: &mut DMatrix<f64>, row_blk: usize, col_blk: usize| {
        for j in 0..c_in {
            m[(row_blk * c_in + j, col_blk * c_in + j)] = 1.0;
        }
    };

    let mut a11 = DMatrix::zeros(n1, n1);
    for j in 0..l1.saturating_sub(1) {
        for q in 0..c_out {
            a11[((j + 1) * c_out + q, j * c_out + q)] = 1.0;
        }
    }

    let mut a12 = DMatrix::zeros(n1, n2);
    let mut b1 = DMatrix::zeros(n1, n_u);
    for v in 0..l1 {
        // Row-tap index contributed by state block v, at fine offset back.
        let base = s1 * (l1 - v + 1) - 1;
        for rho in 0..s1 {
            for l in 0..l2 {
                tap(&mut a12, v, rho * l2 + l, base - rho, r2 - l);
            }
        }
        for o1 in 0..s1 {
            for o2 in 0..s2 {
                tap(&mut b1, v, o1 * s2 + o2, base - o1, s2 - 1 - o2);
            }
        }
    }

    let a21 = DMatrix::zeros(n2, n1);
    let mut a22 = DMatrix::zeros(n2, n2);
    let mut b2 = DMatrix::zeros(n2, n_u);
    for rho in 0..s1 {
        for l in 0..l2 {
            let row = rho * l2 + l;
            if l + s2 < l2 {
                eye(&mut a22, row, rho * l2 + l + s2);
            } else {
                eye(&mut b2, row, rho * s2 + (l + s2 - l2));
            }
        }
    }

    let mut c1 = DMatrix::zeros(c_out, n1);
    if l1 > 0 {
        for q in 0..c_out {
            c1[(q, (l1 - 1) * c_out + q)] = 1.0;
        }
    }
    let mut c2 = DMatrix::zeros(c_out, n2);
    for rho in 0..s1 {
        for l in 0..l2 {
            tap(&mut c2, 0, rho * l2 + l, s1 - 1 - rho, r2 - l);
        }
    }
    let mut d = DMatrix::zeros(c_out, n_u);
    for o1 in 0..s1 {
        for o2 in 0..s2 {
            tap(&mut d, 0, o1 * s2 + o2, s1 - 1 - o1, s2 - 1 - o2);
        }
    }

    let inner = Realization::new(
        vec![n1, n2],
        n_u,
        c_out,
        vec![vec![a11, a12], vec![a21, a22]],
        vec![b1, b2],
        vec![c1, c2],
        d,
        vec![DVector::zeros(n1), DVector::zeros(n2)],
        DVector::from_column_slice(kernel.bias()),
    )?;
    StridedRealization::new(stride.clone(), patch_order, inner)
}
