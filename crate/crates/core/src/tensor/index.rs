use std::fmt;
use std::ops::Index;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A point of the nonnegative integer grid, `d >= 1`.
///
/// The same type serves as grid position, signal extent (componentwise
/// maximum index, so support `[0, N]` has `N_k + 1` points along direction
/// `k`), kernel extent, stride, and dilation.
///
/// Arithmetic helpers panic when the operands' dimensions differ; public
/// entry points validate dimensions before doing index math.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>")]
pub struct MultiIndex(Vec<usize>);

impl MultiIndex {
    /// Wraps a coordinate list; errors when it is empty.
    pub fn new(entries: Vec<usize>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Shape("multi-index must have at least one entry".into()));
        }
        Ok(MultiIndex(entries))
    }

    /// The origin of a `dim`-dimensional grid. Panics if `dim == 0`.
    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "grid dimension must be at least 1");
        MultiIndex(vec![0; dim])
    }

    /// All-ones index (the identity stride/dilation). Panics if `dim == 0`.
    pub fn ones(dim: usize) -> Self {
        assert!(dim >= 1, "grid dimension must be at least 1");
        MultiIndex(vec![1; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn is_ones(&self) -> bool {
        self.0.iter().all(|&e| e == 1)
    }

    /// Number of grid points in the box `[0, self]`.
    pub fn box_len(&self) -> usize {
        self.0.iter().map(|&e| e + 1).product()
    }

    /// Product of the entries themselves (e.g. patch size of a stride).
    pub fn product(&self) -> usize {
        self.0.iter().product()
    }

    fn zip(&self, other: &Self, f: impl Fn(usize, usize) -> usize) -> Self {
        assert_eq!(self.dim(), other.dim(), "multi-index dimension mismatch");
        MultiIndex(self.0.iter().zip(&other.0).map(|(&a, &b)| f(a, b)).collect())
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a + b)
    }

    /// Componentwise subtraction; `None` as soon as any entry would go
    /// negative (an out-of-support read).
    pub fn checked_sub(&self, other: &Self) -> Option<Self> {
        assert_eq!(self.dim(), other.dim(), "multi-index dimension mismatch");
        let mut out = Vec::with_capacity(self.dim());
        for (&a, &b) in self.0.iter().zip(&other.0) {
            out.push(a.checked_sub(b)?);
        }
        Some(MultiIndex(out))
    }

    /// Componentwise product (`s ∘ i`).
    pub fn mul(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a * b)
    }

    /// Componentwise floor division; divisor entries must be nonzero.
    pub fn floor_div(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a / b)
    }

    /// Componentwise ceiling division; divisor entries must be nonzero.
    pub fn ceil_div(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a.div_ceil(b))
    }

    /// Componentwise `<=`.
    pub fn leq(&self, other: &Self) -> bool {
        assert_eq!(self.dim(), other.dim(), "multi-index dimension mismatch");
        self.0.iter().zip(&other.0).all(|(&a, &b)| a <= b)
    }

    /// All points of `[0, self]` in row-major order (last coordinate
    /// fastest), matching the storage order of [`super::Signal`].
    pub fn iter_box(&self) -> BoxIter {
        BoxIter { bound: self.0.clone(), cur: vec![0; self.dim()], done: false }
    }
}

impl TryFrom<Vec<usize>> for MultiIndex {
    type Error = Error;

    fn try_from(entries: Vec<usize>) -> Result<Self> {
        MultiIndex::new(entries)
    }
}

impl Index<usize> for MultiIndex {
    type Output = usize;

    fn index(&self, k: usize) -> &usize {
        &self.0[k]
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (k, e) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{e}")?;
        }
        write!(f, ")")
    }
}

/// Row-major iterator over a grid box, see [`MultiIndex::iter_box`].
pub struct BoxIter {
    bound: Vec<usize>,
    cur: Vec<usize>,
    done: bool,
}

impl Iterator for BoxIter {
    type Item = MultiIndex;

    fn next(&mut self) -> Option<MultiIndex> {
        if self.done {
            return None;
        }
        let item = MultiIndex(self.cur.clone());
        self.done = !advance(&mut self.cur, &self.bound);
        Some(item)
    }
}

/// Steps `cur` to the next point of `[0, bound]` in row-major order
/// (last coordinate fastest). Returns `false` after the last point.
pub(crate) fn advance(cur: &mut [usize], bound: &[usize]) -> bool {
    for k in (0..cur.len()).rev() {
        if cur[k] < bound[k] {
            cur[k] += 1;
            return true;
        }
        cur[k] = 0;
    }
    false
}
