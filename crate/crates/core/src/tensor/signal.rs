use serde::{Deserialize, Serialize};

use super::index::{advance, MultiIndex};
use crate::{Error, Result};

/// Multichannel data on the grid box `[0, extent]`.
///
/// Storage is row-major over the grid with the channel index innermost:
/// the value at grid point `i`, channel `ch` lives at flat position
/// `(i_1 * (N_2+1) * ... * (N_d+1) + ... + i_d) * channels + ch`.
///
/// Signals are immutable once constructed and all entries are finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SignalRepr", into = "SignalRepr")]
pub struct Signal {
    extent: MultiIndex,
    channels: usize,
    data: Vec<f64>,
    /// Grid strides (in grid points, not data entries), last entry 1.
    grid_strides: Vec<usize>,
}

impl Signal {
    pub fn new(extent: MultiIndex, channels: usize, data: Vec<f64>) -> Result<Self> {
        if channels == 0 {
            return Err(Error::Shape("signal needs at least one channel".into()));
        }
        let expect = extent.box_len() * channels;
        if data.len() != expect {
            return Err(Error::Shape(format!(
                "signal data has {} entries, extent {} with {} channels needs {}",
                data.len(),
                extent,
                channels,
                expect
            )));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("signal data".into()));
        }
        let grid_strides = grid_strides(&extent);
        Ok(Signal { extent, channels, data, grid_strides })
    }

    pub fn zeros(extent: MultiIndex, channels: usize) -> Result<Self> {
        let len = extent.box_len() * channels;
        Signal::new(extent, channels, vec![0.0; len])
    }

    /// Builds a signal by evaluating `f(grid_point, channel)` over the box
    /// in storage order.
    pub fn from_fn(
        extent: MultiIndex,
        channels: usize,
        mut f: impl FnMut(&[usize], usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(extent.box_len() * channels);
        let mut cur = vec![0usize; extent.dim()];
        loop {
            for ch in 0..channels {
                data.push(f(&cur, ch));
            }
            if !advance(&mut cur, extent.as_slice()) {
                break;
            }
        }
        Signal::new(extent, channels, data)
    }

    pub fn dim(&self) -> usize {
        self.extent.dim()
    }

    pub fn extent(&self) -> &MultiIndex {
        &self.extent
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Flat storage, row-major with channel innermost.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Flat grid offset of `idx` (in grid points). Panics outside the box.
    fn grid_offset(&self, idx: &[usize]) -> usize {
        assert_eq!(idx.len(), self.dim(), "index dimension mismatch");
        let mut off = 0;
        for (k, &i) in idx.iter().enumerate() {
            assert!(i <= self.extent[k], "index {i} exceeds extent along direction {k}");
            off += i * self.grid_strides[k];
        }
        off
    }

    /// Channel slice at a grid point. Panics outside the box.
    pub fn get(&self, idx: &[usize]) -> &[f64] {
        let off = self.grid_offset(idx) * self.channels;
        &self.data[off..off + self.channels]
    }

    /// Single entry at a grid point and channel. Panics outside the box.
    pub fn at(&self, idx: &[usize], ch: usize) -> f64 {
        assert!(ch < self.channels, "channel {ch} out of range");
        self.data[self.grid_offset(idx) * self.channels + ch]
    }
}

fn grid_strides(extent: &MultiIndex) -> Vec<usize> {
    let d = extent.dim();
    let mut strides = vec![1usize; d];
    for k in (0..d - 1).rev() {
        strides[k] = strides[k + 1] * (extent[k + 1] + 1);
    }
    strides
}

/// Largest absolute entrywise difference between two signals of equal shape.
pub fn max_abs_diff(a: &Signal, b: &Signal) -> Result<f64> {
    if a.extent != b.extent || a.channels != b.channels {
        return Err(Error::DimMismatch(format!(
            "cannot compare signal of extent {} ({} ch) with extent {} ({} ch)",
            a.extent, a.channels, b.extent, b.channels
        )));
    }
    Ok(a.data
        .iter()
        .zip(&b.data)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max))
}

#[derive(Serialize, Deserialize)]
struct SignalRepr {
    dim: usize,
    extents: Vec<usize>,
    channels: usize,
    data: Vec<f64>,
}

impl From<Signal> for SignalRepr {
    fn from(s: Signal) -> SignalRepr {
        SignalRepr {
            dim: s.dim(),
            extents: s.extent.as_slice().to_vec(),
            channels: s.channels,
            data: s.data,
        }
    }
}

impl TryFrom<SignalRepr> for Signal {
    type Error = Error;

    fn try_from(r: SignalRepr) -> Result<Signal> {
        if r.dim != r.extents.len() {
            return Err(Error::Shape(format!(
                "signal dim field is {} but extents list has {} entries",
                r.dim,
                r.extents.len()
            )));
        }
        Signal::new(MultiIndex::new(r.extents)?, r.channels, r.data)
    }
}
