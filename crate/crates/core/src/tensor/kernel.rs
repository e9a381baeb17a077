use serde::{Deserialize, Serialize};

use super::index::{advance, MultiIndex};
use crate::{Error, Result};

/// Convolution kernel: one `c_out x c_in` coefficient block per tap in
/// `[0, extents]`, plus a `c_out` bias vector.
///
/// Coefficients are stored with the tap grid row-major and outermost, then
/// the output channel, then the input channel innermost:
/// `coeffs[(tap_flat * c_out + o) * c_in + i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KernelRepr", into = "KernelRepr")]
pub struct Kernel {
    extents: MultiIndex,
    c_out: usize,
    c_in: usize,
    coeffs: Vec<f64>,
    bias: Vec<f64>,
    grid_strides: Vec<usize>,
}

impl Kernel {
    pub fn new(
        extents: MultiIndex,
        c_out: usize,
        c_in: usize,
        coeffs: Vec<f64>,
        bias: Vec<f64>,
    ) -> Result<Self> {
        if c_out == 0 || c_in == 0 {
            return Err(Error::Shape("kernel needs at least one channel each way".into()));
        }
        let expect = extents.box_len() * c_out * c_in;
        if coeffs.len() != expect {
            return Err(Error::Shape(format!(
                "kernel data has {} entries, extents {} with {}x{} channels needs {}",
                coeffs.len(),
                extents,
                c_out,
                c_in,
                expect
            )));
        }
        if bias.len() != c_out {
            return Err(Error::Shape(format!(
                "kernel bias has {} entries, expected c_out = {}",
                bias.len(),
                c_out
            )));
        }
        if !coeffs.iter().chain(bias.iter()).all(|v| v.is_finite()) {
            return Err(Error::NonFinite("kernel coefficients".into()));
        }
        let mut grid_strides = vec![1usize; extents.dim()];
        for k in (0..extents.dim() - 1).rev() {
            grid_strides[k] = grid_strides[k + 1] * (extents[k + 1] + 1);
        }
        Ok(Kernel { extents, c_out, c_in, coeffs, bias, grid_strides })
    }

    pub fn zeros(extents: MultiIndex, c_out: usize, c_in: usize) -> Result<Self> {
        let len = extents.box_len() * c_out * c_in;
        Kernel::new(extents, c_out, c_in, vec![0.0; len], vec![0.0; c_out])
    }

    /// Builds a kernel by evaluating `f(tap, out_channel, in_channel)` over
    /// the tap box in storage order.
    pub fn from_fn(
        extents: MultiIndex,
        c_out: usize,
        c_in: usize,
        bias: Vec<f64>,
        mut f: impl FnMut(&[usize], usize, usize) -> f64,
    ) -> Result<Self> {
        let mut coeffs = Vec::with_capacity(extents.box_len() * c_out * c_in);
        let mut cur = vec![0usize; extents.dim()];
        loop {
            for o in 0..c_out {
                for i in 0..c_in {
                    coeffs.push(f(&cur, o, i));
                }
            }
            if !advance(&mut cur, extents.as_slice()) {
                break;
            }
        }
        Kernel::new(extents, c_out, c_in, coeffs, bias)
    }

    pub fn dim(&self) -> usize {
        self.extents.dim()
    }

    pub fn extents(&self) -> &MultiIndex {
        &self.extents
    }

    pub fn c_out(&self) -> usize {
        self.c_out
    }

    pub fn c_in(&self) -> usize {
        self.c_in
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Coefficient at tap `t`, output channel `o`, input channel `i`.
    /// Panics outside the tap box.
    pub fn coeff(&self, t: &[usize], o: usize, i: usize) -> f64 {
        assert_eq!(t.len(), self.dim(), "tap dimension mismatch");
        assert!(o < self.c_out && i < self.c_in, "channel out of range");
        let mut off = 0;
        for (k, &tk) in t.iter().enumerate() {
            assert!(tk <= self.extents[k], "tap {tk} exceeds extent along direction {k}");
            off += tk * self.grid_strides[k];
        }
        self.coeffs[(off * self.c_out + o) * self.c_in + i]
    }
}

#[derive(Serialize, Deserialize)]
struct KernelRepr {
    dim: usize,
    extents: Vec<usize>,
    c_in: usize,
    c_out: usize,
    data: Vec<f64>,
    bias: Vec<f64>,
}

impl From<Kernel> for KernelRepr {
    fn from(k: Kernel) -> KernelRepr {
        KernelRepr {
            dim: k.dim(),
            extents: k.extents.as_slice().to_vec(),
            c_in: k.c_in,
            c_out: k.c_out,
            data: k.coeffs,
            bias: k.bias,
        }
    }
}

impl TryFrom<KernelRepr> for Kernel {
    type Error = Error;

    fn try_from(r: KernelRepr) -> Result<Kernel> {
        if r.dim != r.extents.len() {
            return Err(Error::Shape(format!(
                "kernel dim field is {} but extents list has {} entries",
                r.dim,
                r.extents.len()
            )));
        }
        Kernel::new(MultiIndex::new(r.extents)?, r.c_out, r.c_in, r.data, r.bias)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coeff_layout_is_tap_major_then_out_then_in() {
        let k = Kernel::from_fn(
            MultiIndex::new(vec![1, 1]).unwrap(),
            2,
            3,
            vec![7.0, 8.0],
            |t, o, i| (t[0] * 1000 + t[1] * 100 + o * 10 + i) as f64,
        )
        .unwrap();
        // First tap (0,0): o=0 then o=1, input innermost.
        assert_eq!(&k.coeffs()[..6], &[0.0, 1.0, 2.0, 10.0, 11.0, 12.0]);
        assert_eq!(k.coeff(&[1, 0], 1, 2), 1012.0);
        assert_eq!(k.bias(), &[7.0, 8.0]);
    }

    #[test]
    fn json_fields_match_the_interchange_format() {
        let k = Kernel::new(
            MultiIndex::new(vec![1]).unwrap(),
            1,
            2,
            vec![1.0, 2.0, 3.0, 4.0],
            vec![0.5],
        )
        .unwrap();
        let v = serde_json::to_value(&k).unwrap();
        assert_eq!(v["dim"], 1);
        assert_eq!(v["extents"], serde_json::json!([1]));
        assert_eq!(v["c_in"], 2);
        assert_eq!(v["c_out"], 1);
        assert_eq!(v["data"], serde_json::json!([1.0, 2.0, 3.0, 4.0]));
        assert_eq!(v["bias"], serde_json::json!([0.5]));
        let back: Kernel = serde_json::from_value(v).unwrap();
        assert_eq!(back, k);
    }

    #[test]
    fn rejects_bad_shapes() {
        let r1 = MultiIndex::new(vec![1]).unwrap();
        assert!(Kernel::new(r1.clone(), 1, 1, vec![0.0], vec![0.0]).is_err());
        assert!(Kernel::new(r1.clone(), 1, 1, vec![0.0, 0.0], vec![]).is_err());
        assert!(Kernel::new(r1, 1, 1, vec![0.0, f64::INFINITY], vec![0.0]).is_err());
    }
}
