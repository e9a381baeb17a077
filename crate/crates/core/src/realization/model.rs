use nalgebra::{DMatrix, DVector};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{json, Map, Value};

use crate::tensor::MultiIndex;
use crate::{Error, Result};

/// State-space form of a d-directional linear system:
///
/// ```text
/// x_k[i + e_k] = f_k + sum_l A_kl x_l[i] + B_k u[i]      k = 1..d
/// y[i]         = g   + sum_k C_k x_k[i]  + D u[i]
/// ```
///
/// with every state zero on the boundary faces `{i_k = 0}`. Directions are
/// 0-indexed in the API; the JSON form uses the customary 1-based block
/// names (`"A_12"`, `"B_1"`, ...).
#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    state_dims: Vec<usize>,
    input_dim: usize,
    output_dim: usize,
    a: Vec<Vec<DMatrix<f64>>>,
    b: Vec<DMatrix<f64>>,
    c: Vec<DMatrix<f64>>,
    d: DMatrix<f64>,
    f: Vec<DVector<f64>>,
    g: DVector<f64>,
}

impl Realization {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        state_dims: Vec<usize>,
        input_dim: usize,
        output_dim: usize,
        a: Vec<Vec<DMatrix<f64>>>,
        b: Vec<DMatrix<f64>>,
        c: Vec<DMatrix<f64>>,
        d: DMatrix<f64>,
        f: Vec<DVector<f64>>,
        g: DVector<f64>,
    ) -> Result<Self> {
        let dims = state_dims.len();
        if dims == 0 {
            return Err(Error::Shape("a realization needs at least one direction".into()));
        }
        if input_dim == 0 || output_dim == 0 {
            return Err(Error::Shape("input and output dimensions must be positive".into()));
        }
        let expect = |name: String, rows: usize, cols: usize, m: &DMatrix<f64>| {
            if m.nrows() != rows || m.ncols() != cols {
                return Err(Error::DimMismatch(format!(
                    "{name} must be {rows}x{cols}, got {}x{}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(name));
            }
            Ok(())
        };
        if a.len() != dims || b.len() != dims || c.len() != dims || f.len() != dims {
            return Err(Error::DimMismatch(format!(
                "expected {dims} block rows in each of A, B, C, f"
            )));
        }
        for (k, row) in a.iter().enumerate() {
            if row.len() != dims {
                return Err(Error::DimMismatch(format!(
                    "A block row {} must have {dims} blocks",
                    k + 1
                )));
            }
            for (l, blk) in row.iter().enumerate() {
                expect(format!("A_{}{}", k + 1, l + 1), state_dims[k], state_dims[l], blk)?;
            }
        }
        for (k, blk) in b.iter().enumerate() {
            expect(format!("B_{}", k + 1), state_dims[k], input_dim, blk)?;
        }
        for (k, blk) in c.iter().enumerate() {
            expect(format!("C_{}", k + 1), output_dim, state_dims[k], blk)?;
        }
        expect("D".into(), output_dim, input_dim, &d)?;
        for (k, v) in f.iter().enumerate() {
            if v.len() != state_dims[k] {
                return Err(Error::DimMismatch(format!(
                    "f_{} must have length {}, got {}",
                    k + 1,
                    state_dims[k],
                    v.len()
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite(format!("f_{}", k + 1)));
            }
        }
        if g.len() != output_dim {
            return Err(Error::DimMismatch(format!(
                "g must have length {output_dim}, got {}",
                g.len()
            )));
        }
        if g.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("g".into()));
        }
        Ok(Self { state_dims, input_dim, output_dim, a, b, c, d, f, g })
    }

    /// Number of directions d.
    pub fn dim(&self) -> usize {
        self.state_dims.len()
    }

    pub fn state_dims(&self) -> &[usize] {
        &self.state_dims
    }

    pub fn total_state_dim(&self) -> usize {
        self.state_dims.iter().sum()
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    /// Block `A_kl` (0-indexed directions).
    pub fn a(&self, k: usize, l: usize) -> &DMatrix<f64> {
        &self.a[k][l]
    }

    pub fn b(&self, k: usize) -> &DMatrix<f64> {
        &self.b[k]
    }

    pub fn c(&self, k: usize) -> &DMatrix<f64> {
        &self.c[k]
    }

    pub fn d(&self) -> &DMatrix<f64> {
        &self.d
    }

    pub fn f(&self, k: usize) -> &DVector<f64> {
        &self.f[k]
    }

    pub fn g(&self) -> &DVector<f64> {
        &self.g
    }

    /// All `A_kl` blocks assembled into one square matrix over the stacked
    /// state, in direction order.
    pub fn lumped_a(&self) -> DMatrix<f64> {
        let n = self.total_state_dim();
        let mut m = DMatrix::zeros(n, n);
        let offsets = self.state_offsets();
        for k in 0..self.dim() {
            for l in 0..self.dim() {
                m.view_mut((offsets[k], offsets[l]), (self.state_dims[k], self.state_dims[l]))
                    .copy_from(&self.a[k][l]);
            }
        }
        m
    }

    /// The `B_k` blocks stacked vertically.
    pub fn lumped_b(&self) -> DMatrix<f64> {
        let n = self.total_state_dim();
        let mut m = DMatrix::zeros(n, self.input_dim);
        let offsets = self.state_offsets();
        for k in 0..self.dim() {
            m.view_mut((offsets[k], 0), (self.state_dims[k], self.input_dim))
                .copy_from(&self.b[k]);
        }
        m
    }

    /// The `C_k` blocks concatenated horizontally.
    pub fn lumped_c(&self) -> DMatrix<f64> {
        let n = self.total_state_dim();
        let mut m = DMatrix::zeros(self.output_dim, n);
        let offsets = self.state_offsets();
        for k in 0..self.dim() {
            m.view_mut((0, offsets[k]), (self.output_dim, self.state_dims[k]))
                .copy_from(&self.c[k]);
        }
        m
    }

    fn state_offsets(&self) -> Vec<usize> {
        let mut off = Vec::with_capacity(self.dim());
        let mut acc = 0;
        for &n in &self.state_dims {
            off.push(acc);
            acc += n;
        }
        off
    }

    /// Copy with the affine offsets `f_k` and `g` zeroed; the linear part
    /// is untouched. Used to read off impulse responses.
    pub fn without_offsets(&self) -> Self {
        let mut out = self.clone();
        for v in &mut out.f {
            v.fill(0.0);
        }
        out.g.fill(0.0);
        out
    }

    pub fn to_value(&self) -> Value {
        let d = self.dim();
        let mut map = Map::new();
        map.insert("dim".into(), json!(d));
        map.insert("state_dims".into(), json!(self.state_dims));
        map.insert("input_dim".into(), json!(self.input_dim));
        map.insert("output_dim".into(), json!(self.output_dim));
        for k in 0..d {
            for l in 0..d {
                map.insert(format!("A_{}{}", k + 1, l + 1), mat_to_value(&self.a[k][l]));
            }
            map.insert(format!("B_{}", k + 1), mat_to_value(&self.b[k]));
            map.insert(format!("C_{}", k + 1), mat_to_value(&self.c[k]));
            map.insert(format!("f_{}", k + 1), vec_to_value(&self.f[k]));
        }
        map.insert("D".into(), mat_to_value(&self.d));
        map.insert("g".into(), vec_to_value(&self.g));
        Value::Object(map)
    }

    pub fn from_value(v: &Value) -> Result<Self> {
        let obj = v.as_object().ok_or_else(|| bad("realization must be a JSON object"))?;
        let d = usize_field(obj, "dim")?;
        if d == 0 {
            return Err(bad("dim must be at least 1"));
        }
        let state_dims: Vec<usize> = obj
            .get("state_dims")
            .and_then(|v| v.as_array())
            .ok_or_else(|| bad("missing state_dims array"))?
            .iter()
            .map(|x| x.as_u64().map(|n| n as usize).ok_or_else(|| bad("state_dims entries")))
            .collect::<Result<_>>()?;
        if state_dims.len() != d {
            return Err(bad("state_dims length must equal dim"));
        }
        let input_dim = usize_field(obj, "input_dim")?;
        let output_dim = usize_field(obj, "output_dim")?;
        let mut a = Vec::with_capacity(d);
        let mut b = Vec::with_capacity(d);
        let mut c = Vec::with_capacity(d);
        let mut f = Vec::with_capacity(d);
        for k in 0..d {
            let mut row = Vec::with_capacity(d);
            for l in 0..d {
                row.push(mat_from_value(obj, &format!("A_{}{}", k + 1, l + 1))?);
            }
            a.push(row);
            b.push(mat_from_value(obj, &format!("B_{}", k + 1))?);
            c.push(mat_from_value(obj, &format!("C_{}", k + 1))?);
            f.push(vec_from_value(obj, &format!("f_{}", k + 1))?);
        }
        let dmat = mat_from_value(obj, "D")?;
        let g = vec_from_value(obj, "g")?;
        Self::new(state_dims, input_dim, output_dim, a, b, c, dmat, f, g)
    }
}

/// A strided layer factored into an input reshape and a plain realization:
/// the grid is coarsened by `stride`, each stride-box patch is lumped into
/// the channel dimension in `patch_order`, and `inner` runs on the result.
#[derive(Debug, Clone, PartialEq)]
pub struct StridedRealization {
    stride: MultiIndex,
    patch_order: Vec<MultiIndex>,
    inner: Realization,
}

impl StridedRealization {
    pub fn new(stride: MultiIndex, patch_order: Vec<MultiIndex>, inner: Realization) -> Result<Self> {
        if stride.dim() != inner.dim() {
            return Err(Error::DimMismatch(format!(
                "stride {} does not match realization dimension {}",
                stride,
                inner.dim()
            )));
        }
        if patch_order.len() != stride.product() {
            return Err(Error::Shape(format!(
                "patch order lists {} offsets, stride box holds {}",
                patch_order.len(),
                stride.product()
            )));
        }
        let mut seen = std::collections::HashSet::new();
        for off in &patch_order {
            if off.dim() != stride.dim()
                || !off.as_slice().iter().zip(stride.as_slice()).all(|(&o, &s)| o < s)
            {
                return Err(Error::Shape(format!("patch offset {off} outside stride box")));
            }
            if !seen.insert(off.clone()) {
                return Err(Error::Shape(format!("duplicate patch offset {off}")));
            }
        }
        if !inner.input_dim().is_multiple_of(patch_order.len()) {
            return Err(Error::DimMismatch(format!(
                "inner input dimension {} is not a multiple of the {} patch offsets",
                inner.input_dim(),
                patch_order.len()
            )));
        }
        Ok(Self { stride, patch_order, inner })
    }

    pub fn stride(&self) -> &MultiIndex {
        &self.stride
    }

    pub fn patch_order(&self) -> &[MultiIndex] {
        &self.patch_order
    }

    pub fn inner(&self) -> &Realization {
        &self.inner
    }

    /// Original (pre-reshape) channel count.
    pub fn channels_in(&self) -> usize {
        self.inner.input_dim() / self.patch_order.len()
    }

    pub fn to_value(&self) -> Value {
        json!({
            "stride": self.stride,
            "patch_order": self.patch_order,
            "inner": self.inner.to_value(),
        })
    }

    pub fn from_value(v: &Value) -> Result<Self> {
        let obj = v.as_object().ok_or_else(|| bad("strided realization must be a JSON object"))?;
        let stride: MultiIndex = parse_field(obj, "stride")?;
        let patch_order: Vec<MultiIndex> = parse_field(obj, "patch_order")?;
        let inner = Realization::from_value(obj.get("inner").ok_or_else(|| bad("missing inner"))?)?;
        Self::new(stride, patch_order, inner)
    }
}

/// Either flavor of realized layer, as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub enum LayerRealization {
    Plain(Realization),
    Strided(StridedRealization),
}

impl LayerRealization {
    pub fn dim(&self) -> usize {
        match self {
            Self::Plain(r) => r.dim(),
            Self::Strided(s) => s.inner().dim(),
        }
    }

    pub fn state_dims(&self) -> &[usize] {
        match self {
            Self::Plain(r) => r.state_dims(),
            Self::Strided(s) => s.inner().state_dims(),
        }
    }

    pub fn to_value(&self) -> Value {
        match self {
            Self::Plain(r) => r.to_value(),
            Self::Strided(s) => s.to_value(),
        }
    }

    pub fn from_value(v: &Value) -> Result<Self> {
        let is_strided = v.as_object().is_some_and(|o| o.contains_key("inner"));
        if is_strided {
            StridedRealization::from_value(v).map(Self::Strided)
        } else {
            Realization::from_value(v).map(Self::Plain)
        }
    }
}

fn bad(msg: &str) -> Error {
    Error::Shape(msg.into())
}

fn usize_field(obj: &Map<String, Value>, key: &str) -> Result<usize> {
    obj.get(key)
        .and_then(|v| v.as_u64())
        .map(|n| n as usize)
        .ok_or_else(|| bad(&format!("missing or non-integer field {key}")))
}

fn parse_field<T: serde::de::DeserializeOwned>(obj: &Map<String, Value>, key: &str) -> Result<T> {
    let v = obj.get(key).ok_or_else(|| bad(&format!("missing field {key}")))?;
    serde_json::from_value(v.clone()).map_err(|e| bad(&format!("field {key}: {e}")))
}

fn mat_to_value(m: &DMatrix<f64>) -> Value {
    let mut data = Vec::with_capacity(m.nrows() * m.ncols());
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            data.push(m[(r, c)]);
        }
    }
    json!({"rows": m.nrows(), "cols": m.ncols(), "data": data})
}

fn vec_to_value(v: &DVector<f64>) -> Value {
    json!({"rows": v.len(), "cols": 1usize, "data": v.as_slice()})
}

fn mat_from_value(obj: &Map<String, Value>, key: &str) -> Result<DMatrix<f64>> {
    let blk = obj
        .get(key)
        .and_then(|v| v.as_object())
        .ok_or_else(|| bad(&format!("missing block {key}")))?;
    let rows = usize_field(blk, "rows")?;
    let cols = usize_field(blk, "cols")?;
    let data: Vec<f64> = blk
        .get("data")
        .and_then(|v| v.as_array())
        .ok_or_else(|| bad(&format!("block {key} has no data array")))?
        .iter()
        .map(|x| x.as_f64().ok_or_else(|| bad(&format!("block {key}: non-numeric entry"))))
        .collect::<Result<_>>()?;
    if data.len() != rows * cols {
        return Err(bad(&format!(
            "block {key} declares {rows}x{cols} but carries {} entries",
            data.len()
        )));
    }
    Ok(DMatrix::from_row_slice(rows, cols, &data))
}

fn vec_from_value(obj: &Map<String, Value>, key: &str) -> Result<DVector<f64>> {
    let m = mat_from_value(obj, key)?;
    if m.ncols() != 1 && m.nrows() != 0 {
        return Err(bad(&format!("block {key} must be a column vector")));
    }
    Ok(DVector::from_column_slice(m.as_slice()))
}

impl Serialize for Realization {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_value().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Realization {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let v = Value::deserialize(deserializer)?;
        Self::from_value(&v).map_err(D::Error::custom)
    }
}

impl Serialize for StridedRealization {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_value().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for StridedRealization {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let v = Value::deserialize(deserializer)?;
        Self::from_value(&v).map_err(D::Error::custom)
    }
}

impl Serialize for LayerRealization {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_value().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for LayerRealization {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let v = Value::deserialize(deserializer)?;
        Self::from_value(&v).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> Realization {
        // d = 2, n = (1, 2), one input, one output.
        Realization::new(
            vec![1, 2],
            1,
            1,
            vec![
                vec![DMatrix::zeros(1, 1), DMatrix::from_row_slice(1, 2, &[2.0, 3.0])],
                vec![DMatrix::zeros(2, 1), DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0])],
            ],
            vec![DMatrix::from_row_slice(1, 1, &[4.0]), DMatrix::from_row_slice(2, 1, &[0.0, 1.0])],
            vec![DMatrix::from_row_slice(1, 1, &[1.0]), DMatrix::from_row_slice(1, 2, &[5.0, 6.0])],
            DMatrix::from_row_slice(1, 1, &[7.0]),
            vec![DVector::zeros(1), DVector::zeros(2)],
            DVector::from_column_slice(&[0.5]),
        )
        .unwrap()
    }

    #[test]
    fn rejects_misshapen_blocks() {
        let r = Realization::new(
            vec![1, 2],
            1,
            1,
            vec![
                vec![DMatrix::zeros(1, 1), DMatrix::zeros(1, 1)], // A_12 should be 1x2
                vec![DMatrix::zeros(2, 1), DMatrix::zeros(2, 2)],
            ],
            vec![DMatrix::zeros(1, 1), DMatrix::zeros(2, 1)],
            vec![DMatrix::zeros(1, 1), DMatrix::zeros(1, 2)],
            DMatrix::zeros(1, 1),
            vec![DVector::zeros(1), DVector::zeros(2)],
            DVector::zeros(1),
        );
        assert!(matches!(r, Err(Error::DimMismatch(_))));
    }

    #[test]
    fn json_block_names_and_shape_headers() {
        let v = toy().to_value();
        let obj = v.as_object().unwrap();
        for key in ["dim", "state_dims", "input_dim", "output_dim", "A_11", "A_12", "A_21", "A_22", "B_1", "B_2", "C_1", "C_2", "D", "f_1", "f_2", "g"] {
            assert!(obj.contains_key(key), "missing {key}");
        }
        assert_eq!(v["A_12"]["rows"], 1);
        assert_eq!(v["A_12"]["cols"], 2);
        assert_eq!(v["A_12"]["data"], json!([2.0, 3.0]));
        assert_eq!(v["g"]["data"], json!([0.5]));
    }

    #[test]
    fn json_round_trip_is_identity() {
        let r = toy();
        let text = serde_json::to_string(&r).unwrap();
        let back: Realization = serde_json::from_str(&text).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn row_major_data_order() {
        let v = mat_to_value(&DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]));
        assert_eq!(v["data"], json!([1.0, 2.0, 3.0, 4.0]));
    }

    #[test]
    fn from_value_rejects_inconsistent_payload() {
        let mut v = toy().to_value();
        v["B_1"]["data"] = json!([1.0, 2.0]);
        assert!(Realization::from_value(&v).is_err());
        let mut v2 = toy().to_value();
        v2.as_object_mut().unwrap().remove("C_2");
        assert!(Realization::from_value(&v2).is_err());
    }

    #[test]
    fn layer_realization_dispatches_on_inner_key() {
        let plain = toy();
        let v = plain.to_value();
        assert!(matches!(LayerRealization::from_value(&v).unwrap(), LayerRealization::Plain(_)));

        let stride = MultiIndex::new(vec![1, 1]).unwrap();
        let order = vec![MultiIndex::new(vec![0, 0]).unwrap()];
        let s = StridedRealization::new(stride, order, plain).unwrap();
        let sv = s.to_value();
        assert!(matches!(
            LayerRealization::from_value(&sv).unwrap(),
            LayerRealization::Strided(_)
        ));
        let back = StridedRealization::from_value(&sv).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn strided_wrapper_validates_offsets() {
        let plain = toy();
        let s2 = MultiIndex::new(vec![2, 1]).unwrap();
        // Wrong count.
        assert!(StridedRealization::new(
            s2.clone(),
            vec![MultiIndex::new(vec![0, 0]).unwrap()],
            plain.clone()
        )
        .is_err());
        // Offset outside the box.
        assert!(StridedRealization::new(
            s2,
            vec![MultiIndex::new(vec![0, 0]).unwrap(), MultiIndex::new(vec![0, 1]).unwrap()],
            plain
        )
        .is_err());
    }
}
