//! Dense order-n tensors, sampling masks and circular shifts.
//!
//! Storage is first-dimension-fastest: the entry at 1-based multi-index
//! `(i_1, …, i_n)` lives at 0-based offset `Σ_a (i_a − 1)·Π_{b<a} m_b`.
//! Every public API that takes or reports a multi-index uses 1-based
//! coordinates; slices returned by [`DenseTensor::data`] are plain 0-based.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dimensions `(m_1, …, m_n)` of a tensor.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Shape {
    dims: Vec<usize>,
}

impl Shape {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidShape("order must be at least 1".into()));
        }
        if let Some(j) = dims.iter().position(|&d| d == 0) {
            return Err(Error::InvalidShape(format!("dimension {} is zero", j + 1)));
        }
        let mut total: usize = 1;
        for &d in &dims {
            total = total
                .checked_mul(d)
                .ok_or_else(|| Error::InvalidShape(format!("{dims:?} overflows the element count")))?;
        }
        Ok(Self { dims })
    }

    pub fn vector(m: usize) -> Result<Self> {
        Self::new(vec![m])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    /// Total number of entries `m = Π m_j`.
    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    /// Always false; shapes have at least one entry.
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Column-major strides, `stride_a = Π_{b<a} m_b`.
    pub fn strides(&self) -> Vec<usize> {
        let mut s = Vec::with_capacity(self.dims.len());
        let mut acc = 1;
        for &d in &self.dims {
            s.push(acc);
            acc *= d;
        }
        s
    }

    /// 0-based storage offset of a 1-based multi-index.
    pub fn offset(&self, index: &[usize]) -> Result<usize> {
        if index.len() != self.dims.len() {
            return Err(Error::InvalidArgument(format!(
                "index {index:?} has {} coordinates, tensor has order {}",
                index.len(),
                self.dims.len()
            )));
        }
        let mut off = 0;
        let mut stride = 1;
        for (a, (&i, &d)) in index.iter().zip(&self.dims).enumerate() {
            if i == 0 || i > d {
                return Err(Error::InvalidArgument(format!(
                    "coordinate {} of index {index:?} outside 1..={d}",
                    a + 1
                )));
            }
            off += (i - 1) * stride;
            stride *= d;
        }
        Ok(off)
    }

    /// 1-based multi-index of a 0-based storage offset.
    pub fn multi_index(&self, mut offset: usize) -> Vec<usize> {
        self.dims
            .iter()
            .map(|&d| {
                let i = offset % d;
                offset /= d;
                i + 1
            })
            .collect()
    }
}

impl TryFrom<Vec<usize>> for Shape {
    type Error = Error;
    fn try_from(dims: Vec<usize>) -> Result<Self> {
        Self::new(dims)
    }
}

impl From<Shape> for Vec<usize> {
    fn from(s: Shape) -> Self {
        s.dims
    }
}

/// Real order-n tensor with `f64` entries.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseTensor {
    shape: Shape,
    data: Vec<f64>,
}

impl DenseTensor {
    pub fn new(shape: Shape, data: Vec<f64>) -> Result<Self> {
        if data.len() != shape.len() {
            return Err(Error::InvalidShape(format!(
                "{} values supplied for shape {:?} ({} entries)",
                data.len(),
                shape.dims(),
                shape.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Shape) -> Self {
        let data = vec![0.0; shape.len()];
        Self { shape, data }
    }

    pub fn filled(shape: Shape, value: f64) -> Self {
        let data = vec![value; shape.len()];
        Self { shape, data }
    }

    /// Order-1 tensor holding `data`.
    pub fn from_vec(data: Vec<f64>) -> Result<Self> {
        let shape = Shape::vector(data.len())?;
        Ok(Self { shape, data })
    }

    /// Builds a tensor by evaluating `f` at each 1-based multi-index.
    pub fn from_fn(shape: Shape, mut f: impl FnMut(&[usize]) -> f64) -> Self {
        let data = (0..shape.len()).map(|o| f(&shape.multi_index(o))).collect();
        Self { shape, data }
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn dims(&self) -> &[usize] {
        self.shape.dims()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Entry at a 1-based multi-index.
    pub fn get(&self, index: &[usize]) -> Result<f64> {
        Ok(self.data[self.shape.offset(index)?])
    }

    pub fn set(&mut self, index: &[usize], value: f64) -> Result<()> {
        let o = self.shape.offset(index)?;
        self.data[o] = value;
        Ok(())
    }

    pub fn reshape(self, shape: Shape) -> Result<Self> {
        Self::new(shape, self.data)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn inner(&self, other: &Self) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|v| v * s)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { shape: self.shape.clone(), data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.check_same_shape(other)?;
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Ok(Self { shape: self.shape.clone(), data })
    }

    pub fn check_finite(&self) -> Result<()> {
        match self.data.iter().position(|v| !v.is_finite()) {
            Some(p) => Err(Error::NonFinite(p + 1)),
            None => Ok(()),
        }
    }

    pub(crate) fn check_same_shape(&self, other: &Self) -> Result<()> {
        check_shapes(&self.shape, &other.shape)
    }

    /// Circular shift by `u` positions along 1-based dimension `v`.
    pub fn circshift(&self, u: i64, v: usize) -> Result<Self> {
        let order = self.shape.order();
        if v == 0 || v > order {
            return Err(Error::DimensionOutOfRange { index: v, order });
        }
        let mut shifts = vec![0usize; order];
        shifts[v - 1] = u.rem_euclid(self.shape.dims()[v - 1] as i64) as usize;
        let mut out = vec![0.0; self.data.len()];
        shift_into(&self.data, self.shape.dims(), &shifts, &mut out, false);
        Ok(Self { shape: self.shape.clone(), data: out })
    }

    /// Slice `[.., .., t]` along the last axis, `t` 1-based.
    pub fn last_axis_slice(&self, t: usize) -> Result<Self> {
        let dims = self.shape.dims();
        let n = dims.len();
        let mt = dims[n - 1];
        if t == 0 || t > mt {
            return Err(Error::InvalidArgument(format!("slice {t} outside 1..={mt}")));
        }
        let inner = self.data.len() / mt;
        let shape = if n == 1 { Shape::vector(1)? } else { Shape::new(dims[..n - 1].to_vec())? };
        Ok(Self { shape, data: self.data[(t - 1) * inner..t * inner].to_vec() })
    }
}

pub(crate) fn check_shapes(a: &Shape, b: &Shape) -> Result<()> {
    if a != b {
        return Err(Error::ShapeMismatch { expected: a.dims().to_vec(), got: b.dims().to_vec() });
    }
    Ok(())
}

/// Writes (or adds, if `accumulate`) `src` circularly shifted by `shifts` into `dst`:
/// `dst[i] = src[i − s]` coordinate-wise modulo each dimension. Shifts must be
/// reduced into `0..m_a`.
pub(crate) fn shift_into(src: &[f64], dims: &[usize], shifts: &[usize], dst: &mut [f64], accumulate: bool) {
    debug_assert_eq!(src.len(), dst.len());
    let m1 = dims[0];
    let s1 = shifts[0];
    let lines = src.len() / m1;
    let mut outer = vec![0usize; dims.len()];
    for line in 0..lines {
        // source line offset for this destination line
        let mut src_off = 0;
        let mut stride = m1;
        for a in 1..dims.len() {
            let d = dims[a];
            let si = (outer[a] + d - shifts[a]) % d;
            src_off += si * stride;
            stride *= d;
        }
        let dst_off = line * m1;
        let src_line = &src[src_off..src_off + m1];
        let dst_line = &mut dst[dst_off..dst_off + m1];
        if accumulate {
            for (d, s) in dst_line[s1..].iter_mut().zip(&src_line[..m1 - s1]) {
                *d += s;
            }
            for (d, s) in dst_line[..s1].iter_mut().zip(&src_line[m1 - s1..]) {
                *d += s;
            }
        } else {
            dst_line[s1..].copy_from_slice(&src_line[..m1 - s1]);
            dst_line[..s1].copy_from_slice(&src_line[m1 - s1..]);
        }
        for a in 1..dims.len() {
            outer[a] += 1;
            if outer[a] < dims[a] {
                break;
            }
            outer[a] = 0;
        }
    }
}

/// The sampling set Ω, held as its {0,1} mask tensor Θ_Ω.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplingMask {
    indicator: DenseTensor,
    count: usize,
}

impl SamplingMask {
    /// Validates that every entry is exactly 0.0 or 1.0.
    pub fn from_indicator(indicator: DenseTensor) -> Result<Self> {
        let mut count = 0;
        for (o, &v) in indicator.data().iter().enumerate() {
            if v == 1.0 {
                count += 1;
            } else if v != 0.0 {
                return Err(Error::Format {
                    context: "mask".into(),
                    reason: format!(
                        "value {v} at index {:?} is not 0 or 1",
                        indicator.shape().multi_index(o)
                    ),
                });
            }
        }
        Ok(Self { indicator, count })
    }

    pub fn from_bools(shape: Shape, observed: &[bool]) -> Result<Self> {
        if observed.len() != shape.len() {
            return Err(Error::InvalidShape(format!(
                "{} flags supplied for {} entries",
                observed.len(),
                shape.len()
            )));
        }
        let data = observed.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        let count = observed.iter().filter(|&&b| b).count();
        Ok(Self { indicator: DenseTensor { shape, data }, count })
    }

    /// Mask observing the given 0-based storage offsets.
    pub fn from_offsets(shape: Shape, offsets: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut flags = vec![false; shape.len()];
        for o in offsets {
            if o >= flags.len() {
                return Err(Error::InvalidArgument(format!("offset {o} outside tensor of {} entries", flags.len())));
            }
            flags[o] = true;
        }
        Self::from_bools(shape, &flags)
    }

    pub fn from_fn(shape: Shape, mut f: impl FnMut(&[usize]) -> bool) -> Self {
        let flags: Vec<bool> = (0..shape.len()).map(|o| f(&shape.multi_index(o))).collect();
        Self::from_bools(shape, &flags).expect("flags sized from shape")
    }

    pub fn full(shape: Shape) -> Self {
        let count = shape.len();
        Self { indicator: DenseTensor::filled(shape, 1.0), count }
    }

    pub fn empty(shape: Shape) -> Self {
        Self { indicator: DenseTensor::zeros(shape), count: 0 }
    }

    pub fn shape(&self) -> &Shape {
        self.indicator.shape()
    }

    pub fn indicator(&self) -> &DenseTensor {
        &self.indicator
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Observed fraction ρ_0 = card(Ω)/m.
    pub fn rho0(&self) -> f64 {
        self.count as f64 / self.indicator.len() as f64
    }

    pub fn is_observed(&self, offset: usize) -> bool {
        self.indicator.data()[offset] == 1.0
    }

    /// 0-based offsets of observed entries, ascending.
    pub fn observed_offsets(&self) -> impl Iterator<Item = usize> + '_ {
        self.indicator.data().iter().enumerate().filter(|(_, &v)| v == 1.0).map(|(o, _)| o)
    }

    pub fn complement(&self) -> Self {
        let data = self.indicator.data().iter().map(|&v| 1.0 - v).collect();
        Self {
            indicator: DenseTensor { shape: self.shape().clone(), data },
            count: self.indicator.len() - self.count,
        }
    }

    pub fn intersect(&self, other: &Self) -> Result<Self> {
        let ind = self.indicator.zip_with(&other.indicator, |a, b| a * b)?;
        Self::from_indicator(ind)
    }

    /// P_Ω(X) = Θ_Ω ∘ X.
    pub fn project(&self, x: &DenseTensor) -> Result<DenseTensor> {
        self.indicator.zip_with(x, |t, v| if t == 1.0 { v } else { 0.0 })
    }
}

/// Circular shift of `x` by `u` positions along 1-based dimension `v`.
pub fn circshift(x: &DenseTensor, u: i64, v: usize) -> Result<DenseTensor> {
    x.circshift(u, v)
}

/// Vectorization in first-dimension-fastest order.
pub fn vec(x: &DenseTensor) -> Vec<f64> {
    x.data().to_vec()
}

/// Inverse of [`vec`].
pub fn unvec(data: Vec<f64>, shape: Shape) -> Result<DenseTensor> {
    DenseTensor::new(shape, data)
}

/// P_Ω(X).
pub fn project_omega(x: &DenseTensor, omega: &SamplingMask) -> Result<DenseTensor> {
    omega.project(x)
}
