//! The convolution matrix `A_k(X)` and everything derived from it.
//!
//! Column `j` of `A_k(X)` is `vec(X)` circularly shifted by `(i_1−1, …, i_n−1)`
//! along each dimension, where `(i_1, …, i_n)` is the kernel multi-index of `j`
//! in first-dimension-fastest order. With that layout `vec(X ⋆ K) = A_k(X)·vec(K)`
//! and `vec(K)` uses the same ordering as [`DenseTensor`].
//!
//! Solvers use [`conv_matrix_into`] and [`adjoint_into`] directly; the
//! operator matrix of the linear map `X ↦ A_k(X)` is never formed.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::sym_eig_desc;
use crate::spectral::FftNd;
use crate::tensor::{shift_into, DenseTensor, SamplingMask, Shape};

/// Default cap on entries of an explicitly materialized `A_k(X)`.
pub const DEFAULT_MATERIALIZE_CAP: usize = 1 << 26;

/// Default relative threshold for counting convolution rank.
pub const DEFAULT_RANK_TOL: f64 = 1e-9;

/// Kernel size `k_1 × … × k_n`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct KernelShape {
    kdims: Vec<usize>,
}

impl KernelShape {
    /// Validates `1 <= k_j <= m_j` against the data shape.
    pub fn new(kdims: Vec<usize>, shape: &Shape) -> Result<Self> {
        let k = Self { kdims };
        k.validate_for(shape)?;
        Ok(k)
    }

    /// `k = m`: the kernel covers the whole tensor.
    pub fn full(shape: &Shape) -> Self {
        Self { kdims: shape.dims().to_vec() }
    }

    pub fn validate_for(&self, shape: &Shape) -> Result<()> {
        let ok = self.kdims.len() == shape.order()
            && self.kdims.iter().zip(shape.dims()).all(|(&k, &m)| k >= 1 && k <= m);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidKernel { kernel: self.kdims.clone(), shape: shape.dims().to_vec() })
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.kdims
    }

    /// `k = Π k_j`.
    pub fn len(&self) -> usize {
        self.kdims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Shape of a kernel tensor.
    pub fn shape(&self) -> Shape {
        Shape::new(self.kdims.clone()).expect("validated kernel dims are positive")
    }

    /// 0-based shift vector for each column, in column order.
    pub fn column_shifts(&self) -> Vec<Vec<usize>> {
        let s = self.shape();
        (0..s.len()).map(|j| s.multi_index(j).into_iter().map(|i| i - 1).collect()).collect()
    }

    /// 1-based column index `j` for a 1-based kernel multi-index.
    pub fn column_of(&self, index: &[usize]) -> Result<usize> {
        Ok(self.shape().offset(index)? + 1)
    }
}

/// `A_k(X)` as an implicit operator bound to a base tensor.
#[derive(Clone, Debug)]
pub struct ConvOperator {
    base: DenseTensor,
    kernel: KernelShape,
}

impl ConvOperator {
    pub fn new(base: DenseTensor, kernel: KernelShape) -> Result<Self> {
        kernel.validate_for(base.shape())?;
        Ok(Self { base, kernel })
    }

    pub fn base(&self) -> &DenseTensor {
        &self.base
    }

    pub fn kernel(&self) -> &KernelShape {
        &self.kernel
    }

    pub fn rows(&self) -> usize {
        self.base.len()
    }

    pub fn cols(&self) -> usize {
        self.kernel.len()
    }

    /// `A_k(X)·vec(K)`.
    pub fn apply(&self, k: &DenseTensor) -> Result<DenseTensor> {
        conv_apply(&self.base, k)
    }

    pub fn materialize(&self) -> Result<DMatrix<f64>> {
        materialize(&self.base, &self.kernel)
    }

    pub fn spectrum(&self, rank_tol: f64) -> Result<ConvSpectrum> {
        conv_spectrum(&self.base, &self.kernel, rank_tol)
    }
}

/// Circular convolution `X ⋆ K`, `[X⋆K]_i = Σ_s [X]_{i−s}[K]_s` with `s` counted from 0.
pub fn conv_apply(x: &DenseTensor, k: &DenseTensor) -> Result<DenseTensor> {
    let kernel = KernelShape { kdims: k.dims().to_vec() };
    kernel.validate_for(x.shape())?;
    let mut out = vec![0.0; x.len()];
    let mut buf = vec![0.0; x.len()];
    for (shift, &w) in kernel.column_shifts().iter().zip(k.data()) {
        if w == 0.0 {
            continue;
        }
        shift_into(x.data(), x.dims(), shift, &mut buf, false);
        for (o, b) in out.iter_mut().zip(&buf) {
            *o += w * b;
        }
    }
    DenseTensor::new(x.shape().clone(), out)
}

fn check_cap(rows: usize, cols: usize, cap: usize) -> Result<()> {
    let entries = rows.checked_mul(cols).unwrap_or(usize::MAX);
    if entries > cap {
        return Err(Error::TooLarge { rows, cols, entries, cap });
    }
    Ok(())
}

/// Explicit `m × k` convolution matrix, refused above [`DEFAULT_MATERIALIZE_CAP`] entries.
pub fn materialize(x: &DenseTensor, kernel: &KernelShape) -> Result<DMatrix<f64>> {
    materialize_with_cap(x, kernel, DEFAULT_MATERIALIZE_CAP)
}

pub fn materialize_with_cap(x: &DenseTensor, kernel: &KernelShape, cap: usize) -> Result<DMatrix<f64>> {
    kernel.validate_for(x.shape())?;
    check_cap(x.len(), kernel.len(), cap)?;
    let mut out = DMatrix::zeros(x.len(), kernel.len());
    conv_matrix_into(x, kernel, &mut out);
    Ok(out)
}

/// Fills `out` (m × k) with `A_k(X)`. The caller guarantees sizes and kernel validity.
pub fn conv_matrix_into(x: &DenseTensor, kernel: &KernelShape, out: &mut DMatrix<f64>) {
    let m = x.len();
    assert_eq!((out.nrows(), out.ncols()), (m, kernel.len()), "output must be m x k");
    let shifts = kernel.column_shifts();
    let dims = x.dims();
    let cols = out.as_mut_slice().chunks_mut(m);
    if m * shifts.len() >= PAR_THRESHOLD {
        use rayon::prelude::*;
        out.as_mut_slice()
            .par_chunks_mut(m)
            .zip(shifts.par_iter())
            .for_each(|(col, s)| shift_into(x.data(), dims, s, col, false));
    } else {
        for (col, s) in cols.zip(&shifts) {
            shift_into(x.data(), dims, s, col, false);
        }
    }
}

const PAR_THRESHOLD: usize = 1 << 16;

/// `A_k^*(Z) = Σ_j T_j^{-1}(Z_{:,j})`.
pub fn conv_adjoint(z: &DMatrix<f64>, shape: &Shape, kernel: &KernelShape) -> Result<DenseTensor> {
    kernel.validate_for(shape)?;
    if z.nrows() != shape.len() || z.ncols() != kernel.len() {
        return Err(Error::ShapeMismatch {
            expected: vec![shape.len(), kernel.len()],
            got: vec![z.nrows(), z.ncols()],
        });
    }
    let mut out = DenseTensor::zeros(shape.clone());
    adjoint_into(z, kernel, &mut out);
    Ok(out)
}

/// Overwrites `out` with `A_k^*(Z)`. Sizes are the caller's responsibility.
pub fn adjoint_into(z: &DMatrix<f64>, kernel: &KernelShape, out: &mut DenseTensor) {
    let m = out.len();
    let dims = out.dims().to_vec();
    let inverse: Vec<Vec<usize>> = kernel
        .column_shifts()
        .into_iter()
        .map(|s| s.iter().zip(&dims).map(|(&si, &d)| (d - si) % d).collect())
        .collect();
    let cols: Vec<&[f64]> = z.as_slice().chunks(m).collect();
    let acc = out.data_mut();
    acc.iter_mut().for_each(|v| *v = 0.0);
    if m * inverse.len() >= PAR_THRESHOLD && inverse.len() > 1 {
        use rayon::prelude::*;
        // fixed chunking keeps the summation order independent of scheduling
        let chunk = inverse.len().div_ceil(rayon::current_num_threads().max(1)).max(1);
        let partials: Vec<Vec<f64>> = inverse
            .par_chunks(chunk)
            .zip(cols.par_chunks(chunk))
            .map(|(shifts, cs)| {
                let mut part = vec![0.0; m];
                for (s, c) in shifts.iter().zip(cs) {
                    shift_into(c, &dims, s, &mut part, true);
                }
                part
            })
            .collect();
        for p in partials {
            for (a, v) in acc.iter_mut().zip(p) {
                *a += v;
            }
        }
    } else {
        for (s, c) in inverse.iter().zip(&cols) {
            shift_into(c, &dims, s, acc, true);
        }
    }
}

/// Convolution sampling set Ω_A as an `m × k` mask: Θ_{Ω_A} = A_k(Θ_Ω).
pub fn conv_sampling_set(omega: &SamplingMask, kernel: &KernelShape) -> Result<SamplingMask> {
    let mat = materialize(omega.indicator(), kernel)?;
    let shape = Shape::new(vec![mat.nrows(), mat.ncols()])?;
    SamplingMask::from_indicator(DenseTensor::new(shape, mat.as_slice().to_vec())?)
}

/// Gram matrix `A_k(X)^T A_k(X)` via the circular autocorrelation of `X`.
///
/// `⟨T_a X, T_b X⟩` only depends on the shift difference, so the whole
/// `k × k` Gram costs one FFT pair plus `k²` lookups.
pub fn conv_gram(x: &DenseTensor, kernel: &KernelShape) -> Result<DMatrix<f64>> {
    kernel.validate_for(x.shape())?;
    let plan = FftNd::new(x.shape());
    let mut buf: Vec<Complex64> = x.data().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    plan.forward(&mut buf);
    for z in buf.iter_mut() {
        *z = Complex64::new(z.norm_sqr(), 0.0);
    }
    plan.inverse(&mut buf);
    let autocorr: Vec<f64> = buf.iter().map(|z| z.re).collect();
    let shape = x.shape();
    let strides = shape.strides();
    let shifts = kernel.column_shifts();
    let k = shifts.len();
    Ok(DMatrix::from_fn(k, k, |a, b| {
        let off: usize = shifts[a]
            .iter()
            .zip(&shifts[b])
            .zip(shape.dims())
            .zip(&strides)
            .map(|(((&sa, &sb), &d), &st)| ((sb + d - sa) % d) * st)
            .sum();
        autocorr[off]
    }))
}

/// Singular structure of `A_k(X)`.
#[derive(Clone, Debug)]
pub struct ConvSpectrum {
    /// Convolution eigenvalues, nonincreasing, length `k`.
    pub singular_values: Vec<f64>,
    /// `m × r` left singular vectors for the `r` values counted in the rank.
    pub left_vectors: DMatrix<f64>,
    /// `k × k` right singular vectors (columns), ordered like `singular_values`.
    pub right_vectors: DMatrix<f64>,
    pub rank: usize,
    pub nuclear_norm: f64,
    /// `μ_k(X) = (m/r)·max(max_i ‖U_{i,:}‖², max_j ‖V_{j,:}‖²)`, zero when `r = 0`.
    ///
    /// The `m/r` prefactor multiplies both factors and the second maximum
    /// runs over the `k` rows of `V`, so this is at least `m/k`; it equals the
    /// familiar two-sided coherence only at `k = m`.
    pub coherence: f64,
    /// `max_i ‖U_{i,:}‖²` over the rank-`r` left factor.
    pub max_left_leverage: f64,
    /// `max_j ‖V_{j,:}‖²` over the rank-`r` right factor.
    pub max_right_leverage: f64,
    pub m: usize,
    pub k: usize,
}

impl ConvSpectrum {
    /// Coherence with each factor scaled by its own dimension:
    /// `max((m/r)·max‖U_i‖², (k/r)·max‖V_j‖²)`.
    pub fn matrix_coherence(&self) -> f64 {
        if self.rank == 0 {
            return 0.0;
        }
        let r = self.rank as f64;
        (self.m as f64 / r * self.max_left_leverage).max(self.k as f64 / r * self.max_right_leverage)
    }

    /// `(m/r)·max_i ‖U_{i,:}‖²` alone.
    pub fn left_coherence(&self) -> f64 {
        if self.rank == 0 {
            return 0.0;
        }
        self.m as f64 / self.rank as f64 * self.max_left_leverage
    }
}

/// Convolution eigenvalues, rank, nuclear norm and coherence of `X`.
///
/// The right factor comes from the `k × k` Gram; each singular value is then
/// re-measured as `‖X ⋆ κ_l‖_F` so that values far below `√ε·σ_1` keep
/// their accuracy and rank counting at `rank_tol` is meaningful.
pub fn conv_spectrum(x: &DenseTensor, kernel: &KernelShape, rank_tol: f64) -> Result<ConvSpectrum> {
    x.check_finite()?;
    let gram = conv_gram(x, kernel)?;
    let (_, v) = sym_eig_desc(gram)?;
    let m = x.len();
    let k = kernel.len();

    let plan = FftNd::new(x.shape());
    let mut fx: Vec<Complex64> = x.data().iter().map(|&t| Complex64::new(t, 0.0)).collect();
    plan.forward(&mut fx);
    let strides = x.shape().strides();
    let offsets: Vec<usize> = kernel
        .column_shifts()
        .iter()
        .map(|s| s.iter().zip(&strides).map(|(a, b)| a * b).sum())
        .collect();

    let mut cols: Vec<(f64, Vec<f64>, usize)> = Vec::with_capacity(k);
    let mut buf = vec![Complex64::new(0.0, 0.0); m];
    for l in 0..k {
        buf.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
        for (j, &off) in offsets.iter().enumerate() {
            buf[off] = Complex64::new(v[(j, l)], 0.0);
        }
        plan.forward(&mut buf);
        for (b, f) in buf.iter_mut().zip(&fx) {
            *b *= f;
        }
        plan.inverse(&mut buf);
        let u: Vec<f64> = buf.iter().map(|z| z.re).collect();
        let sigma = u.iter().map(|t| t * t).sum::<f64>().sqrt();
        cols.push((sigma, u, l));
    }
    cols.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal));

    let singular_values: Vec<f64> = cols.iter().map(|c| c.0).collect();
    let top = singular_values.first().cloned().unwrap_or(0.0);
    let rank = if top > 0.0 { singular_values.iter().filter(|&&s| s > rank_tol * top).count() } else { 0 };
    let right_vectors = DMatrix::from_fn(k, k, |r, c| v[(r, cols[c].2)]);
    let left_vectors = DMatrix::from_fn(m, rank, |r, c| cols[c].1[r] / cols[c].0);
    let nuclear_norm = singular_values.iter().sum();

    let max_left_leverage = (0..m)
        .map(|i| (0..rank).map(|c| left_vectors[(i, c)].powi(2)).sum::<f64>())
        .fold(0.0, f64::max);
    let max_right_leverage = (0..k)
        .map(|j| (0..rank).map(|c| right_vectors[(j, c)].powi(2)).sum::<f64>())
        .fold(0.0, f64::max);
    let coherence = if rank == 0 { 0.0 } else { m as f64 / rank as f64 * max_left_leverage.max(max_right_leverage) };

    Ok(ConvSpectrum {
        singular_values,
        left_vectors,
        right_vectors,
        rank,
        nuclear_norm,
        coherence,
        max_left_leverage,
        max_right_leverage,
        m,
        k,
    })
}

/// The first `count` convolution eigenvectors as kernel-shaped tensors.
///
/// Signs are fixed so that the largest-magnitude entry of each is positive.
pub fn conv_eigenvectors(x: &DenseTensor, kernel: &KernelShape, count: usize) -> Result<(Vec<DenseTensor>, Vec<f64>)> {
    kernel.validate_for(x.shape())?;
    if count > kernel.len() {
        return Err(Error::InvalidArgument(format!(
            "requested {count} eigenvectors but the kernel has only {} entries",
            kernel.len()
        )));
    }
    let spec = conv_spectrum(x, kernel, DEFAULT_RANK_TOL)?;
    let kshape = kernel.shape();
    let mut out = Vec::with_capacity(count);
    for c in 0..count {
        let col: Vec<f64> = spec.right_vectors.column(c).iter().cloned().collect();
        let pivot = col.iter().cloned().fold(0.0f64, |a, b| if b.abs() > a.abs() { b } else { a });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        out.push(DenseTensor::new(kshape.clone(), col.into_iter().map(|v| v * sign).collect())?);
    }
    Ok((out, spec.singular_values[..count].to_vec()))
}
