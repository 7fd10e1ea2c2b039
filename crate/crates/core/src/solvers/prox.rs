//! Proximal operators of the nuclear norm and the complex ℓ1 norm.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::sym_eig_desc;
use crate::spectral::ComplexTensor;

/// Result of one singular value thresholding step.
#[derive(Clone, Debug)]
pub struct Thresholded {
    pub matrix: DMatrix<f64>,
    /// Nuclear norm of `matrix`, i.e. `Σ max(σ_i − t, 0)`.
    pub nuclear_norm: f64,
    /// Number of singular values that survived.
    pub rank: usize,
}

/// Singular value thresholding `U·max(Σ − t, 0)·V^T`, the minimizer of
/// `t‖Z‖_* + ½‖Z − M‖_F²`.
pub fn svt(m: &DMatrix<f64>, threshold: f64) -> Result<DMatrix<f64>> {
    Ok(svt_full(m, threshold)?.matrix)
}

/// [`svt`] plus the nuclear norm and rank of the output.
///
/// Works from the eigen-decomposition of the smaller Gram matrix, so a tall
/// `m × k` input costs `O(mk²)`.
pub fn svt_full(m: &DMatrix<f64>, threshold: f64) -> Result<Thresholded> {
    if !(threshold >= 0.0) {
        return Err(Error::InvalidArgument(format!("threshold must be >= 0, got {threshold}")));
    }
    if m.nrows() < m.ncols() {
        let t = svt_full(&m.transpose(), threshold)?;
        return Ok(Thresholded { matrix: t.matrix.transpose(), ..t });
    }
    let gram = m.tr_mul(m);
    let (lambda, v) = sym_eig_desc(gram)?;
    let mut kept = Vec::new();
    let mut nuclear = 0.0;
    for (i, &l) in lambda.iter().enumerate() {
        let sigma = l.max(0.0).sqrt();
        if sigma > threshold {
            kept.push((i, (sigma - threshold) / sigma));
            nuclear += sigma - threshold;
        }
    }
    let r = kept.len();
    if threshold == 0.0 && r == m.ncols() {
        return Ok(Thresholded { matrix: m.clone(), nuclear_norm: nuclear, rank: r });
    }
    if r == 0 {
        return Ok(Thresholded { matrix: DMatrix::zeros(m.nrows(), m.ncols()), nuclear_norm: 0.0, rank: 0 });
    }
    let vr = DMatrix::from_fn(m.ncols(), r, |row, c| v[(row, kept[c].0)]);
    let mut mv = m * &vr;
    for (c, &(_, d)) in kept.iter().enumerate() {
        mv.column_mut(c).scale_mut(d);
    }
    Ok(Thresholded { matrix: mv * vr.transpose(), nuclear_norm: nuclear, rank: r })
}

/// `h_α(z) = ((|z| − α)/|z|)·z` when `|z| > α`, else 0.
#[inline]
pub fn shrink_scalar(z: Complex64, alpha: f64) -> Complex64 {
    let mag = z.norm();
    if mag > alpha {
        z * ((mag - alpha) / mag)
    } else {
        Complex64::new(0.0, 0.0)
    }
}

/// Entry-wise magnitude shrinkage preserving phase.
pub fn complex_shrink(z: &ComplexTensor, alpha: f64) -> Result<ComplexTensor> {
    if !(alpha >= 0.0) {
        return Err(Error::InvalidArgument(format!("alpha must be >= 0, got {alpha}")));
    }
    let data = z.data().iter().map(|&v| shrink_scalar(v, alpha)).collect();
    ComplexTensor::new(z.shape().clone(), data)
}
