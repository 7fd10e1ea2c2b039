//! Kernel-size selection by coding length, plus the sizing heuristics used
//! for forecasting and image completion.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conv::{conv_gram, KernelShape};
use crate::error::{Error, Result};
use crate::tensor::{DenseTensor, Shape};

/// Default α for the time axis.
pub const DEFAULT_ALPHA: f64 = 0.5;
/// Default kernel extent along non-time axes.
pub const DEFAULT_IMAGE_KERNEL: usize = 13;

/// `0.1·‖X‖_F/√m`, a tenth of the per-entry RMS. Falls back to 1 for the zero
/// tensor, whose coding length is 0 for any θ.
pub fn default_theta(x: &DenseTensor) -> f64 {
    let rms = x.frobenius_norm() / (x.len() as f64).sqrt();
    if rms > 0.0 {
        0.1 * rms
    } else {
        1.0
    }
}

/// Coding length `½(m+k)·log det(I + (m/(kθ²))·A_k(X)A_k(X)^T)`.
///
/// The determinant is taken on the `k × k` side, `det(I_k + c·A^T A)`, and
/// its log comes from a Cholesky factor.
pub fn coding_length(x: &DenseTensor, kernel: &KernelShape, theta: f64) -> Result<f64> {
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(Error::InvalidArgument(format!("theta must be positive and finite, got {theta}")));
    }
    x.check_finite()?;
    kernel.validate_for(x.shape())?;
    let m = x.len() as f64;
    let k = kernel.len() as f64;
    let c = m / (k * theta * theta);
    let mut g = conv_gram(x, kernel)?;
    g *= c;
    for i in 0..g.nrows() {
        g[(i, i)] += 1.0;
    }
    Ok(0.5 * (m + k) * log_det_spd(g)?)
}

/// Coding length divided by the kernel size `k`.
pub fn averaged_coding_length(x: &DenseTensor, kernel: &KernelShape, theta: f64) -> Result<f64> {
    Ok(coding_length(x, kernel, theta)? / kernel.len() as f64)
}

fn log_det_spd(g: DMatrix<f64>) -> Result<f64> {
    let chol = g
        .cholesky()
        .ok_or_else(|| Error::Numerical("coding-length Gram is not positive definite".into()))?;
    Ok(2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>())
}

/// Heuristic kernel for a tensor whose last axis is time.
///
/// The time extent is `round(α·m_n)` clamped into `(q, m_n]`; every other
/// axis gets `min(image_default, m_j)`.
pub fn select_kernel(shape: &Shape, horizon: usize, alpha: f64, image_default: usize) -> Result<KernelShape> {
    let dims = shape.dims();
    let mn = *dims.last().expect("shapes are non-empty");
    if horizon >= mn {
        return Err(Error::InvalidArgument(format!("horizon {horizon} must be smaller than the time extent {mn}")));
    }
    let lo = horizon as f64 / mn as f64;
    if !(alpha > lo && alpha <= 1.0) {
        return Err(Error::InvalidArgument(format!("alpha must lie in ({lo}, 1], got {alpha}")));
    }
    if image_default == 0 {
        return Err(Error::InvalidArgument("image_default must be at least 1".into()));
    }
    let kn = ((alpha * mn as f64).round() as usize).clamp(horizon + 1, mn);
    let mut kdims: Vec<usize> = dims[..dims.len() - 1].iter().map(|&m| m.min(image_default)).collect();
    kdims.push(kn);
    KernelShape::new(kdims, shape)
}

/// Kernels with every extent equal to `s` (capped at the data extent), one per size.
pub fn square_kernels(shape: &Shape, sizes: impl IntoIterator<Item = usize>) -> Result<Vec<KernelShape>> {
    sizes
        .into_iter()
        .map(|s| KernelShape::new(shape.dims().iter().map(|&m| s.min(m)).collect(), shape))
        .collect()
}

/// One scored candidate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelScore {
    pub kernel: Vec<usize>,
    pub acl: f64,
}

/// Candidates and θ for a kernel scan, with results once run.
#[derive(Clone, Debug)]
pub struct KernelSearchSpec {
    pub candidates: Vec<KernelShape>,
    pub theta: f64,
}

impl KernelSearchSpec {
    pub fn new(shape: &Shape, candidates: Vec<KernelShape>, theta: f64) -> Result<Self> {
        if candidates.is_empty() {
            return Err(Error::InvalidArgument("no kernel candidates".into()));
        }
        for c in &candidates {
            c.validate_for(shape)?;
        }
        Ok(Self { candidates, theta })
    }

    pub fn run(&self, x: &DenseTensor) -> Result<Vec<KernelScore>> {
        scan_kernels(x, &self.candidates, self.theta)
    }
}

/// Scores every candidate by ACL and sorts ascending; ties go to the
/// smaller kernel.
pub fn scan_kernels(x: &DenseTensor, candidates: &[KernelShape], theta: f64) -> Result<Vec<KernelScore>> {
    if candidates.is_empty() {
        return Err(Error::InvalidArgument("no kernel candidates".into()));
    }
    let mut scored = candidates
        .par_iter()
        .map(|k| {
            Ok(KernelScore { kernel: k.dims().to_vec(), acl: averaged_coding_length(x, k, theta)? })
        })
        .collect::<Result<Vec<_>>>()?;
    scored.sort_by(|a, b| {
        a.acl
            .total_cmp(&b.acl)
            .then_with(|| a.kernel.iter().product::<usize>().cmp(&b.kernel.iter().product::<usize>()))
    });
    Ok(scored)
}

/// CSV with columns `k_1,…,k_n,acl`.
pub fn scores_to_csv(scores: &[KernelScore]) -> String {
    let order = scores.first().map_or(0, |s| s.kernel.len());
    let mut out: Vec<String> = (1..=order).map(|j| format!("k_{j}")).collect();
    out.push("acl".into());
    let mut csv = out.join(",") + "\n";
    for s in scores {
        let row: Vec<String> = s.kernel.iter().map(|k| k.to_string()).collect();
        csv += &format!("{},{}\n", row.join(","), s.acl);
    }
    csv
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conv::materialize;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(shape: Vec<usize>, seed: u64) -> DenseTensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DenseTensor::from_fn(Shape::new(shape).unwrap(), |_| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn zero_tensor_has_zero_length() {
        let x = DenseTensor::zeros(Shape::new(vec![6, 5]).unwrap());
        let k = KernelShape::new(vec![3, 2], x.shape()).unwrap();
        assert_eq!(coding_length(&x, &k, 0.3).unwrap(), 0.0);
        assert_eq!(averaged_coding_length(&x, &k, 0.3).unwrap(), 0.0);
        assert_eq!(default_theta(&x), 1.0);
    }

    #[test]
    fn scalar_kernel_closed_form() {
        let x = random(vec![20], 1);
        let k = KernelShape::new(vec![1], x.shape()).unwrap();
        let theta = 0.4;
        let n2 = x.frobenius_norm().powi(2);
        let expected = 0.5 * 21.0 * (1.0 + 20.0 / (theta * theta) * n2).ln();
        assert!((coding_length(&x, &k, theta).unwrap() - expected).abs() < 1e-10 * expected);
    }

    #[test]
    fn gram_form_matches_direct_determinant() {
        for (dims, kd, seed) in [(vec![30], vec![7], 2), (vec![8, 8], vec![3, 2], 3), (vec![4, 4, 4], vec![2, 2, 3], 4)] {
            let x = random(dims, seed);
            let k = KernelShape::new(kd, x.shape()).unwrap();
            let theta = 0.7;
            let (m, kk) = (x.len() as f64, k.len() as f64);
            let a = materialize(&x, &k).unwrap();
            let mut big = &a * a.transpose() * (m / (kk * theta * theta));
            for i in 0..big.nrows() {
                big[(i, i)] += 1.0;
            }
            let direct = 0.5 * (m + kk) * big.determinant().ln();
            let cl = coding_length(&x, &k, theta).unwrap();
            assert!((cl - direct).abs() <= 1e-6 * direct.abs(), "{cl} vs {direct}");
            let acl = averaged_coding_length(&x, &k, theta).unwrap();
            assert_eq!(acl * kk, cl);
        }
    }

    #[test]
    fn rejects_bad_theta_and_nan() {
        let mut x = random(vec![10], 5);
        let k = KernelShape::new(vec![3], x.shape()).unwrap();
        assert!(coding_length(&x, &k, 0.0).is_err());
        x.data_mut()[2] = f64::NAN;
        assert!(coding_length(&x, &k, 1.0).is_err());
    }

    #[test]
    fn heuristic_kernels() {
        let s = Shape::vector(100).unwrap();
        assert_eq!(select_kernel(&s, 10, 0.5, 13).unwrap().dims(), &[50]);
        assert_eq!(select_kernel(&s, 10, 1.0, 13).unwrap().dims(), &[100]);
        let v = Shape::new(vec![200, 200, 62]).unwrap();
        assert_eq!(select_kernel(&v, 6, 0.5, 13).unwrap().dims(), &[13, 13, 31]);
        let small = Shape::new(vec![8, 40]).unwrap();
        assert_eq!(select_kernel(&small, 4, 0.5, 13).unwrap().dims(), &[8, 20]);
        // α barely above q/m rounds down to q, then the clamp lifts it to q+1
        assert_eq!(select_kernel(&s, 10, 0.104, 13).unwrap().dims(), &[11]);
        assert!(select_kernel(&s, 100, 0.5, 13).is_err());
        assert!(select_kernel(&s, 10, 0.05, 13).is_err());
        assert!(select_kernel(&s, 10, 1.5, 13).is_err());
    }

    #[test]
    fn sine_prefers_largest_kernel() {
        let m = 64;
        let x = DenseTensor::from_fn(Shape::vector(m).unwrap(), |i| {
            (2.0 * std::f64::consts::PI * 3.0 * (i[0] - 1) as f64 / m as f64).sin()
        });
        let cands = square_kernels(x.shape(), [4, 8, 16, 32, 64]).unwrap();
        let scores = scan_kernels(&x, &cands, default_theta(&x)).unwrap();
        let order: Vec<usize> = scores.iter().map(|s| s.kernel[0]).collect();
        assert_eq!(order, [64, 32, 16, 8, 4]);
    }

    #[test]
    fn single_candidate_and_ties() {
        let x = random(vec![12], 6);
        let k = KernelShape::new(vec![5], x.shape()).unwrap();
        let s = scan_kernels(&x, std::slice::from_ref(&k), 1.0).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].kernel, [5]);
        assert!(scan_kernels(&x, &[], 1.0).is_err());

        let z = DenseTensor::zeros(Shape::vector(12).unwrap());
        let cands = square_kernels(z.shape(), [6, 2, 4]).unwrap();
        let s = scan_kernels(&z, &cands, 1.0).unwrap();
        assert_eq!(s.iter().map(|c| c.kernel[0]).collect::<Vec<_>>(), [2, 4, 6]);
    }

    #[test]
    fn csv_layout() {
        let scores = vec![KernelScore { kernel: vec![3, 3], acl: 1.5 }, KernelScore { kernel: vec![5, 5], acl: 2.0 }];
        assert_eq!(scores_to_csv(&scores), "k_1,k_2,acl\n3,3,1.5\n5,5,2\n");
    }

    #[test]
    fn spec_validates_candidates() {
        let s = Shape::new(vec![10, 10]).unwrap();
        let other = Shape::new(vec![20, 20]).unwrap();
        let big = KernelShape::new(vec![15, 15], &other).unwrap();
        assert!(KernelSearchSpec::new(&s, vec![big], 1.0).is_err());
        assert!(KernelSearchSpec::new(&s, vec![], 1.0).is_err());
    }
}
