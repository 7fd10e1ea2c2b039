//! Multi-dimensional DFT and Fourier sparsity measures.
//!
//! The forward transform is unnormalized (`U_1^H U_1 = m·I` per axis), so
//! Parseval reads `‖F(X)‖_F² = m·‖X‖_F²` and the Hermitian adjoint of `F`
//! on real tensors is `m·Re F^{-1}`.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::tensor::{DenseTensor, Shape};

/// Complex tensor in the same first-dimension-fastest layout as [`DenseTensor`].
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexTensor {
    shape: Shape,
    data: Vec<Complex64>,
}

impl ComplexTensor {
    pub fn new(shape: Shape, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != shape.len() {
            return Err(Error::InvalidShape(format!(
                "{} values supplied for shape {:?}",
                data.len(),
                shape.dims()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Shape) -> Self {
        let data = vec![Complex64::new(0.0, 0.0); shape.len()];
        Self { shape, data }
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<Complex64> {
        self.data
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.data.iter().map(|z| z.norm()).collect()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn l1_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).sum()
    }

    /// Real inner product `Re Σ conj(a_i)·b_i`.
    pub fn real_inner(&self, other: &Self) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a.conj() * b).re).sum()
    }
}

/// Planned n-D transform for one shape; plans are `Send + Sync` and reusable.
pub struct FftNd {
    dims: Vec<usize>,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
}

impl FftNd {
    pub fn new(shape: &Shape) -> Self {
        let mut planner = FftPlanner::new();
        let dims = shape.dims().to_vec();
        let forward = dims.iter().map(|&d| planner.plan_fft_forward(d)).collect();
        let inverse = dims.iter().map(|&d| planner.plan_fft_inverse(d)).collect();
        Self { dims, forward, inverse }
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// In-place unnormalized forward transform.
    pub fn forward(&self, buf: &mut [Complex64]) {
        self.run(buf, &self.forward);
    }

    /// In-place inverse transform scaled by `1/m`, i.e. exactly `F^{-1}`.
    pub fn inverse(&self, buf: &mut [Complex64]) {
        self.run(buf, &self.inverse);
        let s = 1.0 / buf.len() as f64;
        for z in buf.iter_mut() {
            *z *= s;
        }
    }

    fn run(&self, buf: &mut [Complex64], plans: &[Arc<dyn Fft<f64>>]) {
        assert_eq!(buf.len(), self.len(), "buffer does not match planned shape");
        let mut stride = 1;
        let mut lane = Vec::new();
        for (axis, &d) in self.dims.iter().enumerate() {
            let plan = &plans[axis];
            if d > 1 {
                if stride == 1 {
                    plan.process(buf);
                } else {
                    lane.resize(d, Complex64::new(0.0, 0.0));
                    let block = stride * d;
                    for base in (0..buf.len()).step_by(block) {
                        for inner in 0..stride {
                            let start = base + inner;
                            for (i, z) in lane.iter_mut().enumerate() {
                                *z = buf[start + i * stride];
                            }
                            plan.process(&mut lane);
                            for (i, z) in lane.iter().enumerate() {
                                buf[start + i * stride] = *z;
                            }
                        }
                    }
                }
            }
            stride *= d;
        }
    }
}

/// Unnormalized DFT of a real tensor.
pub fn dft(x: &DenseTensor) -> ComplexTensor {
    let plan = FftNd::new(x.shape());
    let mut data: Vec<Complex64> = x.data().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    plan.forward(&mut data);
    ComplexTensor { shape: x.shape().clone(), data }
}

/// Inverse DFT of the transform of a real tensor.
///
/// The imaginary residue (measured in spectrum units) is discarded when it is
/// below `1e-9·‖Z‖_F`; larger residue means `z` is not conjugate-symmetric.
pub fn idft(z: &ComplexTensor) -> Result<DenseTensor> {
    let plan = FftNd::new(z.shape());
    let mut data = z.data.clone();
    plan.inverse(&mut data);
    let m = data.len() as f64;
    let residue = data.iter().map(|c| c.im * c.im).sum::<f64>().sqrt() * m.sqrt();
    let limit = 1e-9 * z.frobenius_norm();
    if residue > limit {
        return Err(Error::NotConjugateSymmetric { residue, limit });
    }
    DenseTensor::new(z.shape.clone(), data.into_iter().map(|c| c.re).collect())
}

/// Hermitian adjoint of the DFT restricted to real tensors: `m·Re F^{-1}(z)`.
pub fn dft_adjoint(z: &ComplexTensor) -> DenseTensor {
    let plan = FftNd::new(z.shape());
    let mut data = z.data.clone();
    plan.inverse(&mut data);
    let m = data.len() as f64;
    DenseTensor::new(z.shape.clone(), data.into_iter().map(|c| c.re * m).collect())
        .expect("shape preserved")
}

/// Default relative threshold for counting nonzero Fourier coefficients.
pub const DEFAULT_L0_TOL: f64 = 1e-8;

/// Number of spectrum magnitudes above `tol·max|F(X)|`.
pub fn fourier_l0(x: &DenseTensor, tol: f64) -> usize {
    let mags = dft(x).magnitudes();
    let peak = mags.iter().cloned().fold(0.0, f64::max);
    if peak == 0.0 {
        return 0;
    }
    mags.iter().filter(|&&v| v > tol * peak).count()
}

/// `‖F(X)‖_1`.
pub fn fourier_l1(x: &DenseTensor) -> f64 {
    dft(x).l1_norm()
}

/// Gini index of a magnitude sequence.
///
/// With `c` the magnitudes sorted ascending and `N` their count,
/// `G = 1 − 2·Σ_k (c_k/‖c‖_1)·(N − k + 0.5)/N` (k 1-based).
pub fn gini(values: &[f64]) -> Result<f64> {
    let mut c: Vec<f64> = values.iter().map(|v| v.abs()).collect();
    if c.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("gini input contains non-finite values".into()));
    }
    let total: f64 = c.iter().sum();
    if total == 0.0 {
        return Err(Error::InvalidArgument("gini index undefined for an all-zero sequence".into()));
    }
    c.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let n = c.len() as f64;
    let acc: f64 = c
        .iter()
        .enumerate()
        .map(|(i, &v)| (v / total) * ((n - (i as f64 + 1.0) + 0.5) / n))
        .sum();
    Ok(1.0 - 2.0 * acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn random_tensor(rng: &mut ChaCha8Rng, dims: Vec<usize>) -> DenseTensor {
        let shape = Shape::new(dims).unwrap();
        let data = (0..shape.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        DenseTensor::new(shape, data).unwrap()
    }

    /// Direct O(m²) evaluation of the n-D DFT from its definition.
    fn naive_dft(x: &DenseTensor) -> Vec<Complex64> {
        let shape = x.shape();
        (0..shape.len())
            .map(|f| {
                let fi = shape.multi_index(f);
                let mut acc = Complex64::new(0.0, 0.0);
                for (o, &v) in x.data().iter().enumerate() {
                    let ti = shape.multi_index(o);
                    let phase: f64 = fi
                        .iter()
                        .zip(&ti)
                        .zip(shape.dims())
                        .map(|((&a, &b), &d)| ((a - 1) * (b - 1)) as f64 / d as f64)
                        .sum();
                    acc += v * Complex64::from_polar(1.0, -2.0 * PI * phase);
                }
                acc
            })
            .collect()
    }

    #[test]
    fn constant_and_delta() {
        let x = DenseTensor::from_vec(vec![1.0; 4]).unwrap();
        let f = dft(&x);
        assert!(close(f.data()[0].re, 4.0, 1e-12));
        assert!(f.data()[1..].iter().all(|z| z.norm() < 1e-12));
        let d = DenseTensor::from_vec(vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(dft(&d).data().iter().all(|z| close(z.re, 1.0, 1e-12) && z.im.abs() < 1e-12));
    }

    #[test]
    fn single_tone_has_two_bins() {
        let m = 64;
        let x = DenseTensor::from_vec((1..=m).map(|t| (2.0 * PI * t as f64 / m as f64).sin()).collect()).unwrap();
        let mags = dft(&x).magnitudes();
        let big: Vec<usize> = (0..m).filter(|&i| mags[i] > 1e-9).collect();
        assert_eq!(big, vec![1, m - 1]);
        assert!(close(mags[1], m as f64 / 2.0, 1e-9));
        assert_eq!(fourier_l0(&x, DEFAULT_L0_TOL), 2);
    }

    #[test]
    fn matches_definition_in_three_dimensions() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random_tensor(&mut rng, vec![3, 4, 5]);
        let fast = dft(&x);
        for (a, b) in fast.data().iter().zip(naive_dft(&x)) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn round_trip_and_parseval() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for dims in [vec![7], vec![4, 6], vec![3, 2, 5]] {
            let x = random_tensor(&mut rng, dims);
            let f = dft(&x);
            let back = idft(&f).unwrap();
            for (a, b) in back.data().iter().zip(x.data()) {
                assert!((a - b).abs() < 1e-10);
            }
            let m = x.len() as f64;
            let lhs = f.frobenius_norm().powi(2);
            let rhs = m * x.frobenius_norm().powi(2);
            assert!((lhs - rhs).abs() <= 1e-9 * rhs);
        }
        let z = ComplexTensor::new(
            Shape::vector(4).unwrap(),
            vec![Complex64::new(4.0, 0.0), Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)],
        )
        .unwrap();
        assert_eq!(idft(&z).unwrap().data(), &[1.0; 4]);
    }

    #[test]
    fn idft_rejects_asymmetric_spectrum() {
        let z = ComplexTensor::new(
            Shape::vector(4).unwrap(),
            vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)],
        )
        .unwrap();
        assert!(matches!(idft(&z), Err(Error::NotConjugateSymmetric { .. })));
    }

    #[test]
    fn adjoint_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = random_tensor(&mut rng, vec![5, 6]);
        let zdata = (0..30).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
        let z = ComplexTensor::new(x.shape().clone(), zdata).unwrap();
        let lhs = dft(&x).real_inner(&z);
        let rhs = x.inner(&dft_adjoint(&z)).unwrap();
        assert!((lhs - rhs).abs() < 1e-10 * (1.0 + lhs.abs()));
    }

    #[test]
    fn linearity_and_conjugate_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = random_tensor(&mut rng, vec![6, 5]);
        let y = random_tensor(&mut rng, vec![6, 5]);
        let lin = dft(&x.scale(2.0).add(&y.scale(-3.0)).unwrap());
        let (fx, fy) = (dft(&x), dft(&y));
        for i in 0..30 {
            assert!((lin.data()[i] - (fx.data()[i] * 2.0 - fy.data()[i] * 3.0)).norm() < 1e-10);
        }
        let s = x.shape();
        for o in 0..30 {
            let idx = s.multi_index(o);
            let mirrored: Vec<usize> = idx.iter().zip(s.dims()).map(|(&i, &d)| (d - (i - 1)) % d + 1).collect();
            let p = s.offset(&mirrored).unwrap();
            assert!((fx.data()[o] - fx.data()[p].conj()).norm() < 1e-10);
        }
    }

    #[test]
    fn l0_of_constant_and_tone_mixture() {
        let c = DenseTensor::filled(Shape::new(vec![4, 4]).unwrap(), 2.5);
        assert_eq!(fourier_l0(&c, DEFAULT_L0_TOL), 1);
        let m = 1000;
        for a in [1usize, 3, 7] {
            let x = DenseTensor::from_vec(
                (1..=m)
                    .map(|t| (1..=a).map(|i| (2.0 * PI * (t * i) as f64 / m as f64).sin()).sum())
                    .collect(),
            )
            .unwrap();
            assert_eq!(fourier_l0(&x, DEFAULT_L0_TOL), 2 * a);
        }
    }

    #[test]
    fn gini_examples() {
        assert!(close(gini(&[1.0, 1.0, 1.0, 1.0]).unwrap(), 0.0, 1e-15));
        assert!(close(gini(&[0.0, 0.0, 0.0, 1.0]).unwrap(), 0.75, 1e-15));
        let v = [0.3, 2.0, 0.0, 5.5, 1.25];
        let g = gini(&v).unwrap();
        let scaled: Vec<f64> = v.iter().map(|x| x * 7.5).collect();
        assert!(close(gini(&scaled).unwrap(), g, 1e-14));
        assert!(gini(&[0.0, 0.0]).is_err());
        let mut hot = vec![0.0; 1000];
        hot[3] = 1.0;
        assert!(gini(&hot).unwrap() > 0.99);
    }
}
