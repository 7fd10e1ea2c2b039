//! Test oracles shared by the integration targets.
#![allow(dead_code)]

use cnnm::solvers::SolverConfig;
use cnnm::{DenseTensor, SamplingMask, Shape};
use nalgebra::{DMatrix, DVector};

/// `(mk) × m` 0/1 matrix taking `vec(L)` to `vec(A_k(L))`, built straight from
/// `[A_k(L)]_{i,j} = L[(i − s_j) mod m]` with `s_j` the 0-based position of
/// kernel entry `j`.
pub fn explicit_operator(shape: &Shape, kdims: &[usize]) -> DMatrix<f64> {
    let dims = shape.dims();
    let m = shape.len();
    let k: usize = kdims.iter().product();
    let mut p = DMatrix::zeros(m * k, m);
    for j in 0..k {
        let mut s = Vec::new();
        let mut rest = j;
        for &kd in kdims {
            s.push(rest % kd);
            rest /= kd;
        }
        for i in 0..m {
            let mut rest = i;
            let mut src = 0;
            let mut stride = 1;
            for (d, &md) in dims.iter().enumerate() {
                let coord = rest % md;
                rest /= md;
                src += ((coord + md - s[d]) % md) * stride;
                stride *= md;
            }
            p[(i + j * m, src)] = 1.0;
        }
    }
    p
}

/// Nuclear-norm prox through faer's SVD.
pub fn svt_reference(w: &DMatrix<f64>, t: f64) -> DMatrix<f64> {
    let f = faer::Mat::<f64>::from_fn(w.nrows(), w.ncols(), |i, j| w[(i, j)]);
    let svd = f.thin_svd().unwrap();
    let s = svd.S().column_vector();
    let (u, v) = (svd.U(), svd.V());
    DMatrix::from_fn(w.nrows(), w.ncols(), |i, j| {
        (0..s.nrows()).map(|r| (s[r] - t).max(0.0) * u[(i, r)] * v[(j, r)]).sum()
    })
}

/// The CNNM ADMM loop on the explicit operator, run for `iters` steps.
/// Returns the last iterate and the one with the smallest primal residual.
pub fn oracle_admm(m_obs: &DenseTensor, omega: &SamplingMask, kdims: &[usize], cfg: &SolverConfig, iters: usize) -> (DVector<f64>, DVector<f64>) {
    let m = m_obs.len();
    let k: usize = kdims.iter().product();
    let kf = k as f64;
    let p = explicit_operator(m_obs.shape(), kdims);
    let theta = DVector::from_column_slice(omega.indicator().data());
    let pm = DVector::from_column_slice(omega.project(m_obs).unwrap().data());
    let mut l = pm.clone();
    let mut y = DMatrix::<f64>::zeros(m, k);
    let mut tau = cfg.tau0;
    let mut best = (f64::INFINITY, l.clone());
    for _ in 0..iters {
        let al = DMatrix::from_column_slice(m, k, (&p * &l).as_slice());
        let z = svt_reference(&(&al + &y / tau), 1.0 / tau);
        let rhs = DVector::from_column_slice((&z * tau - &y).as_slice());
        let back = p.transpose() * rhs / kf;
        l = DVector::from_fn(m, |i, _| (back[i] + cfg.lambda * pm[i]) / (cfg.lambda * theta[i] + tau));
        let al = DMatrix::from_column_slice(m, k, (&p * &l).as_slice());
        let r = &al - &z;
        let residual = r.norm() / al.norm().max(1.0);
        if residual < best.0 {
            best = (residual, l.clone());
        }
        y += r * tau;
        tau = (tau * cfg.tau_growth).min(cfg.tau_max);
    }
    (l, best.1)
}
