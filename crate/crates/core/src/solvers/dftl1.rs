use num_complex::Complex64;

use super::prox::shrink_scalar;
use super::{check_inputs, divide_update, masked_misfit_sq, relative_change, Schedule, SolveReport, SolverConfig};
use crate::error::Result;
use crate::spectral::FftNd;
use crate::tensor::{DenseTensor, SamplingMask};

/// ADMM for `min ‖F(L)‖_1 + (λm/2)‖P_Ω(L − M)‖_F²` with the split `F(L) = Z`.
///
/// Each iteration costs two FFTs. Since `F^* = m·F^{-1}`, the `L` update's
/// `F^*(τZ − Y)/m` is a plain inverse transform.
pub fn solve_dftl1(observed: &DenseTensor, omega: &SamplingMask, cfg: &SolverConfig) -> Result<(DenseTensor, SolveReport)> {
    check_inputs(observed, omega, cfg)?;
    let m = observed.len();
    let lambda = cfg.lambda;
    let plan = FftNd::new(observed.shape());
    let lambda_pm = omega.project(observed)?.scale(lambda);

    let zero = Complex64::new(0.0, 0.0);
    let mut l = omega.project(observed)?;
    let mut f_l: Vec<Complex64> = l.data().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    plan.forward(&mut f_l);
    let mut y = vec![zero; m];
    let mut z = vec![zero; m];
    let mut buf = vec![zero; m];
    let mut back = DenseTensor::zeros(observed.shape().clone());
    let mut sched = Schedule::new(cfg);

    for _ in 0..cfg.max_iters {
        let tau = sched.tau;
        let mut z_l1 = 0.0;
        for ((zi, &fi), &yi) in z.iter_mut().zip(&f_l).zip(&y) {
            *zi = shrink_scalar(fi + yi / tau, 1.0 / tau);
            z_l1 += zi.norm();
        }
        for ((b, &zi), &yi) in buf.iter_mut().zip(&z).zip(&y) {
            *b = zi * tau - yi;
        }
        plan.inverse(&mut buf);
        for (o, b) in back.data_mut().iter_mut().zip(&buf) {
            *o = b.re;
        }
        divide_update(&mut back, omega, &lambda_pm, lambda, tau);
        let change = relative_change(&back, &l);
        std::mem::swap(&mut l, &mut back);

        for (f, &v) in f_l.iter_mut().zip(l.data()) {
            *f = Complex64::new(v, 0.0);
        }
        plan.forward(&mut f_l);
        let mut r2 = 0.0;
        let mut n2 = 0.0;
        for ((yi, &fi), &zi) in y.iter_mut().zip(&f_l).zip(&z) {
            let r = fi - zi;
            r2 += r.norm_sqr();
            n2 += fi.norm_sqr();
            *yi += r * tau;
        }
        let residual = r2.sqrt() / n2.sqrt().max(1.0);
        let objective = z_l1 + 0.5 * lambda * m as f64 * masked_misfit_sq(&l, observed, omega);
        if sched.record(residual, change, objective, &l) {
            break;
        }
    }
    Ok(sched.finish(l))
}
