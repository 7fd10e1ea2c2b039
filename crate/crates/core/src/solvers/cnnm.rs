use nalgebra::DMatrix;

use super::prox::svt_full;
use super::{check_inputs, divide_update, masked_misfit_sq, relative_change, Schedule, SolveReport, SolverConfig};
use crate::conv::{adjoint_into, conv_matrix_into, KernelShape};
use crate::error::{Error, Result};
use crate::tensor::{DenseTensor, SamplingMask};

/// ADMM for `min ‖A_k(L)‖_* + (λk/2)‖P_Ω(L − M)‖_F²` with the split `A_k(L) = Z`.
///
/// Starts from `L = P_Ω(M)`, `Z = A_k(L)`, `Y = 0`. Without convergence
/// inside `max_iters` the iterate with the smallest primal residual is
/// returned and the report says `converged = false`.
pub fn solve_cnnm(
    observed: &DenseTensor,
    omega: &SamplingMask,
    kernel: &KernelShape,
    cfg: &SolverConfig,
) -> Result<(DenseTensor, SolveReport)> {
    check_inputs(observed, omega, cfg)?;
    kernel.validate_for(observed.shape())?;
    let m = observed.len();
    let k = kernel.len();
    let bytes = m.saturating_mul(k).saturating_mul(8);
    if bytes > cfg.memory_budget_bytes {
        return Err(Error::TooLarge { rows: m, cols: k, entries: m * k, cap: cfg.memory_budget_bytes / 8 });
    }
    let kf = k as f64;
    let lambda = cfg.lambda;
    let lambda_pm = omega.project(observed)?.scale(lambda);

    let mut l = omega.project(observed)?;
    let mut a_l = DMatrix::zeros(m, k);
    conv_matrix_into(&l, kernel, &mut a_l);
    let mut y: DMatrix<f64> = DMatrix::zeros(m, k);
    let mut back = DenseTensor::zeros(observed.shape().clone());
    let mut sched = Schedule::new(cfg);

    for _ in 0..cfg.max_iters {
        let tau = sched.tau;
        let mut w = y.clone();
        w /= tau;
        w += &a_l;
        let thr = svt_full(&w, 1.0 / tau)?;
        let z = thr.matrix;

        // τZ − Y, reusing w's storage
        w.copy_from(&z);
        w *= tau;
        w -= &y;
        adjoint_into(&w, kernel, &mut back);
        back.data_mut().iter_mut().for_each(|v| *v /= kf);
        divide_update(&mut back, omega, &lambda_pm, lambda, tau);
        let change = relative_change(&back, &l);
        std::mem::swap(&mut l, &mut back);

        conv_matrix_into(&l, kernel, &mut a_l);
        let mut r = a_l.clone();
        r -= &z;
        let residual = r.norm() / a_l.norm().max(1.0);
        r *= tau;
        y += &r;

        let objective = thr.nuclear_norm + 0.5 * lambda * kf * masked_misfit_sq(&l, observed, omega);
        if sched.record(residual, change, objective, &l) {
            break;
        }
    }
    Ok(sched.finish(l))
}
