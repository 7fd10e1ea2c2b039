use nalgebra::DMatrix;

use super::prox::svt_full;
use super::{check_inputs, divide_update, masked_misfit_sq, relative_change, Schedule, SolveReport, SolverConfig};
use crate::error::{Error, Result};
use crate::tensor::{DenseTensor, SamplingMask};

/// Low-rank matrix completion baseline:
/// ADMM for `min ‖L‖_* + (λ/2)‖P_Ω(L − M)‖_F²` with the split `L = Z`.
///
/// Only defined for order-2 inputs. A wholly missing row or column has no
/// data term, so the nuclear norm drives it to zero.
pub fn solve_nnm_baseline(
    observed: &DenseTensor,
    omega: &SamplingMask,
    cfg: &SolverConfig,
) -> Result<(DenseTensor, SolveReport)> {
    check_inputs(observed, omega, cfg)?;
    if observed.shape().order() != 2 {
        return Err(Error::InvalidArgument(format!(
            "matrix completion baseline needs an order-2 tensor, got order {}",
            observed.shape().order()
        )));
    }
    let (rows, cols) = (observed.dims()[0], observed.dims()[1]);
    let lambda = cfg.lambda;
    let lambda_pm = omega.project(observed)?.scale(lambda);
    let as_matrix = |t: &DenseTensor| DMatrix::from_column_slice(rows, cols, t.data());

    let mut l = omega.project(observed)?;
    let mut y: DMatrix<f64> = DMatrix::zeros(rows, cols);
    let mut sched = Schedule::new(cfg);

    for _ in 0..cfg.max_iters {
        let tau = sched.tau;
        let lm = as_matrix(&l);
        let w = &lm + &y / tau;
        let thr = svt_full(&w, 1.0 / tau)?;
        let z = thr.matrix;
        let rhs = &z * tau - &y;
        let mut next = DenseTensor::new(l.shape().clone(), rhs.as_slice().to_vec())?;
        divide_update(&mut next, omega, &lambda_pm, lambda, tau);
        let change = relative_change(&next, &l);
        l = next;

        let lm = as_matrix(&l);
        let r = &lm - &z;
        let residual = r.norm() / lm.norm().max(1.0);
        y += r * tau;
        let objective = thr.nuclear_norm + 0.5 * lambda * masked_misfit_sq(&l, observed, omega);
        if sched.record(residual, change, objective, &l) {
            break;
        }
    }
    Ok(sched.finish(l))
}
