//! Recovery-theory diagnostics: isomerism, relative condition numbers,
//! sampling thresholds and error bounds.
//!
//! Rank decisions and pseudo-inverses cut singular values at `1e-9·σ_1(X)`.

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conv::{conv_sampling_set, conv_spectrum, materialize, KernelShape, DEFAULT_RANK_TOL};
use crate::error::{Error, Result};
use crate::linalg::{operator_norm, pseudo_inverse, singular_values, thin_svd};
use crate::tensor::{DenseTensor, SamplingMask};

const REL_TOL: f64 = 1e-9;

/// A sampling set on an `m̄_1 × m̄_2` grid.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sampling2D {
    rows: usize,
    cols: usize,
    /// Column-major membership flags.
    observed: Vec<bool>,
}

impl Sampling2D {
    pub fn new(rows: usize, cols: usize, observed: Vec<bool>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidShape(format!("sampling grid must be non-empty, got {rows}x{cols}")));
        }
        if observed.len() != rows * cols {
            return Err(Error::ShapeMismatch { expected: vec![rows, cols], got: vec![observed.len()] });
        }
        Ok(Self { rows, cols, observed })
    }

    pub fn full(rows: usize, cols: usize) -> Result<Self> {
        Self::new(rows, cols, vec![true; rows * cols])
    }

    /// From an order-2 mask, e.g. a convolution sampling set.
    pub fn from_mask(mask: &SamplingMask) -> Result<Self> {
        let dims = mask.shape().dims();
        if dims.len() != 2 {
            return Err(Error::InvalidArgument(format!("expected an order-2 mask, got order {}", dims.len())));
        }
        let observed = mask.indicator().data().iter().map(|&v| v != 0.0).collect();
        Self::new(dims[0], dims[1], observed)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Membership of `(i, j)`, 0-based.
    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.observed[i + j * self.rows]
    }

    /// `Ω̄_i`: observed column indices in row `i` (0-based).
    pub fn row_set(&self, i: usize) -> Vec<usize> {
        (0..self.cols).filter(|&j| self.contains(i, j)).collect()
    }

    /// `Ω̄^j`: observed row indices in column `j` (0-based).
    pub fn col_set(&self, j: usize) -> Vec<usize> {
        (0..self.rows).filter(|&i| self.contains(i, j)).collect()
    }

    pub fn transpose(&self) -> Self {
        let observed = (0..self.rows * self.cols)
            .map(|o| {
                let (j, i) = (o % self.cols, o / self.cols);
                self.contains(i, j)
            })
            .collect();
        Self { rows: self.cols, cols: self.rows, observed }
    }

    /// `min(min_i |Ω̄_i|/m̄_2, min_j |Ω̄^j|/m̄_1)`.
    pub fn min_fraction(&self) -> f64 {
        let r = (0..self.rows).map(|i| self.row_set(i).len()).min().unwrap_or(0) as f64 / self.cols as f64;
        let c = (0..self.cols).map(|j| self.col_set(j).len()).min().unwrap_or(0) as f64 / self.rows as f64;
        r.min(c)
    }

    fn check_dims(&self, x: &DMatrix<f64>) -> Result<()> {
        if x.nrows() != self.rows || x.ncols() != self.cols {
            return Err(Error::ShapeMismatch { expected: vec![self.rows, self.cols], got: vec![x.nrows(), x.ncols()] });
        }
        Ok(())
    }

    fn check_nonempty(&self) -> Result<()> {
        for i in 0..self.rows {
            if self.row_set(i).is_empty() {
                return Err(Error::InvalidArgument(format!("row {} of the sampling set is empty", i + 1)));
            }
        }
        for j in 0..self.cols {
            if self.col_set(j).is_empty() {
                return Err(Error::InvalidArgument(format!("column {} of the sampling set is empty", j + 1)));
            }
        }
        Ok(())
    }
}

fn select_rows(x: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), x.ncols(), |r, c| x[(rows[r], c)])
}

fn rank_above(x: &DMatrix<f64>, abs_tol: f64) -> Result<usize> {
    Ok(singular_values(x)?.iter().filter(|&&s| s > abs_tol).count())
}

/// `rank(X[Ω̄^j, :]) = rank(X)` for every column `j`.
pub fn is_isomeric(x: &DMatrix<f64>, omega: &Sampling2D) -> Result<bool> {
    omega.check_dims(x)?;
    omega.check_nonempty()?;
    let tol = REL_TOL * operator_norm(x)?;
    let full = rank_above(x, tol)?;
    for j in 0..omega.cols {
        if rank_above(&select_rows(x, &omega.col_set(j)), tol)? != full {
            return Ok(false);
        }
    }
    Ok(true)
}

/// `X` is `Ω̄`-isomeric and `X^T` is `Ω̄^T`-isomeric.
pub fn is_isomeric_two_sided(x: &DMatrix<f64>, omega: &Sampling2D) -> Result<bool> {
    Ok(is_isomeric(x, omega)? && is_isomeric(&x.transpose(), &omega.transpose())?)
}

/// `γ_Ω̄(X) = min_j 1/‖X·(X[Ω̄^j, :])^+‖²`.
pub fn relative_condition_number(x: &DMatrix<f64>, omega: &Sampling2D) -> Result<f64> {
    omega.check_dims(x)?;
    let tol = REL_TOL * operator_norm(x)?;
    (0..omega.cols)
        .into_par_iter()
        .map(|j| {
            let sub = select_rows(x, &omega.col_set(j));
            if sub.iter().all(|&v| v == 0.0) {
                return Err(Error::InvalidArgument(format!("rows sampled by column {} of X are all zero", j + 1)));
            }
            let p = x * pseudo_inverse(&sub, tol)?;
            Ok(1.0 / operator_norm(&p)?.powi(2))
        })
        .try_reduce(|| f64::INFINITY, |a, b| Ok(a.min(b)))
}

/// `min(γ_Ω̄(X), γ_{Ω̄^T}(X^T))`.
pub fn relative_condition_number_two_sided(x: &DMatrix<f64>, omega: &Sampling2D) -> Result<f64> {
    let a = relative_condition_number(x, omega)?;
    let b = relative_condition_number(&x.transpose(), &omega.transpose())?;
    Ok(a.min(b))
}

/// Rank (at `1e-9·σ_1`) and two-sided coherence
/// `max((m̄_1/r)·max_i ‖U_i‖², (m̄_2/r)·max_j ‖V_j‖²)` of a matrix.
pub fn matrix_coherence(x: &DMatrix<f64>) -> Result<(usize, f64)> {
    let (s, u, v) = thin_svd(x)?;
    let top = s.first().cloned().unwrap_or(0.0);
    if top == 0.0 {
        return Ok((0, 0.0));
    }
    let keep: Vec<usize> = (0..s.len()).filter(|&i| s[i] > REL_TOL * top).collect();
    let r = keep.len() as f64;
    let left = (0..x.nrows()).map(|i| keep.iter().map(|&c| u[(i, c)].powi(2)).sum::<f64>()).fold(0.0, f64::max);
    let right = (0..x.ncols()).map(|j| keep.iter().map(|&c| v[(j, c)].powi(2)).sum::<f64>()).fold(0.0, f64::max);
    Ok((keep.len(), (x.nrows() as f64 / r * left).max(x.ncols() as f64 / r * right)))
}

fn threshold(constant: f64, r_k: usize, mu_k: f64, m: usize, k: usize) -> f64 {
    let r = r_k.max(1) as f64;
    let mu = mu_k.max(1.0);
    (1.0 - constant * k as f64 / (mu * r * m as f64)).clamp(0.0, 1.0)
}

/// Sampling rate above which exact recovery is guaranteed:
/// `1 − 0.25k/(μ_k·r_k·m)`, clamped to `[0, 1]`.
pub fn noiseless_bound(r_k: usize, mu_k: f64, m: usize, k: usize) -> f64 {
    threshold(0.25, r_k, mu_k, m, k)
}

/// Noisy-case sampling threshold `1 − 0.22k/(μ_k·r_k·m)` and the error
/// bound `(1+√2)(38√k+2)ε`.
pub fn noisy_bound_and_error(r_k: usize, mu_k: f64, m: usize, k: usize, epsilon: f64) -> (f64, f64) {
    let err = (1.0 + 2f64.sqrt()) * (38.0 * (k as f64).sqrt() + 2.0) * epsilon;
    (threshold(0.22, r_k, mu_k, m, k), err)
}

/// Isomerism and relative condition of `A_k(L_0)` under `Ω_A`, with the
/// sampling thresholds for context.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualIsomerismReport {
    pub isomeric: bool,
    pub gamma: f64,
    pub rho0: f64,
    pub threshold_noiseless: f64,
    pub threshold_noisy: f64,
}

pub fn check_dual_isomerism(l0: &DenseTensor, kernel: &KernelShape, omega: &SamplingMask) -> Result<DualIsomerismReport> {
    let a = materialize(l0, kernel)?;
    let omega_a = Sampling2D::from_mask(&conv_sampling_set(omega, kernel)?)?;
    let spec = conv_spectrum(l0, kernel, DEFAULT_RANK_TOL)?;
    let (m, k) = (l0.len(), kernel.len());
    Ok(DualIsomerismReport {
        isomeric: is_isomeric_two_sided(&a, &omega_a)?,
        gamma: relative_condition_number_two_sided(&a, &omega_a)?,
        rho0: omega.rho0(),
        threshold_noiseless: noiseless_bound(spec.rank, spec.coherence, m, k),
        threshold_noisy: noisy_bound_and_error(spec.rank, spec.coherence, m, k, 0.0).0,
    })
}

/// Outcome of one random isomerism trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsomerismTrial {
    pub rows: usize,
    pub cols: usize,
    pub rank: usize,
    pub coherence: f64,
    /// Smallest observed fraction over rows and columns.
    pub rho: f64,
    pub required_rho: f64,
    pub isomeric: bool,
    pub gamma: f64,
}

impl IsomerismTrial {
    /// The trial met the hypothesis but not the conclusion.
    pub fn violates(&self, alpha: f64) -> bool {
        self.rho > self.required_rho && !(self.isomeric && self.gamma > alpha)
    }
}

/// Random checks of: `ρ > 1 − (1−α)/(μ_X r_X)` implies two-sided isomerism
/// and `γ > α`.
///
/// Each trial draws a random low-rank `X` (sides in `[8, max_side]`, rank up
/// to `max_rank`), then removes random entries as long as every row and
/// column keeps more than the required fraction. Trials run in parallel;
/// trial `t` uses stream `t` of a ChaCha8 generator keyed by `seed`.
pub fn isomerism_monte_carlo(trials: usize, alpha: f64, max_side: usize, max_rank: usize, seed: u64) -> Result<Vec<IsomerismTrial>> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::InvalidArgument(format!("alpha must lie in [0, 1), got {alpha}")));
    }
    if max_side < 8 || max_rank == 0 {
        return Err(Error::InvalidArgument("need max_side >= 8 and max_rank >= 1".into()));
    }
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t as u64);
            one_trial(&mut rng, alpha, max_side, max_rank)
        })
        .collect()
}

fn one_trial(rng: &mut ChaCha8Rng, alpha: f64, max_side: usize, max_rank: usize) -> Result<IsomerismTrial> {
    let rows = rng.random_range(8..=max_side);
    let cols = rng.random_range(8..=max_side);
    let r = rng.random_range(1..=max_rank.min(rows.min(cols)));
    let mut gauss = || -> f64 {
        // Box–Muller; the generator is the only randomness source
        let u: f64 = 1.0 - rng.random::<f64>();
        let v: f64 = rng.random();
        (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
    };
    let left = DMatrix::from_fn(rows, r, |_, _| gauss());
    let right = DMatrix::from_fn(r, cols, |_, _| gauss());
    let x = left * right;
    let (rank, mu) = matrix_coherence(&x)?;
    let required = 1.0 - (1.0 - alpha) / (mu * rank as f64);

    // keep strictly more than `required` of every row and column
    let min_row = (required * cols as f64).floor() as usize + 1;
    let min_col = (required * rows as f64).floor() as usize + 1;
    let mut row_count = vec![cols; rows];
    let mut col_count = vec![rows; cols];
    let mut observed = vec![true; rows * cols];
    for o in sample(rng, rows * cols, rows * cols) {
        let (i, j) = (o % rows, o / rows);
        if row_count[i] > min_row && col_count[j] > min_col {
            observed[o] = false;
            row_count[i] -= 1;
            col_count[j] -= 1;
        }
    }
    let omega = Sampling2D::new(rows, cols, observed)?;
    Ok(IsomerismTrial {
        rows,
        cols,
        rank,
        coherence: mu,
        rho: omega.min_fraction(),
        required_rho: required,
        isomeric: is_isomeric_two_sided(&x, &omega)?,
        gamma: relative_condition_number_two_sided(&x, &omega)?,
    })
}
