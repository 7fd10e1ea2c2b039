//! Small dense linear-algebra helpers shared by the operator and solver code.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Eigen-decomposition of a symmetric matrix, eigenvalues sorted descending
/// with eigenvector columns permuted to match.
pub(crate) fn sym_eig_desc(g: DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = g.nrows();
    let eig = SymmetricEigen::try_new(g, f64::EPSILON, 10_000 + 100 * n)
        .ok_or_else(|| Error::Numerical(format!("symmetric eigensolver did not converge on a {n}x{n} Gram matrix")))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap_or(std::cmp::Ordering::Equal));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok((values, vectors))
}

/// Thin SVD `A = U·diag(σ)·V^T` with `σ` nonincreasing.
///
/// Computed with faer; nalgebra's SVD returns wrong factors on some
/// rank-deficient inputs (an all-ones 5×5 matrix, for one).
pub(crate) fn thin_svd(a: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>, DMatrix<f64>)> {
    let (r, c) = a.shape();
    if r == 0 || c == 0 {
        return Ok((Vec::new(), DMatrix::zeros(r, 0), DMatrix::zeros(c, 0)));
    }
    let fm = faer::Mat::<f64>::from_fn(r, c, |i, j| a[(i, j)]);
    let svd = fm
        .thin_svd()
        .map_err(|e| Error::Numerical(format!("SVD did not converge on a {r}x{c} matrix: {e:?}")))?;
    let s = svd.S().column_vector();
    let p = r.min(c);
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&x, &y| s[y].total_cmp(&s[x]));
    let (fu, fv) = (svd.U(), svd.V());
    let u = DMatrix::from_fn(r, p, |i, j| fu[(i, order[j])]);
    let v = DMatrix::from_fn(c, p, |i, j| fv[(i, order[j])]);
    Ok((order.iter().map(|&i| s[i]).collect(), u, v))
}

/// Singular values, nonincreasing.
pub(crate) fn singular_values(a: &DMatrix<f64>) -> Result<Vec<f64>> {
    Ok(thin_svd(a)?.0)
}

/// Moore–Penrose pseudo-inverse with singular values at or below `abs_tol` dropped.
pub(crate) fn pseudo_inverse(a: &DMatrix<f64>, abs_tol: f64) -> Result<DMatrix<f64>> {
    let (s, u, v) = thin_svd(a)?;
    let keep = s.iter().take_while(|&&x| x > abs_tol).count();
    let mut vs = v.columns(0, keep).into_owned();
    for (j, &x) in s.iter().take(keep).enumerate() {
        vs.column_mut(j).scale_mut(1.0 / x);
    }
    Ok(vs * u.columns(0, keep).transpose())
}

/// Spectral norm.
pub(crate) fn operator_norm(a: &DMatrix<f64>) -> Result<f64> {
    Ok(singular_values(a)?.first().cloned().unwrap_or(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svd_of_rank_deficient_matrices() {
        for (r, c) in [(4, 6), (6, 4), (5, 5), (1, 3)] {
            let a = DMatrix::from_element(r, c, 1.0);
            let (s, u, v) = thin_svd(&a).unwrap();
            assert!((s[0] - ((r * c) as f64).sqrt()).abs() < 1e-12);
            assert!(s[1..].iter().all(|&x| x < 1e-12));
            let rebuilt = &u * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(s)) * v.transpose();
            assert!((rebuilt - &a).norm() < 1e-12);
        }
    }

    #[test]
    fn pseudo_inverse_properties() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 0.0, 0.0]);
        let p = pseudo_inverse(&a, 1e-12).unwrap();
        assert!((&a * &p * &a - &a).norm() < 1e-12);
        assert!((&p * &a * &p - &p).norm() < 1e-12);
        let sym = &a * &p;
        assert!((&sym - sym.transpose()).norm() < 1e-12);
    }
}
