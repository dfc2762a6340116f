//! Small dense linear-algebra helpers shared by the covariance, likelihood
//! and prediction code.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

pub(crate) const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Cholesky factorization that reports failure as an [`Error::Numerical`].
pub fn cholesky(m: &DMatrix<f64>, what: &str) -> Result<Cholesky<f64, Dyn>> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(format!("{what} has non-finite entries")));
    }
    m.clone()
        .cholesky()
        .ok_or_else(|| Error::Numerical(format!("{what} is not positive definite")))
}

/// Replace `m` by `(m + mᵀ) / 2`.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    debug_assert_eq!(n, m.ncols());
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Sum of the log-diagonal of a Cholesky factor, i.e. `0.5 * log|A|`.
pub fn half_log_det(chol: &Cholesky<f64, Dyn>) -> f64 {
    chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum()
}

/// Quadratic form `xᵀ A⁻¹ x` from the Cholesky factor of `A`.
pub fn inv_quad(chol: &Cholesky<f64, Dyn>, x: &DVector<f64>) -> f64 {
    let z = chol
        .l_dirty()
        .solve_lower_triangular(x)
        .expect("cholesky factor has a positive diagonal");
    z.norm_squared()
}

/// Zero-mean multivariate normal log-density of `x` under the covariance
/// factored by `chol`.
pub fn mvn_logpdf(chol: &Cholesky<f64, Dyn>, x: &DVector<f64>) -> f64 {
    let n = x.len() as f64;
    -0.5 * (n * LN_2PI + inv_quad(chol, x)) - half_log_det(chol)
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.kronecker(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_normal_logpdf_at_zero() {
        let chol = cholesky(&DMatrix::identity(1, 1), "unit").unwrap();
        let lp = mvn_logpdf(&chol, &DVector::zeros(1));
        assert!((lp + 0.918_938_533_204_672_7).abs() < 1e-12);
    }

    #[test]
    fn non_pd_is_an_error() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(cholesky(&m, "m"), Err(Error::Numerical(_))));
    }

    #[test]
    fn symmetrize_averages() {
        let mut m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 4.0, 1.0]);
        symmetrize(&mut m);
        assert_eq!(m[(0, 1)], 3.0);
        assert_eq!(m[(1, 0)], 3.0);
    }
}
