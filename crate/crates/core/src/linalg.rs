//! Small dense linear-algebra helpers shared by the coding-length modules.
//!
//! Everything here works on symmetric positive semidefinite matrices and
//! reports log-determinants in bits.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative tolerance below which a negative eigenvalue is treated as roundoff.
pub const PSD_TOLERANCE: f64 = 1e-10;

/// Returns `(a + aᵀ) / 2`.
pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

/// Eigenvalues of a symmetric matrix (only the symmetric part is used).
pub fn symmetric_eigenvalues(a: &DMatrix<f64>) -> DVector<f64> {
    if a.nrows() == 0 {
        return DVector::zeros(0);
    }
    SymmetricEigen::new(symmetrize(a)).eigenvalues
}

/// Eigenvalues of a PSD matrix with roundoff negatives clamped to zero.
///
/// Fails when the most negative eigenvalue is below
/// `-PSD_TOLERANCE * max(1, λ_max)`.
pub fn psd_eigenvalues(a: &DMatrix<f64>) -> Result<DVector<f64>> {
    let mut eig = symmetric_eigenvalues(a);
    if eig.is_empty() {
        return Ok(eig);
    }
    let max = eig.max();
    let min = eig.min();
    if min < -PSD_TOLERANCE * max.max(1.0) {
        return Err(Error::NotPositiveSemidefinite {
            min_eigenvalue: min,
            max_eigenvalue: max,
        });
    }
    eig.iter_mut().for_each(|l| *l = l.max(0.0));
    Ok(eig)
}

/// Checks that `a` is square and symmetric to `tol * max(1, max|a_ij|)`.
pub fn check_symmetric(a: &DMatrix<f64>, tol: f64) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::InvalidInput(format!(
            "expected a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("matrix has non-finite entries".into()));
    }
    let scale = a.amax().max(1.0);
    let asym = (a - a.transpose()).amax();
    if asym > tol * scale {
        return Err(Error::InvalidInput(format!(
            "matrix is not symmetric (max asymmetry {asym:e})"
        )));
    }
    Ok(())
}

/// `Σ log₂(1 + α λᵢ)` over PSD eigenvalues.
pub fn sum_log2_one_plus(eigenvalues: &DVector<f64>, alpha: f64) -> f64 {
    eigenvalues
        .iter()
        .map(|&l| (alpha * l).ln_1p())
        .sum::<f64>()
        / std::f64::consts::LN_2
}

/// `log₂ det(I + α·G)` for a symmetric PSD `G`, via its eigenvalues.
pub fn log2_det_identity_plus(gram: &DMatrix<f64>, alpha: f64) -> Result<f64> {
    let eig = psd_eigenvalues(gram)?;
    Ok(sum_log2_one_plus(&eig, alpha))
}

/// `log₂ det(I + α·W·Wᵀ)` evaluated on the smaller of `WWᵀ` and `WᵀW`.
pub fn log2_det_identity_plus_outer(w: &DMatrix<f64>, alpha: f64) -> f64 {
    if w.nrows() == 0 || w.ncols() == 0 {
        return 0.0;
    }
    let gram = if w.nrows() <= w.ncols() {
        w * w.transpose()
    } else {
        w.transpose() * w
    };
    // A product of a matrix with its own transpose is PSD; eigen roundoff
    // negatives are at the 1e-16 relative level and always clamped.
    let mut eig = symmetric_eigenvalues(&gram);
    eig.iter_mut().for_each(|l| *l = l.max(0.0));
    sum_log2_one_plus(&eig, alpha)
}

/// `log₂ det(A)` for symmetric positive definite `A` through a Cholesky factor.
///
/// Independent second route used to cross-check the eigenvalue path.
pub fn log2_det_cholesky(a: &DMatrix<f64>) -> Result<f64> {
    let chol = symmetrize(a).cholesky().ok_or(Error::NotPositiveSemidefinite {
        min_eigenvalue: f64::NAN,
        max_eigenvalue: f64::NAN,
    })?;
    let l = chol.l();
    Ok(2.0 * l.diagonal().iter().map(|d| d.log2()).sum::<f64>())
}

/// Singular values of `a` (any shape).
pub fn singular_values(a: &DMatrix<f64>) -> DVector<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return DVector::zeros(0);
    }
    let mut s = a.clone().svd(false, false).singular_values;
    s.as_mut_slice()
        .sort_by(|x, y| y.partial_cmp(x).unwrap_or(std::cmp::Ordering::Equal));
    s
}

/// Nuclear norm `‖A‖_*`.
pub fn nuclear_norm(a: &DMatrix<f64>) -> f64 {
    singular_values(a).sum()
}

/// Number of eigenvalues above `rel * λ_max` (0 for the zero matrix).
pub fn numerical_rank_psd(a: &DMatrix<f64>, rel: f64) -> usize {
    let eig = symmetric_eigenvalues(a);
    if eig.is_empty() {
        return 0;
    }
    let max = eig.max();
    if max <= 0.0 {
        return 0;
    }
    eig.iter().filter(|&&l| l > rel * max).count()
}

/// Subtracts the row means from every column; returns the centered copy and the mean.
pub fn center_columns(w: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>) {
    let m = w.ncols().max(1) as f64;
    let mean = w.column_sum() / m;
    let mut centered = w.clone();
    for mut col in centered.column_iter_mut() {
        col -= &mean;
    }
    (centered, mean)
}

/// `H K H` with `H = I − (1/m) 𝟙𝟙ᵀ`.
pub fn center_gram(k: &DMatrix<f64>) -> DMatrix<f64> {
    let m = k.nrows();
    if m == 0 {
        return k.clone();
    }
    let mf = m as f64;
    let row_means: Vec<f64> = (0..m).map(|i| k.row(i).sum() / mf).collect();
    let col_means: Vec<f64> = (0..m).map(|j| k.column(j).sum() / mf).collect();
    let total = row_means.iter().sum::<f64>() / mf;
    let mut out = DMatrix::zeros(m, m);
    for j in 0..m {
        for i in 0..m {
            out[(i, j)] = k[(i, j)] - row_means[i] - col_means[j] + total;
        }
    }
    symmetrize(&out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn clamps_roundoff_negatives() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1e-14]);
        let eig = psd_eigenvalues(&a).unwrap();
        assert!(eig.iter().all(|&l| l >= 0.0));
    }

    #[test]
    fn rejects_clearly_indefinite() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1e-3]);
        assert!(matches!(
            psd_eigenvalues(&a),
            Err(Error::NotPositiveSemidefinite { .. })
        ));
    }

    #[test]
    fn outer_form_matches_both_shapes() {
        let w = DMatrix::from_fn(3, 7, |i, j| ((i * 7 + j) as f64 * 0.37).sin());
        let wide = log2_det_identity_plus_outer(&w, 0.8);
        let tall = log2_det_identity_plus_outer(&w.transpose(), 0.8);
        assert_relative_eq!(wide, tall, max_relative = 1e-12);
    }

    #[test]
    fn centered_gram_matches_centered_data() {
        let w = DMatrix::from_fn(2, 5, |i, j| (i as f64 + 1.0) * (j as f64).cos() + 3.0);
        let (c, _) = center_columns(&w);
        let direct = c.transpose() * &c;
        let via = center_gram(&(w.transpose() * &w));
        assert!((direct - via).amax() < 1e-10);
    }

    #[test]
    fn nuclear_norm_of_diagonal() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, -2.0, 0.5]));
        assert_relative_eq!(nuclear_norm(&a), 5.5, epsilon = 1e-12);
    }
}
