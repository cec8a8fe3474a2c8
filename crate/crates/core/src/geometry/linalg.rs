use nalgebra::{DMatrix, SymmetricEigen};

/// Eigenvalues below this multiple of the trace are treated as zero.
pub const PINV_RELATIVE_TOLERANCE: f64 = 1e-10;

/// `W` with `Wᵀ M W = I_k`, spanning the numerically nonzero eigenspace of the
/// symmetric positive semidefinite `M`. `None` when that space is trivial.
pub fn whitening(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let eig = SymmetricEigen::new(m.clone());
    let tol = PINV_RELATIVE_TOLERANCE * m.trace().max(0.0);
    let keep: Vec<usize> = (0..eig.eigenvalues.len())
        .filter(|&k| eig.eigenvalues[k] > tol)
        .collect();
    if keep.is_empty() || m.trace() <= 0.0 {
        return None;
    }
    let mut w = DMatrix::zeros(m.nrows(), keep.len());
    for (c, &k) in keep.iter().enumerate() {
        let s = eig.eigenvalues[k].sqrt();
        w.set_column(c, &(eig.eigenvectors.column(k) / s));
    }
    Some(w)
}

/// Moore-Penrose inverse of a symmetric positive semidefinite matrix.
/// The flag is set when some eigenvalue fell under the tolerance.
pub fn pseudo_inverse(m: &DMatrix<f64>) -> (DMatrix<f64>, bool) {
    let eig = SymmetricEigen::new(m.clone());
    let tol = PINV_RELATIVE_TOLERANCE * m.trace().abs();
    let mut out = DMatrix::zeros(m.nrows(), m.ncols());
    let mut truncated = false;
    for k in 0..eig.eigenvalues.len() {
        let lambda = eig.eigenvalues[k];
        if lambda > tol && lambda > 0.0 {
            let u = eig.eigenvectors.column(k);
            out += (u * u.transpose()) / lambda;
        } else {
            truncated = true;
        }
    }
    (out, truncated)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn whitening_gives_identity() {
        let m = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let w = whitening(&m).unwrap();
        let id = w.transpose() * &m * &w;
        assert_relative_eq!(id, DMatrix::identity(2, 2), epsilon = 1e-12);
    }

    #[test]
    fn rank_deficient_pinv() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let (p, truncated) = pseudo_inverse(&m);
        assert!(truncated);
        assert_relative_eq!(&m * &p * &m, m, epsilon = 1e-12);
        assert_eq!(whitening(&m).unwrap().ncols(), 1);
        assert!(whitening(&DMatrix::zeros(2, 2)).is_none());
    }
}
