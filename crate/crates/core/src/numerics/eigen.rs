use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative asymmetry tolerated by [`sym_eig_extremes`].
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Largest and smallest eigenvalues of a symmetric matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigExtremes {
    pub lambda_max: f64,
    pub lambda_min: f64,
}

/// Extreme eigenvalues of a dense symmetric matrix.
///
/// The input is checked for symmetry (max `|m_ij − m_ji|` relative to max `|m_ij|`)
/// and then decomposed via Householder tridiagonalization and implicit QR.
pub fn sym_eig_extremes(m: &DMatrix<f64>) -> Result<EigExtremes> {
    let n = m.nrows();
    if n == 0 || m.ncols() != n {
        return Err(Error::Shape(format!("expected a non-empty square matrix, got {}x{}", n, m.ncols())));
    }
    let scale = m.amax();
    let mut asym = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            asym = asym.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    if asym > SYMMETRY_TOL * scale {
        return Err(Error::Shape(format!(
            "matrix asymmetry {asym:e} exceeds {SYMMETRY_TOL:e} relative to {scale:e}"
        )));
    }
    let eig = SymmetricEigen::new(m.clone());
    let (lambda_min, lambda_max) = eig
        .eigenvalues
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    Ok(EigExtremes { lambda_max, lambda_min })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RngStream;
    use rand::Rng;

    #[test]
    fn small_reference_matrices() {
        let id = DMatrix::<f64>::identity(3, 3);
        let e = sym_eig_extremes(&id).unwrap();
        assert!((e.lambda_max - 1.0).abs() < 1e-14 && (e.lambda_min - 1.0).abs() < 1e-14);

        let diag = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![4.0, 1.0, 0.25]));
        let e = sym_eig_extremes(&diag).unwrap();
        assert!((e.lambda_max - 4.0).abs() < 1e-14 && (e.lambda_min - 0.25).abs() < 1e-14);

        let v = nalgebra::DVector::from_vec(vec![1.0, 2.0, 2.0]);
        let rank1 = &v * v.transpose();
        let e = sym_eig_extremes(&rank1).unwrap();
        assert!((e.lambda_max - 9.0).abs() < 1e-12);
        assert!(e.lambda_min.abs() < 1e-12);
    }

    #[test]
    fn rejects_asymmetric_and_non_square() {
        let mut m = DMatrix::<f64>::identity(3, 3);
        m[(0, 1)] = 1e-3;
        assert!(matches!(sym_eig_extremes(&m), Err(Error::Shape(_))));
        assert!(sym_eig_extremes(&DMatrix::<f64>::zeros(2, 3)).is_err());
    }

    #[test]
    fn rayleigh_quotients_lie_between_extremes() {
        let mut rng = RngStream::new(11, 0);
        for size in [2usize, 5, 17, 64] {
            let a = DMatrix::from_fn(size, size, |_, _| rng.random::<f64>() - 0.5);
            let m = &a + a.transpose();
            let e = sym_eig_extremes(&m).unwrap();
            for _ in 0..100 {
                let x = nalgebra::DVector::from_fn(size, |_, _| rng.random::<f64>() - 0.5);
                let rq = (x.transpose() * &m * &x)[(0, 0)] / x.norm_squared();
                assert!(rq <= e.lambda_max + 1e-10 && rq >= e.lambda_min - 1e-10);
            }
        }
    }
}
