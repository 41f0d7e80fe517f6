//! Small dense linear algebra on top of `nalgebra`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Relative tolerance used by [`is_symmetric`].
pub const SYMMETRY_RTOL: f64 = 1e-12;

/// Pivots smaller than this times `‖A‖_F` are treated as zero.
pub const PIVOT_RTOL: f64 = 1e-13;

pub fn is_symmetric(m: &Matrix) -> bool {
    if !m.is_square() {
        return false;
    }
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let (a, b) = (m[(i, j)], m[(j, i)]);
            if (a - b).abs() > SYMMETRY_RTOL * (1.0 + a.abs()) {
                return false;
            }
        }
    }
    true
}

/// `(M + Mᵀ) / 2`.
pub fn symmetrize(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

fn lu_checked(a: &Matrix) -> Result<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>> {
    if !a.is_square() {
        return Err(Error::dim(a.nrows(), a.ncols()));
    }
    let lu = a.clone().lu();
    let threshold = PIVOT_RTOL * a.norm();
    let u = lu.u();
    if a.nrows() > 0 && (0..u.nrows()).any(|i| u[(i, i)].abs() <= threshold) {
        return Err(Error::SingularMatrix);
    }
    Ok(lu)
}

/// Solves `A x = b` by partial-pivot LU.
pub fn solve_linear(a: &Matrix, b: &Vector) -> Result<Vector> {
    let lu = lu_checked(a)?;
    if b.len() != a.nrows() {
        return Err(Error::dim(a.nrows(), b.len()));
    }
    lu.solve(b).ok_or(Error::SingularMatrix)
}

/// Solves `A X = B` for a matrix right-hand side.
pub fn solve_matrix(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    let lu = lu_checked(a)?;
    if b.nrows() != a.nrows() {
        return Err(Error::dim(a.nrows(), b.nrows()));
    }
    lu.solve(b).ok_or(Error::SingularMatrix)
}

pub fn inverse(a: &Matrix) -> Result<Matrix> {
    solve_matrix(a, &Matrix::identity(a.nrows(), a.nrows()))
}

fn eigenvalues(m: &Matrix) -> Result<Vector> {
    if !is_symmetric(m) {
        return Err(Error::NotSymmetric);
    }
    Ok(nalgebra::SymmetricEigen::new(symmetrize(m)).eigenvalues)
}

/// Largest eigenvalue of a symmetric matrix (`-inf` for the empty matrix).
pub fn sym_eig_max(m: &Matrix) -> Result<f64> {
    Ok(eigenvalues(m)?.iter().copied().fold(f64::NEG_INFINITY, f64::max))
}

/// Smallest eigenvalue of a symmetric matrix (`+inf` for the empty matrix).
pub fn sym_eig_min(m: &Matrix) -> Result<f64> {
    Ok(eigenvalues(m)?.iter().copied().fold(f64::INFINITY, f64::min))
}

/// `λ_max(M) ≤ tol`.
pub fn is_nsd(m: &Matrix, tol: f64) -> Result<bool> {
    Ok(sym_eig_max(m)? <= tol)
}

/// `λ_min(M) ≥ -tol`.
pub fn is_psd(m: &Matrix, tol: f64) -> Result<bool> {
    Ok(sym_eig_min(m)? >= -tol)
}

/// Largest singular value.
pub fn spectral_norm(m: &Matrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

pub fn inf_norm(v: &Vector) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

/// Serde adapter storing a matrix as a list of rows.
pub mod serde_rows {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use super::Matrix;

    pub fn serialize<S: Serializer>(m: &Matrix, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = m.row_iter().map(|r| r.iter().copied().collect()).collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Matrix, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != m) {
            return Err(serde::de::Error::custom("matrix rows have different lengths"));
        }
        Ok(Matrix::from_fn(n, m, |i, j| rows[i][j]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solve_identity() {
        let x = solve_linear(&Matrix::identity(3, 3), &Vector::from_vec(vec![1.0, 2.0, 3.0])).unwrap();
        assert_eq!(x.as_slice(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn solve_diagonal() {
        let a = Matrix::from_diagonal(&Vector::from_vec(vec![2.0, 4.0]));
        let x = solve_linear(&a, &Vector::from_vec(vec![2.0, 4.0])).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn solve_rank_deficient() {
        let a = Matrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let r = solve_linear(&a, &Vector::from_vec(vec![1.0, 0.0]));
        assert!(matches!(r, Err(Error::SingularMatrix)));
    }

    #[test]
    fn solve_rejects_bad_shapes() {
        let a = Matrix::zeros(2, 3);
        assert!(matches!(
            solve_linear(&a, &Vector::zeros(2)),
            Err(Error::DimensionMismatch { .. })
        ));
        let a = Matrix::identity(2, 2);
        assert!(solve_linear(&a, &Vector::zeros(3)).is_err());
    }

    #[test]
    fn eig_max_examples() {
        let d = Matrix::from_diagonal(&Vector::from_vec(vec![1.0, 2.0, 3.0]));
        assert!((sym_eig_max(&d).unwrap() - 3.0).abs() < 1e-12);
        assert_eq!(sym_eig_max(&Matrix::zeros(2, 2)).unwrap(), 0.0);
        let s = Matrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!((sym_eig_max(&s).unwrap() - 1.0).abs() < 1e-12);
        assert!((sym_eig_min(&s).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn eig_rejects_asymmetric() {
        let m = Matrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        assert!(matches!(sym_eig_max(&m), Err(Error::NotSymmetric)));
        assert!(matches!(is_nsd(&m, 0.0), Err(Error::NotSymmetric)));
    }

    #[test]
    fn nsd_examples() {
        assert!(is_nsd(&(-Matrix::identity(2, 2)), 0.0).unwrap());
        let m = Matrix::from_diagonal(&Vector::from_vec(vec![-1.0, 0.5]));
        assert!(!is_nsd(&m, 0.0).unwrap());
        assert!(is_nsd(&Matrix::zeros(2, 2), 1e-9).unwrap());
    }

    #[test]
    fn spectral_norm_of_diagonal() {
        let m = Matrix::from_diagonal(&Vector::from_vec(vec![-3.0, 2.0]));
        assert!((spectral_norm(&m) - 3.0).abs() < 1e-12);
    }
}
