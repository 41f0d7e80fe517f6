#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use tvfilter::linalg::{Matrix, Vector};
use tvfilter::problem::{rng_from_seed, standard_normal, QuadraticCost};

pub fn rng(seed: u64) -> ChaCha8Rng {
    rng_from_seed(seed)
}

pub fn gaussian_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> Matrix {
    let v = standard_normal(rng, rows * cols);
    Matrix::from_column_slice(rows, cols, v.as_slice())
}

/// Haar-like random orthogonal matrix from a QR factorization.
pub fn orthogonal(rng: &mut impl Rng, n: usize) -> Matrix {
    gaussian_matrix(rng, n, n).qr().q()
}

/// Symmetric matrix with the given spectrum.
pub fn with_spectrum(rng: &mut impl Rng, eig: &[f64]) -> Matrix {
    let q = orthogonal(rng, eig.len());
    let d = Matrix::from_diagonal(&Vector::from_column_slice(eig));
    let m = &q * d * q.transpose();
    (&m + m.transpose()) * 0.5
}

/// SPD matrix with eigenvalues in `[mu, lip]`, both endpoints attained when `n ≥ 2`.
pub fn spd(rng: &mut impl Rng, n: usize, mu: f64, lip: f64) -> Matrix {
    let mut eig: Vec<f64> = (0..n).map(|_| rng.random_range(mu..=lip)).collect();
    eig[0] = mu;
    if n > 1 {
        eig[1] = lip;
    }
    with_spectrum(rng, &eig)
}

/// `½xᵀHx − xᵀ(b + By)` with random `b`, `B` and the given Hessian.
pub fn quadratic(rng: &mut impl Rng, h: Matrix, d: usize) -> QuadraticCost {
    let n = h.nrows();
    let b = standard_normal(rng, n);
    let coupling = gaussian_matrix(rng, n, d);
    QuadraticCost::new(h, b, coupling).unwrap()
}

/// Central-difference Jacobian of `f` at `x`.
pub fn fd_jacobian(f: impl Fn(&Vector) -> Vector, x: &Vector, eps: f64) -> Matrix {
    let n = x.len();
    let m = f(x).len();
    let mut jac = Matrix::zeros(m, n);
    for j in 0..n {
        let mut plus = x.clone();
        let mut minus = x.clone();
        plus[j] += eps;
        minus[j] -= eps;
        jac.set_column(j, &((f(&plus) - f(&minus)) / (2.0 * eps)));
    }
    jac
}

pub fn uniform_vec(rng: &mut impl Rng, n: usize, lo: f64, hi: f64) -> Vector {
    Vector::from_fn(n, |_, _| rng.random_range(lo..hi))
}
