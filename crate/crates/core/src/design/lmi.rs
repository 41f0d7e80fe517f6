use serde::{Deserialize, Serialize};

use super::bound::WorstCaseParams;
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::operators::zeta_xi;

/// Relative tolerance of the feasibility tests.
pub const LMI_TOL: f64 = 1e-12;

/// Scalar data of the structured design problem (`Q = qI`, `R = rI`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LmiScalarParams {
    /// `ζ_P`.
    pub omega1: f64,
    /// `ζ_C`, so that `ω₁ω₂ = ζ_C ζ_P`.
    pub omega2: f64,
    pub q: f64,
    pub r: f64,
    pub delta: f64,
}

impl LmiScalarParams {
    /// `q = √2 ξ_P τ_μ`, `r = √2 (ζ_C ξ_P τ_μ + σ_c)`.
    pub fn from_worst_case(wc: &WorstCaseParams) -> Self {
        let (zp, xp) = (wc.zeta_p(), wc.xi_p());
        let zc = wc.zeta_c();
        Self {
            omega1: zp,
            omega2: zc,
            q: 2f64.sqrt() * xp * wc.tau_mu,
            r: 2f64.sqrt() * (zc * xp * wc.tau_mu + wc.sigma_c),
            delta: wc.delta,
        }
    }

    /// Noise scales attributed separately to prediction and correction.
    ///
    /// `tau_mu` is the prediction error expressed in `x` units, `sigma_c` the
    /// accumulated correction noise. The cross term `ζ_C ξ_P τ_μ` of
    /// [`from_worst_case`](Self::from_worst_case) is left out.
    pub fn from_noise_scales(
        factors: crate::operators::ContractionFactors,
        p: usize,
        c: usize,
        delta: f64,
        tau_mu: f64,
        sigma_c: f64,
    ) -> Self {
        let (zp, xp) = zeta_xi(p, factors.rho_p);
        let (zc, _) = zeta_xi(c, factors.rho_c);
        Self {
            omega1: zp,
            omega2: zc,
            q: 2f64.sqrt() * xp * tau_mu,
            r: 2f64.sqrt() * sigma_c,
            delta,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega1 >= 0.0 && self.omega1 < 1.0) && !(self.omega1 == 1.0 && self.omega2 < 1.0) {
            return Err(Error::InvalidParams(format!("omega1 = {} outside [0, 1]", self.omega1)));
        }
        let prod = self.omega1 * self.omega2;
        if !(self.omega2 >= 0.0 && prod < 1.0) {
            return Err(Error::DivergentConfig(prod));
        }
        if [self.q, self.r, self.delta].iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::InvalidParams("q, r and delta must be nonnegative".into()));
        }
        Ok(())
    }

    /// `λ₁ω₁² + λ₂ω₁²ω₂²`.
    pub fn budget(&self, lambda1: f64, lambda2: f64) -> f64 {
        let w1 = self.omega1 * self.omega1;
        lambda1 * w1 + lambda2 * w1 * self.omega2 * self.omega2
    }
}

/// `num / den`, with `0/0 = 0` and `x/0 = +inf`.
pub(crate) fn ratio(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else if den > 0.0 {
        num / den
    } else {
        f64::INFINITY
    }
}

/// Left side of the rank-one reduction of the block condition.
pub(crate) fn schur_sum(p: f64, w: f64, lambda1: f64, lambda2: f64, gamma2sq: f64, q: f64, r: f64) -> f64 {
    let u = p - w;
    ratio(u * u, lambda1) + ratio(w * w, lambda2) + ratio(q * q * u * u + r * r * w * w, gamma2sq)
}

/// Feasibility of the scaled-identity point `X = pI`, `W = wI` at rate `rho`.
pub fn lmi_feasible_scalar(
    p: f64,
    w: f64,
    lambda1: f64,
    lambda2: f64,
    gamma2sq: f64,
    params: &LmiScalarParams,
    rho: f64,
) -> bool {
    if !(p > 0.0 && lambda1 >= 0.0 && lambda2 >= 0.0 && gamma2sq >= 0.0) {
        return false;
    }
    let tol = LMI_TOL * (1.0 + p);
    rho * rho * p >= params.budget(lambda1, lambda2) - tol
        && p >= 1.0 - tol
        && schur_sum(p, w, lambda1, lambda2, gamma2sq, params.q, params.r) <= p + tol
}

/// The `5n × 5n` block matrix whose negative semidefiniteness certifies a gain.
///
/// Block rows: `λ₁`, `λ₂`, and two `γ₂²` rows against the last block column
/// `[X − Wᵀ; Wᵀ; Q(X − Wᵀ); RWᵀ]`, closed by `−X`.
#[allow(clippy::too_many_arguments)]
pub fn lmi_block_matrix(
    x: &Matrix,
    w: &Matrix,
    lambda1: f64,
    lambda2: f64,
    gamma2sq: f64,
    q: &Matrix,
    r: &Matrix,
) -> Result<Matrix> {
    let n = x.nrows();
    for m in [x, w, q, r] {
        if m.nrows() != n || m.ncols() != n {
            return Err(Error::dim(n, m.nrows()));
        }
    }
    let eye = Matrix::identity(n, n);
    let wt = w.transpose();
    let x_wt = x - &wt;
    let column = [x_wt.clone(), wt.clone(), q * &x_wt, r * &wt];
    let diag = [-lambda1, -lambda2, -gamma2sq, -gamma2sq];
    let mut m = Matrix::zeros(5 * n, 5 * n);
    for (b, (d, col)) in diag.iter().zip(&column).enumerate() {
        m.view_mut((b * n, b * n), (n, n)).copy_from(&(&eye * *d));
        m.view_mut((b * n, 4 * n), (n, n)).copy_from(col);
        m.view_mut((4 * n, b * n), (n, n)).copy_from(&col.transpose());
    }
    m.view_mut((4 * n, 4 * n), (n, n)).copy_from(&(-x));
    Ok(m)
}

fn rel_tol(m: &Matrix) -> f64 {
    LMI_TOL * (1.0 + m.amax())
}

/// Literal matrix conditions: `ρ²X ⪰ (λ₁ω₁² + λ₂ω₁²ω₂²)I`, `I ⪯ X ⪯ γ₁²I`, block matrix `⪯ 0`.
#[allow(clippy::too_many_arguments)]
pub fn lmi_feasible_matrix(
    x: &Matrix,
    w: &Matrix,
    lambda1: f64,
    lambda2: f64,
    gamma1sq: f64,
    gamma2sq: f64,
    q: &Matrix,
    r: &Matrix,
    params: &LmiScalarParams,
    rho: f64,
) -> Result<bool> {
    if !linalg::is_symmetric(x) {
        return Err(Error::NotSymmetric);
    }
    if !(lambda1 >= 0.0 && lambda2 >= 0.0 && gamma2sq >= 0.0) {
        return Ok(false);
    }
    let n = x.nrows();
    let eye = Matrix::identity(n, n);
    let decay = x * (rho * rho) - &eye * params.budget(lambda1, lambda2);
    let lower = x - &eye;
    let upper = &eye * gamma1sq - x;
    for m in [&decay, &lower, &upper] {
        let m = linalg::symmetrize(m);
        if !linalg::is_psd(&m, rel_tol(&m))? {
            return Ok(false);
        }
    }
    let block = linalg::symmetrize(&lmi_block_matrix(x, w, lambda1, lambda2, gamma2sq, q, r)?);
    linalg::is_nsd(&block, rel_tol(&block))
}

/// Gridded conditions of the parameter-varying design.
///
/// Endpoint conditions on `X₀ + X₁`, `X₀` and `X₁`, and the block condition with
/// `Y(θ) = X₀ − νX₁ + θX₁`, `W(θ)`, `Q(θ) = Q₀ + θQ₁` at every grid point.
#[allow(clippy::too_many_arguments)]
pub fn lmi_feasible_lpv(
    x0: &Matrix,
    x1: &Matrix,
    w0: &Matrix,
    w1: &Matrix,
    nu: f64,
    lambda1: f64,
    lambda2: f64,
    gamma1sq: f64,
    gamma2sq: f64,
    q0: &Matrix,
    q1: &Matrix,
    r: &Matrix,
    params: &LmiScalarParams,
    rho: f64,
    theta_grid: &[f64],
) -> Result<bool> {
    let n = x0.nrows();
    let eye = Matrix::identity(n, n);
    let x_end = x0 + x1;
    let conditions = [
        &x_end * (rho * rho) - &eye * params.budget(lambda1, lambda2),
        &x_end - &eye,
        &eye * gamma1sq - x0,
        -x1,
    ];
    for m in &conditions {
        let m = linalg::symmetrize(m);
        if !linalg::is_psd(&m, rel_tol(&m))? {
            return Ok(false);
        }
    }
    for &theta in theta_grid {
        let y = x0 - x1 * nu + x1 * theta;
        let w = w0 + w1 * theta;
        let q = q0 + q1 * theta;
        let block = linalg::symmetrize(&lmi_block_matrix(&y, &w, lambda1, lambda2, gamma2sq, &q, r)?);
        if !linalg::is_nsd(&block, rel_tol(&block))? {
            return Ok(false);
        }
    }
    Ok(true)
}
