//! Extended Kalman filter over the prediction and correction maps (`g ≡ 0`).
//!
//! The state transition is the prediction map `Φ` and the measurement is the
//! correction residual `Ψ`, whose target value is zero on the optimal trajectory.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Vector};
use crate::operators::{
    correct_psi, gain_blend, predict_phi, predictor_jacobian, DataHistory, PredictorKind,
    StepSizes,
};
use crate::problem::{Regularizer, SmoothCost};

#[derive(Clone, Debug, PartialEq)]
pub struct EkfState {
    /// `x_{k|k−1}`
    pub x_pred: Vector,
    /// `P_{k|k−1}`
    pub p_pred: Matrix,
    /// `x_{k−1}`, the last corrected iterate.
    pub x_corr: Vector,
    pub p_corr: Matrix,
    pub k: usize,
}

impl EkfState {
    /// `x_{1|0} = 0`, `P_{1|0} = I`.
    pub fn new(n: usize) -> Self {
        Self {
            x_pred: Vector::zeros(n),
            p_pred: Matrix::identity(n, n),
            x_corr: Vector::zeros(n),
            p_corr: Matrix::identity(n, n),
            k: 0,
        }
    }

    pub fn with_initial(x0: Vector, p0: Matrix) -> Result<Self> {
        let n = x0.len();
        if p0.nrows() != n || p0.ncols() != n {
            return Err(Error::dim(n, p0.nrows()));
        }
        if !linalg::is_psd(&p0, 1e-9)? {
            return Err(Error::InvalidParams("initial covariance is not PSD".into()));
        }
        Ok(Self {
            x_corr: x0.clone(),
            x_pred: x0,
            p_corr: p0.clone(),
            p_pred: p0,
            k: 0,
        })
    }
}

type CovFn = Arc<dyn Fn(usize) -> Matrix + Send + Sync>;

/// Process covariance `Q_k` and measurement covariance `R_k`.
#[derive(Clone)]
pub struct CovModel {
    q: CovFn,
    r: CovFn,
}

impl fmt::Debug for CovModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CovModel")
            .field("q0", &(self.q)(0))
            .field("r0", &(self.r)(0))
            .finish()
    }
}

impl CovModel {
    pub fn constant(q: Matrix, r: Matrix) -> Result<Self> {
        for m in [&q, &r] {
            if !linalg::is_psd(m, 1e-9)? {
                return Err(Error::InvalidParams("covariance is not PSD".into()));
            }
        }
        Ok(Self {
            q: Arc::new(move |_| q.clone()),
            r: Arc::new(move |_| r.clone()),
        })
    }

    pub fn isotropic(n: usize, q: f64, r: f64) -> Result<Self> {
        Self::constant(Matrix::identity(n, n) * q, Matrix::identity(n, n) * r)
    }

    /// Time-varying covariances; the caller guarantees symmetry and PSD.
    pub fn from_fns(
        q: impl Fn(usize) -> Matrix + Send + Sync + 'static,
        r: impl Fn(usize) -> Matrix + Send + Sync + 'static,
    ) -> Self {
        Self {
            q: Arc::new(q),
            r: Arc::new(r),
        }
    }

    pub fn q(&self, k: usize) -> Matrix {
        (self.q)(k)
    }

    pub fn r(&self, k: usize) -> Matrix {
        (self.r)(k)
    }
}

/// Sample covariance of zero-mean error samples, or its `tr/n · I` scalar summary.
pub fn estimate_covariance(samples: &[Vector], full: bool) -> Result<Matrix> {
    let first = samples.first().ok_or(Error::EmptyInput)?;
    let n = first.len();
    let mut acc = Matrix::zeros(n, n);
    for s in samples {
        if s.len() != n {
            return Err(Error::dim(n, s.len()));
        }
        acc += s * s.transpose();
    }
    acc /= samples.len() as f64;
    if full {
        Ok(linalg::symmetrize(&acc))
    } else {
        Ok(Matrix::identity(n, n) * (acc.trace() / n.max(1) as f64))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EkfOptions {
    /// Joseph-form covariance update `(I−KH)P(I−KH)ᵀ + KRKᵀ`.
    pub joseph: bool,
    /// Test hook: use `K = I` instead of the Kalman gain.
    pub force_identity_gain: bool,
}

fn check_dims(intermediates: &[Vector], n: usize) -> Result<()> {
    match intermediates.iter().find(|x| x.len() != n) {
        Some(x) => Err(Error::dim(n, x.len())),
        None => Ok(()),
    }
}

/// `F = ∏_{p=1}^{P} (I − α ∇ₓJ(x^{P−p}))`, the Jacobian of `Φ`.
pub fn jac_prediction(
    cost: &dyn SmoothCost,
    kind: PredictorKind,
    history: &DataHistory,
    intermediates: &[Vector],
    alpha: f64,
) -> Result<Matrix> {
    let n = cost.dim_x();
    check_dims(intermediates, n)?;
    let eye = Matrix::identity(n, n);
    let mut f = eye.clone();
    for x in intermediates.iter().rev() {
        f *= &eye - predictor_jacobian(kind, cost, history, x)? * alpha;
    }
    Ok(f)
}

/// `H = I − ∏_{c=1}^{C} (I − β ∇ₓₓf(x^{C−c}; y))`.
///
/// This is the Jacobian of `−Ψ`; the filter compares `Ψ` against the target
/// value zero, so the two sign flips cancel in the update.
pub fn jac_correction(
    cost: &dyn SmoothCost,
    y: &Vector,
    intermediates: &[Vector],
    beta: f64,
) -> Result<Matrix> {
    let n = cost.dim_x();
    check_dims(intermediates, n)?;
    let eye = Matrix::identity(n, n);
    let mut prod = eye.clone();
    for x in intermediates.iter().rev() {
        prod *= &eye - cost.hess(x, y) * beta;
    }
    Ok(eye - prod)
}

/// One correction then one prediction.
///
/// `history` is the data used to predict time `k+1`, normally including `y_k`.
#[allow(clippy::too_many_arguments)]
pub fn ekf_step(
    state: &EkfState,
    cost: &dyn SmoothCost,
    kind: PredictorKind,
    history: &DataHistory,
    steps: StepSizes,
    p: usize,
    c: usize,
    cov: &CovModel,
    y_k: &Vector,
    opts: EkfOptions,
) -> Result<EkfState> {
    let n = cost.dim_x();
    if state.x_pred.len() != n {
        return Err(Error::dim(n, state.x_pred.len()));
    }
    if y_k.len() != cost.dim_y() {
        return Err(Error::dim(cost.dim_y(), y_k.len()));
    }
    let eye = Matrix::identity(n, n);
    let zero = Regularizer::Zero;

    let psi = correct_psi(&state.x_pred, cost, &zero, y_k, steps, c, true);
    let h = jac_correction(cost, y_k, &psi.intermediates, steps.beta)?;
    let r = cov.r(state.k);
    let gain = if opts.force_identity_gain {
        eye.clone()
    } else {
        let s = linalg::symmetrize(&(&h * &state.p_pred * h.transpose() + &r));
        // K = P Hᵀ S⁻¹, solved as Kᵀ = S⁻¹ H P with S, P symmetric.
        linalg::solve_matrix(&s, &(&h * &state.p_pred))
            .map_err(|_| Error::SingularInnovation)?
            .transpose()
    };
    let x_corr = gain_blend(&gain, &state.x_pred, &psi.corrected);
    let i_kh = &eye - &gain * &h;
    let p_corr = if opts.joseph {
        &i_kh * &state.p_pred * i_kh.transpose() + &gain * &r * gain.transpose()
    } else {
        &i_kh * &state.p_pred
    };
    let p_corr = linalg::symmetrize(&p_corr);

    let phi = predict_phi(&x_corr, cost, &zero, kind, history, steps, p, true)?;
    let f = jac_prediction(cost, kind, history, &phi.intermediates, steps.alpha)?;
    let p_pred = linalg::symmetrize(&(&f * &p_corr * f.transpose() + cov.q(state.k)));

    Ok(EkfState {
        x_pred: phi.x,
        p_pred,
        x_corr,
        p_corr,
        k: state.k + 1,
    })
}

/// `x − β ∇ₓₓf(x; y)⁻¹ ∇ₓf(x; y)`.
pub fn damped_newton_step(cost: &dyn SmoothCost, x: &Vector, y: &Vector, beta: f64) -> Result<Vector> {
    let step = linalg::solve_linear(&cost.hess(x, y), &cost.grad(x, y))?;
    Ok(x - step * beta)
}
