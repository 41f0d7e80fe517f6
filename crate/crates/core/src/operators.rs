//! Prediction map `Φ`, correction map and residual `Ψ`, extrapolation predictors.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::problem::{Regularizer, SmoothCost};

/// Prediction step `alpha` and correction step `beta`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepSizes {
    pub alpha: f64,
    pub beta: f64,
}

impl StepSizes {
    /// Validated against `α < 2μ/L²` and `β < 2/L`.
    pub fn new(alpha: f64, beta: f64, mu: f64, lip: f64) -> Result<Self> {
        let s = Self { alpha, beta };
        s.validate(mu, lip)?;
        Ok(s)
    }

    /// `α = μ/L²` and `β = 1/L`, the midpoints of the admissible ranges.
    pub fn default_for(mu: f64, lip: f64) -> Self {
        Self {
            alpha: mu / (lip * lip),
            beta: 1.0 / lip,
        }
    }

    pub fn validate(&self, mu: f64, lip: f64) -> Result<()> {
        if !(mu > 0.0 && lip >= mu) {
            return Err(Error::InvalidParams(format!("need 0 < mu <= L, got mu={mu}, L={lip}")));
        }
        if !(self.alpha > 0.0 && self.beta > 0.0) {
            return Err(Error::InvalidParams(format!(
                "step sizes must be positive, got alpha={}, beta={}",
                self.alpha, self.beta
            )));
        }
        let alpha_max = 2.0 * mu / (lip * lip);
        if self.alpha >= alpha_max {
            return Err(Error::StepTooLarge(format!("alpha={} >= {alpha_max}", self.alpha)));
        }
        let beta_max = 2.0 / lip;
        if self.beta >= beta_max {
            return Err(Error::StepTooLarge(format!("beta={} >= {beta_max}", self.beta)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContractionFactors {
    pub rho_p: f64,
    pub rho_c: f64,
}

pub fn contraction_factors(mu: f64, lip: f64, steps: StepSizes) -> Result<ContractionFactors> {
    steps.validate(mu, lip)?;
    let (a, b) = (steps.alpha, steps.beta);
    let rho_p = (1.0 - 2.0 * a * mu + a * a * lip * lip).max(0.0).sqrt();
    let rho_c = (1.0 - b * mu).abs().max((1.0 - b * lip).abs());
    Ok(ContractionFactors { rho_p, rho_c })
}

/// `(ζ, ξ)`: `(1, 0)` for `ℓ = 0`, else `(ρ^ℓ, 1 + ρ^ℓ)`.
pub fn zeta_xi(ell: usize, rho: f64) -> (f64, f64) {
    if ell == 0 {
        (1.0, 0.0)
    } else {
        let z = rho.powi(ell as i32);
        (z, 1.0 + z)
    }
}

/// Polynomial extrapolation of the next gradient from the last one, two or three samples.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictorKind {
    OnePoint,
    TwoPoint,
    ThreePoint,
}

impl PredictorKind {
    /// Weights over `(y_k, y_{k−1}, y_{k−2})`.
    pub fn coefficients(self) -> &'static [f64] {
        match self {
            PredictorKind::OnePoint => &[1.0],
            PredictorKind::TwoPoint => &[2.0, -1.0],
            PredictorKind::ThreePoint => &[3.0, -3.0, 1.0],
        }
    }

    pub fn points(self) -> usize {
        self.coefficients().len()
    }

    /// Multiplier of `C₀Σ` in the predictor's error bound: 1, 3 or 7.
    pub fn noise_gain(self) -> f64 {
        self.coefficients().iter().map(|c| c.abs()).sum()
    }

    /// The richest kind not exceeding `self` that `available` samples support.
    pub fn effective(self, available: usize) -> Result<Self> {
        match available.min(self.points()) {
            0 => Err(Error::EmptyHistory),
            1 => Ok(PredictorKind::OnePoint),
            2 => Ok(PredictorKind::TwoPoint),
            _ => Ok(PredictorKind::ThreePoint),
        }
    }
}

/// The last (up to three) data vectors, most recent first.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DataHistory {
    buf: VecDeque<Vector>,
}

impl DataHistory {
    pub const CAPACITY: usize = 3;

    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a history from samples ordered oldest to newest.
    pub fn from_oldest_first(samples: &[Vector]) -> Self {
        let mut h = Self::new();
        for s in samples {
            h.push(s.clone());
        }
        h
    }

    pub fn push(&mut self, y: Vector) {
        if self.buf.len() == Self::CAPACITY {
            self.buf.pop_back();
        }
        self.buf.push_front(y);
    }

    pub fn clear(&mut self) {
        self.buf.clear();
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    /// `y_{k−lag}`.
    pub fn get(&self, lag: usize) -> Option<&Vector> {
        self.buf.get(lag)
    }

    pub fn latest(&self) -> Option<&Vector> {
        self.buf.front()
    }
}

/// `J(x) = Σᵢ cᵢ ∇ₓf(x; y_{k−i})` for the effective kind.
pub fn predictor_gradient(
    kind: PredictorKind,
    cost: &dyn SmoothCost,
    history: &DataHistory,
    x: &Vector,
) -> Result<Vector> {
    let kind = kind.effective(history.len())?;
    let mut acc = Vector::zeros(x.len());
    for (lag, &c) in kind.coefficients().iter().enumerate() {
        acc += cost.grad(x, &history.buf[lag]) * c;
    }
    Ok(acc)
}

/// `∇ₓJ(x) = Σᵢ cᵢ ∇ₓₓf(x; y_{k−i})`.
pub fn predictor_jacobian(
    kind: PredictorKind,
    cost: &dyn SmoothCost,
    history: &DataHistory,
    x: &Vector,
) -> Result<Matrix> {
    let kind = kind.effective(history.len())?;
    let n = x.len();
    let mut acc = Matrix::zeros(n, n);
    for (lag, &c) in kind.coefficients().iter().enumerate() {
        acc += cost.hess(x, &history.buf[lag]) * c;
    }
    Ok(acc)
}

/// Result of [`predict_phi`].
#[derive(Clone, Debug, PartialEq)]
pub struct PhiOutput {
    pub x: Vector,
    /// `x^0, …, x^{P−1}` when requested, else empty.
    pub intermediates: Vec<Vector>,
    pub kind_used: PredictorKind,
}

/// `P` steps of `x ← prox_{αg}(x − α J(x))`.
///
/// `P = 0` returns `x` without touching the history.
#[allow(clippy::too_many_arguments)]
pub fn predict_phi(
    x: &Vector,
    cost: &dyn SmoothCost,
    reg: &Regularizer,
    kind: PredictorKind,
    history: &DataHistory,
    steps: StepSizes,
    p: usize,
    keep_intermediates: bool,
) -> Result<PhiOutput> {
    if p == 0 {
        return Ok(PhiOutput {
            x: x.clone(),
            intermediates: Vec::new(),
            kind_used: kind,
        });
    }
    let kind_used = kind.effective(history.len())?;
    let mut cur = x.clone();
    let mut intermediates = Vec::with_capacity(if keep_intermediates { p } else { 0 });
    for _ in 0..p {
        let g = predictor_gradient(kind_used, cost, history, &cur)?;
        let next = reg.prox(&(&cur - g * steps.alpha), steps.alpha);
        if keep_intermediates {
            intermediates.push(cur);
        }
        cur = next;
    }
    Ok(PhiOutput {
        x: cur,
        intermediates,
        kind_used,
    })
}

/// Result of [`correct_psi`].
#[derive(Clone, Debug, PartialEq)]
pub struct PsiOutput {
    /// `Ψ = corrected − x`.
    pub residual: Vector,
    /// `Ψ′`, the iterate after `C` correction steps.
    pub corrected: Vector,
    /// `x^0, …, x^{C−1}` when requested, else empty.
    pub intermediates: Vec<Vector>,
}

/// `C` steps of `x ← prox_{βg}(x − β ∇ₓf(x; y))`.
pub fn correct_psi(
    x: &Vector,
    cost: &dyn SmoothCost,
    reg: &Regularizer,
    y: &Vector,
    steps: StepSizes,
    c: usize,
    keep_intermediates: bool,
) -> PsiOutput {
    let mut cur = x.clone();
    let mut intermediates = Vec::with_capacity(if keep_intermediates { c } else { 0 });
    for _ in 0..c {
        let next = reg.prox(&(&cur - cost.grad(&cur, y) * steps.beta), steps.beta);
        if keep_intermediates {
            intermediates.push(cur);
        }
        cur = next;
    }
    PsiOutput {
        residual: &cur - x,
        corrected: cur,
        intermediates,
    }
}

/// `(I − K) x_pred + K corrected`.
///
/// Equal to `x_pred + K Ψ`; written this way so that `K = I` returns `corrected` exactly.
pub fn gain_blend(k: &Matrix, x_pred: &Vector, corrected: &Vector) -> Vector {
    let n = x_pred.len();
    (Matrix::identity(n, n) - k) * x_pred + k * corrected
}

/// `(1 − χ) x_pred + χ corrected`.
pub fn scalar_blend(chi: f64, x_pred: &Vector, corrected: &Vector) -> Vector {
    x_pred * (1.0 - chi) + corrected * chi
}
