//! Contractive filter: blend the prediction with the corrected prediction through a gain.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, serde_rows, Matrix, Vector};
use crate::operators::{correct_psi, gain_blend, scalar_blend, StepSizes};
use crate::problem::{Regularizer, SmoothCost};

/// Gain used by [`contract_step`].
///
/// The LPV gain is `K(θ) = (W0 + θW1)(X0 − νX1 + θX1)⁻¹`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GainSchedule {
    Static {
        #[serde(rename = "K", with = "serde_rows")]
        k: Matrix,
    },
    Scalar {
        chi: f64,
    },
    Lpv {
        #[serde(with = "serde_rows")]
        w0: Matrix,
        #[serde(with = "serde_rows")]
        w1: Matrix,
        #[serde(with = "serde_rows")]
        x0: Matrix,
        #[serde(with = "serde_rows")]
        x1: Matrix,
        nu: f64,
    },
}

impl GainSchedule {
    pub fn identity(n: usize) -> Self {
        GainSchedule::Static {
            k: Matrix::identity(n, n),
        }
    }

    pub fn scaled_identity(kappa: f64, n: usize) -> Self {
        GainSchedule::Static {
            k: Matrix::identity(n, n) * kappa,
        }
    }

    /// Scalar LPV schedule `w(θ) = w0 + θw1`, `x(θ) = x0 + θx1`, times `I_n`.
    pub fn scalar_lpv(w0: f64, w1: f64, x0: f64, x1: f64, nu: f64, n: usize) -> Self {
        let eye = Matrix::identity(n, n);
        GainSchedule::Lpv {
            w0: &eye * w0,
            w1: &eye * w1,
            x0: &eye * x0,
            x1: &eye * x1,
            nu,
        }
    }

    pub fn is_lpv(&self) -> bool {
        matches!(self, GainSchedule::Lpv { .. })
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let square = |m: &Matrix| {
            if m.nrows() == n && m.ncols() == n {
                Ok(())
            } else {
                Err(Error::dim(n, m.nrows()))
            }
        };
        match self {
            GainSchedule::Static { k } => square(k),
            GainSchedule::Scalar { chi } if (0.0..=1.0).contains(chi) => Ok(()),
            GainSchedule::Scalar { chi } => {
                Err(Error::InvalidParams(format!("chi must lie in [0, 1], got {chi}")))
            }
            GainSchedule::Lpv { w0, w1, x0, x1, nu } => {
                for m in [w0, w1, x0, x1] {
                    square(m)?;
                }
                if !(*nu >= 0.0) {
                    return Err(Error::InvalidParams(format!("nu must be nonnegative, got {nu}")));
                }
                if !linalg::is_nsd(x1, 1e-12)? {
                    return Err(Error::InvalidParams("X1 must be negative semidefinite".into()));
                }
                for theta in [0.0, 1.0] {
                    let y = lpv_denominator(x0, x1, *nu, theta);
                    if linalg::sym_eig_min(&y)? <= 0.0 {
                        return Err(Error::InvalidParams(format!(
                            "Y(θ) is not positive definite at θ = {theta}"
                        )));
                    }
                }
                Ok(())
            }
        }
    }
}

fn lpv_denominator(x0: &Matrix, x1: &Matrix, nu: f64, theta: f64) -> Matrix {
    x0 - x1 * nu + x1 * theta
}

/// `K(θ) = (W0 + θW1)(X0 − νX1 + θX1)⁻¹`.
pub fn lpv_gain_eval(gain: &GainSchedule, theta: f64) -> Result<Matrix> {
    let GainSchedule::Lpv { w0, w1, x0, x1, nu } = gain else {
        return Err(Error::InvalidParams("not an LPV gain".into()));
    };
    let w = w0 + w1 * theta;
    let y = lpv_denominator(x0, x1, *nu, theta);
    // K Y = W  ⇔  Yᵀ Kᵀ = Wᵀ
    linalg::solve_matrix(&y.transpose(), &w.transpose())
        .map(|kt| kt.transpose())
        .map_err(|_| Error::GainEvalFailure(theta))
}

/// Corrects `x_pred` with `y_k` and blends with the gain; `theta` is read only by LPV gains.
#[allow(clippy::too_many_arguments)]
pub fn contract_step(
    x_pred: &Vector,
    cost: &dyn SmoothCost,
    reg: &Regularizer,
    y_k: &Vector,
    steps: StepSizes,
    c: usize,
    gain: &GainSchedule,
    theta: f64,
) -> Result<Vector> {
    let psi = correct_psi(x_pred, cost, reg, y_k, steps, c, false);
    Ok(match gain {
        GainSchedule::Static { k } => gain_blend(k, x_pred, &psi.corrected),
        GainSchedule::Scalar { chi } => scalar_blend(*chi, x_pred, &psi.corrected),
        GainSchedule::Lpv { .. } => gain_blend(&lpv_gain_eval(gain, theta)?, x_pred, &psi.corrected),
    })
}

/// Normalized data drift used to schedule an LPV gain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaSignal {
    /// Normalizer `max_t ‖∇_t y‖∞`.
    pub max_drift: f64,
    /// Backward-difference lag in samples.
    pub window: usize,
}

/// `θ = min(1, ‖(cur − prev)/h‖∞ / max_drift)`, where `prev` lies `window` samples back.
pub fn theta_from_stream(prev_y: &Vector, cur_y: &Vector, h: f64, signal: &ThetaSignal) -> f64 {
    let span = h * signal.window.max(1) as f64;
    let drift = linalg::inf_norm(&((cur_y - prev_y) / span));
    (drift / signal.max_drift).clamp(0.0, 1.0)
}

/// Largest backward-difference drift `‖(y_k − y_{k−w})/(w h)‖∞` over `samples`.
pub fn calibrate_max_drift(samples: &[Vector], h: f64, window: usize) -> f64 {
    let w = window.max(1);
    if samples.len() <= w {
        return 0.0;
    }
    (w..samples.len())
        .map(|k| linalg::inf_norm(&((&samples[k] - &samples[k - w]) / (h * w as f64))))
        .fold(0.0, f64::max)
}

/// Emits `θ_k` for a stream and records the largest observed `|θ_{k+1} − θ_k|`.
#[derive(Clone, Debug)]
pub struct ThetaTracker {
    signal: ThetaSignal,
    h: f64,
    recent: std::collections::VecDeque<Vector>,
    last: Option<f64>,
    max_step: f64,
}

impl ThetaTracker {
    pub fn new(signal: ThetaSignal, h: f64) -> Self {
        Self {
            signal,
            h,
            recent: Default::default(),
            last: None,
            max_step: 0.0,
        }
    }

    /// θ for the newly received sample; 0 until `window` earlier samples exist.
    pub fn observe(&mut self, y: &Vector) -> f64 {
        let w = self.signal.window.max(1);
        let theta = if self.recent.len() >= w {
            theta_from_stream(&self.recent[w - 1], y, self.h, &self.signal)
        } else {
            0.0
        };
        self.recent.push_front(y.clone());
        self.recent.truncate(w);
        if let Some(prev) = self.last {
            self.max_step = self.max_step.max((theta - prev).abs());
        }
        self.last = Some(theta);
        theta
    }

    /// Empirical `ν`.
    pub fn max_step(&self) -> f64 {
        self.max_step
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::QuadraticCost;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    fn setup() -> (QuadraticCost, StepSizes) {
        (
            QuadraticCost::tracking(Matrix::identity(1, 1)).unwrap(),
            StepSizes { alpha: 0.5, beta: 1.0 },
        )
    }

    #[test]
    fn identity_gain_returns_corrected() {
        let (cost, steps) = setup();
        let x = contract_step(&v(&[0.0]), &cost, &Regularizer::Zero, &v(&[2.0]), steps, 1, &GainSchedule::identity(1), 0.0)
            .unwrap();
        assert_eq!(x[0], 2.0);
    }

    #[test]
    fn zero_gain_returns_prediction() {
        let (cost, steps) = setup();
        let g = GainSchedule::Static { k: Matrix::zeros(1, 1) };
        let x = contract_step(&v(&[0.7]), &cost, &Regularizer::Zero, &v(&[2.0]), steps, 3, &g, 0.0).unwrap();
        assert_eq!(x[0], 0.7);
    }

    #[test]
    fn scalar_midpoint() {
        let (cost, steps) = setup();
        let g = GainSchedule::Scalar { chi: 0.5 };
        let x = contract_step(&v(&[0.0]), &cost, &Regularizer::Zero, &v(&[2.0]), steps, 1, &g, 0.0).unwrap();
        assert_eq!(x[0], 1.0);
    }

    #[test]
    fn theta_examples() {
        let s = ThetaSignal {
            max_drift: 2.0,
            window: 1,
        };
        let a = v(&[1.0, 1.0]);
        assert_eq!(theta_from_stream(&a, &a, 0.5, &s), 0.0);
        assert_eq!(theta_from_stream(&a, &v(&[2.0, 1.0]), 0.5, &s), 1.0);
        assert_eq!(theta_from_stream(&a, &v(&[1.0, 0.5]), 0.5, &s), 0.5);
        assert_eq!(theta_from_stream(&a, &v(&[9.0, 1.0]), 0.5, &s), 1.0);
    }

    #[test]
    fn lpv_examples() {
        let g = GainSchedule::scalar_lpv(0.5, 0.1, 1.0, -0.2, 0.4, 1);
        let k = lpv_gain_eval(&g, 1.0).unwrap()[(0, 0)];
        assert!((k - 0.6 / 0.88).abs() < 1e-15);
        let k0 = lpv_gain_eval(&g, 0.0).unwrap()[(0, 0)];
        assert!((k0 - 0.5 / 1.08).abs() < 1e-15);
        let s = GainSchedule::scalar_lpv(0.3, 0.0, 2.0, 0.0, 0.4, 2);
        for theta in [0.0, 0.3, 1.0] {
            let k = lpv_gain_eval(&s, theta).unwrap();
            assert!((k - Matrix::identity(2, 2) * 0.15).norm() < 1e-15);
        }
    }

    #[test]
    fn lpv_singular_denominator() {
        let g = GainSchedule::scalar_lpv(0.5, 0.0, 0.0, 0.0, 0.4, 1);
        assert!(matches!(lpv_gain_eval(&g, 0.5), Err(Error::GainEvalFailure(_))));
    }

    #[test]
    fn validation() {
        assert!(GainSchedule::Scalar { chi: 1.5 }.validate(1).is_err());
        assert!(GainSchedule::scalar_lpv(0.5, 0.1, 1.0, 0.2, 0.4, 2).validate(2).is_err());
        assert!(GainSchedule::scalar_lpv(0.5, 0.1, 1.0, -0.2, 0.4, 2).validate(2).is_ok());
        assert!(GainSchedule::identity(3).validate(2).is_err());
    }

    #[test]
    fn json_shape() {
        let g = GainSchedule::scaled_identity(0.25, 2);
        let s = serde_json::to_value(&g).unwrap();
        assert_eq!(s["kind"], "static");
        assert_eq!(s["K"][1][1], 0.25);
        let back: GainSchedule = serde_json::from_value(s).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn tracker_records_nu() {
        let mut t = ThetaTracker::new(ThetaSignal { max_drift: 1.0, window: 1 }, 1.0);
        assert_eq!(t.observe(&v(&[0.0])), 0.0);
        assert_eq!(t.observe(&v(&[0.5])), 0.5);
        assert!((t.observe(&v(&[0.6])) - 0.1).abs() < 1e-12);
        assert!((t.max_step() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn calibration() {
        let s = vec![v(&[0.0]), v(&[1.0]), v(&[3.0]), v(&[3.5])];
        assert_eq!(calibrate_max_drift(&s, 0.5, 1), 4.0);
        assert_eq!(calibrate_max_drift(&s, 0.5, 2), 3.0);
    }
}
