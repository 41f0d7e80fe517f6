use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::problem::{Regularizer, SmoothCost};

/// Iteration cap of the ground-truth solver, per sample.
pub const TRUTH_MAX_ITERS: usize = 1_000_000;

/// Optimizers of the expected problem along a stream.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruth {
    pub trajectory: Vec<Vector>,
    /// Largest fixed-point residual `‖x − prox_{βg}(x − β∇f(x; ȳ))‖` over the trajectory.
    pub residual_tol: f64,
    /// Largest `‖x̂*_{k+1} − x̂*_k‖`.
    pub drift_delta: f64,
}

/// Solves `min f(x; ȳ_k) + g(x)` for every nominal sample by warm-started proximal gradient.
///
/// The gradient is affine in `y` for every cost of this crate, so the expected
/// gradient is the gradient at the nominal data. Iterates stop when successive
/// points differ by at most `tol`.
pub fn ground_truth_trajectory(
    cost: &dyn SmoothCost,
    nominal: &[Vector],
    reg: &Regularizer,
    beta: f64,
    tol: f64,
) -> Result<GroundTruth> {
    if nominal.is_empty() {
        return Err(Error::EmptyInput);
    }
    if !(beta > 0.0 && beta < 2.0 / cost.lip()) {
        return Err(Error::StepTooLarge(format!("ground-truth step {beta} must lie in (0, 2/L)")));
    }
    let mut x = reg.prox(&Vector::zeros(cost.dim_x()), beta);
    let mut trajectory: Vec<Vector> = Vec::with_capacity(nominal.len());
    let mut residual_tol: f64 = 0.0;
    let mut drift_delta: f64 = 0.0;
    for y in nominal {
        if y.len() != cost.dim_y() {
            return Err(Error::dim(cost.dim_y(), y.len()));
        }
        let mut iters = 0;
        loop {
            let next = reg.prox(&(&x - cost.grad(&x, y) * beta), beta);
            let step = (&next - &x).norm();
            x = next;
            iters += 1;
            if step <= tol {
                residual_tol = residual_tol.max(step);
                break;
            }
            if iters >= TRUTH_MAX_ITERS || !step.is_finite() {
                return Err(Error::NoConvergence(iters));
            }
        }
        if let Some(prev) = trajectory.last() {
            drift_delta = drift_delta.max((&x - prev).norm());
        }
        trajectory.push(x.clone());
    }
    Ok(GroundTruth {
        trajectory,
        residual_tol,
        drift_delta,
    })
}
