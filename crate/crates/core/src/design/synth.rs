use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::lmi::{lmi_feasible_lpv, lmi_feasible_matrix, schur_sum, LmiScalarParams};
use crate::contract::GainSchedule;
use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Default bound on the per-step variation of the scheduling parameter.
pub const DEFAULT_NU: f64 = 0.4;

/// Margin applied to certified points so that they pass the oracle strictly.
const MARGIN: f64 = 1e-9;

/// Multiplier weight used when a multiplier does not enter the decay budget.
const FREE_MULTIPLIER_TERM: f64 = 1e-6;

/// Design inputs echoed in the certificate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamsEcho {
    #[serde(flatten)]
    pub params: LmiScalarParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_grid: Option<Vec<f64>>,
    pub dim: usize,
}

/// A designed gain together with the multipliers that certify it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GainCertificate {
    #[serde(flatten)]
    pub gain: GainSchedule,
    pub rho: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    /// `(γ₁ρΔ + γ₂)/(1 − ρ)`.
    pub ae_bound: f64,
    pub params_echo: ParamsEcho,
}

impl GainCertificate {
    /// Re-checks the certificate against the matrix feasibility oracle.
    pub fn verify(&self) -> Result<bool> {
        let echo = &self.params_echo;
        let n = echo.dim;
        let eye = Matrix::identity(n, n);
        let prm = &echo.params;
        let (g1, g2) = (self.gamma1 * self.gamma1, self.gamma2 * self.gamma2);
        let r = &eye * prm.r;
        match &self.gain {
            GainSchedule::Static { k } => {
                // X = γ₁² I, W = K X.
                let x = &eye * g1;
                let w = k * &x;
                lmi_feasible_matrix(&x, &w, self.lambda1, self.lambda2, g1, g2, &(&eye * prm.q), &r, prm, self.rho)
            }
            GainSchedule::Lpv { w0, w1, x0, x1, nu } => {
                let grid = echo
                    .theta_grid
                    .clone()
                    .unwrap_or_else(|| uniform_theta_grid(4));
                let q1 = &eye * echo.q1.unwrap_or(0.0);
                lmi_feasible_lpv(
                    x0,
                    x1,
                    w0,
                    w1,
                    *nu,
                    self.lambda1,
                    self.lambda2,
                    g1,
                    g2,
                    &(&eye * prm.q),
                    &q1,
                    &r,
                    prm,
                    self.rho,
                    &grid,
                )
            }
            GainSchedule::Scalar { .. } => Ok(false),
        }
    }

    /// `K = κ I` of a static certificate.
    pub fn kappa(&self) -> Option<f64> {
        match &self.gain {
            GainSchedule::Static { k } if k.nrows() > 0 => Some(k[(0, 0)]),
            _ => None,
        }
    }
}

/// 33 points on `[0.5, 0.98]` plus `ω₁ω₂ + 10⁻³`.
pub fn default_rho_grid(params: &LmiScalarParams) -> Vec<f64> {
    let mut grid: Vec<f64> = (0..33).map(|i| 0.5 + 0.48 * i as f64 / 32.0).collect();
    let floor = params.omega1 * params.omega2 + 1e-3;
    if floor < 1.0 {
        grid.push(floor);
    }
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid
}

/// `m` uniform points on `[0, 1]`.
pub fn uniform_theta_grid(m: usize) -> Vec<f64> {
    match m {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..m).map(|i| i as f64 / (m - 1) as f64).collect(),
    }
}

/// Multipliers minimizing `u²/λ₁ + v²/λ₂` subject to `λ₁ω₁² + λ₂ω₁²ω₂² = ρ²`.
///
/// Returns `(λ₁, λ₂)`; a multiplier with zero numerator is zero, one outside
/// the budget is chosen so that its term equals a negligible constant.
fn split_multipliers(u: f64, v: f64, params: &LmiScalarParams, rho: f64) -> (f64, f64) {
    let roots = [params.omega1, params.omega1 * params.omega2];
    let nums = [u * u, v * v];
    let s: f64 = (0..2)
        .filter(|&i| nums[i] > 0.0 && roots[i] > 0.0)
        .map(|i| nums[i].sqrt() * roots[i])
        .sum();
    let mut lam = [0.0; 2];
    for i in 0..2 {
        if nums[i] == 0.0 {
            lam[i] = 0.0;
        } else if roots[i] == 0.0 {
            lam[i] = nums[i] / FREE_MULTIPLIER_TERM;
        } else {
            lam[i] = rho * rho * nums[i].sqrt() / (roots[i] * s) * (1.0 - MARGIN);
        }
    }
    (lam[0], lam[1])
}

/// Smallest certifiable `γ₂²` for `X = I`, `W = κI` at rate `rho`, with its multipliers.
fn static_point(kappa: f64, params: &LmiScalarParams, rho: f64) -> Option<(f64, f64, f64)> {
    let (u, v) = (1.0 - kappa, kappa);
    let (l1, l2) = split_multipliers(u, v, params, rho);
    let lambda_part = schur_sum(1.0, kappa, l1, l2, f64::INFINITY, 0.0, 0.0);
    let noise = params.q * params.q * u * u + params.r * params.r * v * v;
    if noise == 0.0 {
        return (lambda_part <= 1.0).then_some((l1, l2, 0.0));
    }
    if lambda_part >= 1.0 {
        return None;
    }
    Some((l1, l2, noise / (1.0 - lambda_part) * (1.0 + MARGIN)))
}

fn golden_min(mut lo: f64, mut hi: f64, iters: usize, f: impl Fn(f64) -> f64) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - g * (hi - lo);
    let mut b = lo + g * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    for _ in 0..iters {
        if fa <= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - g * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + g * (hi - lo);
            fb = f(b);
        }
    }
    if fa <= fb {
        (a, fa)
    } else {
        (b, fb)
    }
}

/// Grid search followed by golden-section refinement around the best grid point.
///
/// Ties on the grid go to the smaller argument.
fn minimize_on_unit(points: usize, f: impl Fn(f64) -> f64) -> Option<(f64, f64)> {
    let grid: Vec<f64> = (0..points).map(|i| i as f64 / (points - 1) as f64).collect();
    let values: Vec<f64> = grid.iter().map(|&t| f(t)).collect();
    let mut best = 0;
    for i in 1..points {
        if values[i] < values[best] {
            best = i;
        }
    }
    if !values[best].is_finite() {
        return None;
    }
    let lo = grid[best.saturating_sub(1)];
    let hi = grid[(best + 1).min(points - 1)];
    let (t, v) = golden_min(lo, hi, 60, &f);
    if v < values[best] {
        Some((t, v))
    } else {
        Some((grid[best], values[best]))
    }
}

fn ae_bound(gamma1: f64, gamma2: f64, rho: f64, delta: f64) -> f64 {
    (gamma1 * rho * delta + gamma2) / (1.0 - rho)
}

/// Picks the minimal bound; ties (1e-12 relative) go to the smaller `ρ`.
fn select_best(mut candidates: Vec<GainCertificate>) -> Result<GainCertificate> {
    candidates.sort_by(|a, b| a.rho.total_cmp(&b.rho));
    let mut best: Option<GainCertificate> = None;
    for c in candidates {
        match &best {
            Some(b) if c.ae_bound >= b.ae_bound * (1.0 - 1e-12) => {}
            _ => best = Some(c),
        }
    }
    best.ok_or(Error::NoFeasiblePoint)
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidParams("rho grid is empty".into()));
    }
    if grid.iter().any(|r| !(*r > 0.0 && *r < 1.0)) {
        return Err(Error::InvalidParams("rho grid values must lie in (0, 1)".into()));
    }
    Ok(())
}

/// Scaled-identity gain `K = κ I_n` minimizing the certified asymptotic error.
///
/// For each `ρ` the scale `X = I` is optimal by homogeneity, the multipliers
/// follow in closed form from the decay budget, and `κ ∈ [0, 1]` is searched
/// on a grid refined by golden section.
pub fn design_static_gain(params: &LmiScalarParams, rho_grid: &[f64], n: usize) -> Result<GainCertificate> {
    params.validate()?;
    check_grid(rho_grid)?;
    let candidates: Vec<GainCertificate> = rho_grid
        .par_iter()
        .filter_map(|&rho| {
            let objective = |k: f64| static_point(k, params, rho).map_or(f64::INFINITY, |p| p.2);
            let (kappa, _) = minimize_on_unit(1001, objective)?;
            let (l1, l2, g2) = static_point(kappa, params, rho)?;
            let gamma2 = g2.sqrt();
            let cert = GainCertificate {
                gain: GainSchedule::scaled_identity(kappa, n),
                rho,
                gamma1: 1.0,
                gamma2,
                lambda1: l1,
                lambda2: l2,
                ae_bound: ae_bound(1.0, gamma2, rho, params.delta),
                params_echo: ParamsEcho {
                    params: *params,
                    q1: None,
                    theta_grid: None,
                    dim: n,
                },
            };
            cert.verify().ok()?.then_some(cert)
        })
        .collect();
    select_best(candidates)
}

/// Feasible `w` interval of `α₁(y − w)² + α₂w² ≤ y`.
fn w_interval(y: f64, alpha1: f64, alpha2: f64) -> Option<(f64, f64)> {
    let a = alpha1 + alpha2;
    let center = alpha1 * y / a;
    let slack = y - alpha1 * alpha2 * y * y / a;
    (slack >= 0.0).then(|| {
        let half = (slack / a).sqrt();
        (center - half, center + half)
    })
}

/// An affine `w(θ) = w0 + θ w1` inside every interval, as central as possible.
fn fit_line(thetas: &[f64], intervals: &[(f64, f64)]) -> Option<(f64, f64)> {
    let gap = |w1: f64| {
        let lo = thetas
            .iter()
            .zip(intervals)
            .map(|(t, iv)| iv.0 - t * w1)
            .fold(f64::NEG_INFINITY, f64::max);
        let hi = thetas
            .iter()
            .zip(intervals)
            .map(|(t, iv)| iv.1 - t * w1)
            .fold(f64::INFINITY, f64::min);
        (lo - hi, 0.5 * (lo + hi))
    };
    // The gap is convex piecewise linear in w1; its minimum sits at a breakpoint.
    let mut candidates = vec![0.0];
    for i in 0..thetas.len() {
        for j in 0..thetas.len() {
            let dt = thetas[i] - thetas[j];
            if dt.abs() < 1e-15 {
                continue;
            }
            for ei in [intervals[i].0, intervals[i].1] {
                for ej in [intervals[j].0, intervals[j].1] {
                    candidates.push((ei - ej) / dt);
                }
            }
        }
    }
    let mut best: Option<(f64, f64, f64)> = None;
    for w1 in candidates {
        let (g, w0) = gap(w1);
        if best.map_or(true, |b| g < b.0 - 1e-15 || (g <= b.0 + 1e-15 && w1.abs() < b.2.abs())) {
            best = Some((g, w0, w1));
        }
    }
    best.filter(|b| b.0 <= 0.0).map(|b| (b.1, b.2))
}

struct LpvPoint {
    lambda1: f64,
    lambda2: f64,
    gamma2sq: f64,
    w0: f64,
    w1: f64,
}

/// Minimal `γ₂²` for fixed Lyapunov slope `a` and budget split `t`.
fn lpv_point(
    a: f64,
    t: f64,
    params: &LmiScalarParams,
    q1: f64,
    nu: f64,
    thetas: &[f64],
    rho: f64,
) -> Option<LpvPoint> {
    let w1sq = params.omega1 * params.omega1;
    let w2sq = w1sq * params.omega2 * params.omega2;
    let share = |frac: f64, coeff: f64| {
        if coeff > 0.0 {
            frac * rho * rho / coeff * (1.0 - MARGIN)
        } else {
            1.0 / FREE_MULTIPLIER_TERM
        }
    };
    let (l1, l2) = (share(t, w1sq), share(1.0 - t, w2sq));
    if !(l1 > 0.0 && l2 > 0.0) {
        return None;
    }
    let ys: Vec<f64> = thetas.iter().map(|th| 1.0 + a * (1.0 + nu - th)).collect();
    let qs: Vec<f64> = thetas.iter().map(|th| params.q + th * q1).collect();
    let feasible = |g2: f64| -> Option<(f64, f64)> {
        let intervals: Option<Vec<(f64, f64)>> = ys
            .iter()
            .zip(&qs)
            .map(|(&y, &q)| {
                let (n1, n2) = if g2.is_infinite() { (0.0, 0.0) } else { (q * q / g2, params.r * params.r / g2) };
                w_interval(y, 1.0 / l1 + n1, 1.0 / l2 + n2)
            })
            .collect();
        fit_line(thetas, &intervals?)
    };
    let noiseless = params.r == 0.0 && qs.iter().all(|&q| q == 0.0);
    let finish = |g2: f64, (w0, w1): (f64, f64)| LpvPoint {
        lambda1: l1,
        lambda2: l2,
        gamma2sq: g2,
        w0,
        w1,
    };
    if noiseless {
        return feasible(f64::INFINITY).map(|line| finish(0.0, line));
    }
    feasible(f64::INFINITY)?;
    let mut hi = 1.0;
    let mut tries = 0;
    while feasible(hi).is_none() {
        hi *= 4.0;
        tries += 1;
        if tries > 200 {
            return None;
        }
    }
    let mut lo = 0.0;
    for _ in 0..80 {
        let mid = if lo == 0.0 { hi / 4.0 } else { (lo * hi).sqrt() };
        if mid <= 0.0 || hi / mid.max(f64::MIN_POSITIVE) < 1.0 + 1e-12 {
            break;
        }
        if feasible(mid).is_some() {
            hi = mid;
        } else {
            lo = mid;
        }
        if lo > 0.0 && hi / lo < 1.0 + 1e-10 {
            break;
        }
    }
    let g2 = hi * (1.0 + MARGIN);
    feasible(g2).map(|line| finish(g2, line))
}

/// Scaled-identity LPV gain scheduled on `θ ∈ [0, 1]`, with `Q(θ) = (q + θ q1) I`.
///
/// Normalizes `X(θ) = (1 + a) − aθ` with `a ≥ 0`; for each `(ρ, a)` the budget
/// split is searched and `γ₂²` bisected subject to an affine `w(θ)` fitting the
/// per-grid-point feasible intervals.
pub fn design_lpv_gain(
    params: &LmiScalarParams,
    q1: f64,
    nu: f64,
    theta_grid: &[f64],
    rho_grid: &[f64],
    n: usize,
) -> Result<GainCertificate> {
    params.validate()?;
    check_grid(rho_grid)?;
    if !(q1 >= 0.0 && nu >= 0.0) {
        return Err(Error::InvalidParams("q1 and nu must be nonnegative".into()));
    }
    if theta_grid.is_empty() || theta_grid.iter().any(|t| !(0.0..=1.0).contains(t)) {
        return Err(Error::InvalidParams("theta grid must be a nonempty subset of [0, 1]".into()));
    }
    let static_seed = design_static_gain(
        &LmiScalarParams {
            q: params.q + q1,
            ..*params
        },
        rho_grid,
        n,
    )
    .ok();
    let delta_sq = params.delta * params.delta;
    let candidates: Vec<GainCertificate> = rho_grid
        .par_iter()
        .filter_map(|&rho| {
            let objective = |a: f64, t: f64| {
                lpv_point(a, t, params, q1, nu, theta_grid, rho)
                    .map_or(f64::INFINITY, |p| (1.0 + a) * rho * rho * delta_sq + p.gamma2sq)
            };
            let best_t = |a: f64| -> Option<(f64, f64)> {
                let eps = 1e-6;
                let map = |s: f64| eps + (1.0 - 2.0 * eps) * s;
                let mut best = minimize_on_unit(41, |s| objective(a, map(s))).map(|(s, v)| (map(s), v));
                if let Some(seed) = static_seed.as_ref().filter(|c| c.rho == rho) {
                    let t = rho_share(seed, params, rho);
                    let v = objective(a, t);
                    if best.map_or(true, |b| v < b.1) {
                        best = Some((t, v));
                    }
                }
                best.filter(|b| b.1.is_finite())
            };
            let a_grid = [0.0, 0.01, 0.03, 0.1, 0.3, 1.0];
            let mut best: Option<(f64, f64, f64)> = None;
            for &a in &a_grid {
                if let Some((t, v)) = best_t(a) {
                    if best.map_or(true, |b| v < b.2) {
                        best = Some((a, t, v));
                    }
                }
            }
            let (mut a, mut t, mut v) = best?;
            if a > 0.0 {
                let (ra, _) = golden_min(a / 3.0, (a * 3.0).min(10.0), 30, |aa| {
                    best_t(aa).map_or(f64::INFINITY, |b| b.1)
                });
                if let Some((rt, rv)) = best_t(ra) {
                    if rv < v {
                        (a, t, v) = (ra, rt, rv);
                    }
                }
            }
            let _ = v;
            let pt = lpv_point(a, t, params, q1, nu, theta_grid, rho)?;
            let gamma1 = (1.0 + a).sqrt();
            let gamma2 = pt.gamma2sq.sqrt();
            let cert = GainCertificate {
                gain: GainSchedule::scalar_lpv(pt.w0, pt.w1, 1.0 + a, -a, nu, n),
                rho,
                gamma1,
                gamma2,
                lambda1: pt.lambda1,
                lambda2: pt.lambda2,
                ae_bound: ae_bound(gamma1, gamma2, rho, params.delta),
                params_echo: ParamsEcho {
                    params: *params,
                    q1: Some(q1),
                    theta_grid: Some(theta_grid.to_vec()),
                    dim: n,
                },
            };
            cert.verify().ok()?.then_some(cert)
        })
        .collect();
    select_best(candidates)
}

/// Fraction of the decay budget used by `λ₁` in a certificate.
fn rho_share(cert: &GainCertificate, params: &LmiScalarParams, rho: f64) -> f64 {
    let used = cert.lambda1 * params.omega1 * params.omega1;
    (used / (rho * rho)).clamp(1e-6, 1.0 - 1e-6)
}
