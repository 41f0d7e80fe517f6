use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::{zeta_xi, ContractionFactors, PredictorKind};

/// Worst-case constants of the tracking-error recursion.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorstCaseParams {
    pub factors: ContractionFactors,
    #[serde(rename = "P")]
    pub p: usize,
    #[serde(rename = "C")]
    pub c: usize,
    /// Drift bound `Δ` of the optimal trajectory.
    pub delta: f64,
    /// `τ/μ`, distance of the prediction fixed point to the optimizer.
    pub tau_mu: f64,
    /// `βσ/(1 − ρ_c)`, noise floor of the correction.
    pub sigma_c: f64,
}

impl WorstCaseParams {
    pub fn zeta_p(&self) -> f64 {
        zeta_xi(self.p, self.factors.rho_p).0
    }

    pub fn xi_p(&self) -> f64 {
        zeta_xi(self.p, self.factors.rho_p).1
    }

    pub fn zeta_c(&self) -> f64 {
        zeta_xi(self.c, self.factors.rho_c).0
    }

    pub fn validate(&self) -> Result<()> {
        let rate = self.zeta_c() * self.zeta_p();
        if !(rate < 1.0) {
            return Err(Error::DivergentConfig(rate));
        }
        if [self.delta, self.tau_mu, self.sigma_c].iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::InvalidParams("delta, tau_mu and sigma_c must be nonnegative".into()));
        }
        Ok(())
    }

    /// `ζ_P Δ + ξ_P τ_μ`.
    fn prediction_term(&self) -> f64 {
        self.zeta_p() * self.delta + self.xi_p() * self.tau_mu
    }
}

/// Asymptotic error bound of the scalar-gain filter for gain `chi`.
pub fn asymptotic_error_bound(chi: f64, wc: &WorstCaseParams) -> Result<f64> {
    let (zp, zc) = (wc.zeta_p(), wc.zeta_c());
    let rate = (1.0 - chi) * zp + chi * zc * zp;
    if !(rate < 1.0) {
        return Err(Error::DivergentConfig(rate));
    }
    let b = wc.prediction_term();
    let num = (1.0 - chi) * b + chi * (zc * b + wc.sigma_c);
    Ok(num / (1.0 - rate))
}

/// Optimal scalar gain; the bound is monotone in `χ`, so the optimum is 0 or 1.
///
/// Ties return `χ = 1`.
pub fn tune_chi(wc: &WorstCaseParams) -> Result<(f64, f64)> {
    wc.validate()?;
    let (zp, zc) = (wc.zeta_p(), wc.zeta_c());
    // bound(χ) = (b + χ a) / (d + χ c); its derivative has the sign of a d − b c.
    let b = wc.prediction_term();
    let a = (zc - 1.0) * b + wc.sigma_c;
    let c = zp - zp * zc;
    let d = 1.0 - zp;
    let (ad, bc) = (a * d, b * c);
    let tie = (ad - bc).abs() <= 1e-12 * (ad.abs() + bc.abs());
    let chi = if tie || ad < bc { 1.0 } else { 0.0 };
    Ok((chi, asymptotic_error_bound(chi, wc)?))
}

/// Problem constants feeding [`worst_case_params_from_model`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelBounds {
    /// `C₀ ≥ ‖∇_yx f‖`.
    pub c0: f64,
    /// `C`, bound on the first three time derivatives of the nominal data.
    pub c: f64,
    /// Sampling period.
    pub h: f64,
    /// `Σ ≥ sup_k √tr Σ_k`.
    pub sigma: f64,
    pub mu: f64,
}

/// Worst-case constants for data that is linear in the cost's gradient.
///
/// `Δ = C₀ max(1, C) h / μ`, which reduces to `C₀h/μ` for `C ≤ 1`.
pub fn worst_case_params_from_model(
    bounds: &ModelBounds,
    factors: ContractionFactors,
    p: usize,
    c: usize,
    kind: PredictorKind,
    beta: f64,
) -> WorstCaseParams {
    let ModelBounds { c0, c: cb, h, sigma, mu } = *bounds;
    let bias = match kind {
        PredictorKind::OnePoint => c0 * cb * h,
        PredictorKind::TwoPoint => c0 * cb * h * h,
        PredictorKind::ThreePoint => c0 * cb * h.powi(3),
    };
    let tau = bias + kind.noise_gain() * c0 * sigma;
    let sigma_grad = c0 * sigma;
    WorstCaseParams {
        factors,
        p,
        c,
        delta: c0 * cb.max(1.0) * h / mu,
        tau_mu: tau / mu,
        sigma_c: beta * sigma_grad / (1.0 - factors.rho_c),
    }
}
