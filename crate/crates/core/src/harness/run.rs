use std::sync::Arc;
use std::time::Instant;

use super::config::{
    Algorithm, BoundsSource, DesignKind, DesignRequest, ExperimentConfig, GainSpec, Regime, StreamSource,
};
use super::io::ingest_csv;
use super::metrics::{summarize, MetricsReport};
use super::truth::{ground_truth_trajectory, GroundTruth};
use crate::contract::{calibrate_max_drift, contract_step, GainSchedule, ThetaSignal, ThetaTracker};
use crate::design::{
    default_rho_grid, design_lpv_gain, design_static_gain, uniform_theta_grid, worst_case_params_from_model,
    GainCertificate, LmiScalarParams, ModelBounds,
};
use crate::ekf::{ekf_step, estimate_covariance, CovModel, EkfOptions, EkfState};
use crate::error::{Error, Result};
use crate::linalg::{spectral_norm, Matrix, Vector};
use crate::operators::{
    contraction_factors, correct_psi, predict_phi, ContractionFactors, DataHistory, PredictorKind,
    StepSizes,
};
use crate::problem::{generate_stream, moving_average, rng_from_seed, standard_normal, Regularizer, SmoothCost};

/// Added to the filter covariances so the innovation stays invertible on noise-free data.
const COV_FLOOR: f64 = 1e-9;

/// Mixed into the seed of the regime's prediction noise, so it is independent of the stream noise.
const REGIME_SEED_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

/// Everything an algorithm run needs, shared by all algorithms on the same stream.
#[derive(Debug)]
pub struct Prepared {
    pub cost: Arc<dyn SmoothCost>,
    pub reg: Regularizer,
    pub steps: StepSizes,
    pub h: f64,
    pub times: Vec<f64>,
    /// Nominal (or smoothed) data `ȳ_k`.
    pub nominal: Vec<Vector>,
    pub truth: GroundTruth,
    /// Data fed to the correction at step `k`.
    pub corrections: Vec<Vector>,
    /// Oracle prediction of the data at `k + 1`, issued at step `k`.
    pub oracle: Option<Vec<Vector>>,
    /// Series the extrapolating predictors read.
    pub extrapolated: Vec<Vector>,
    pub predictor: PredictorKind,
    pub prediction_errors: Vec<Vector>,
    pub measurement_errors: Vec<Vector>,
}

impl Prepared {
    pub fn len(&self) -> usize {
        self.corrections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.corrections.is_empty()
    }

    /// Predictor history for step `k + 1`, as seen after step `k`.
    fn history_after(&self, k: usize, hist: &mut DataHistory) {
        match &self.oracle {
            Some(pred) => *hist = DataHistory::from_oldest_first(std::slice::from_ref(&pred[k])),
            None => hist.push(self.extrapolated[k].clone()),
        }
    }

    fn coupling(&self) -> Result<f64> {
        self.cost
            .coupling_bound()
            .ok_or_else(|| Error::Config("cost has no data-coupling bound".into()))
    }

    fn noise_cov(samples: &[Vector], n: usize, full: bool) -> Result<Matrix> {
        if samples.is_empty() {
            Ok(Matrix::zeros(n, n))
        } else {
            estimate_covariance(samples, full)
        }
    }
}

fn trailing_mean(values: &[Vector], window: usize) -> Vec<Vector> {
    (0..values.len())
        .map(|k| {
            let lo = (k + 1).saturating_sub(window);
            let mut acc = values[lo].clone();
            for v in &values[lo + 1..=k] {
                acc += v;
            }
            acc / (k + 1 - lo) as f64
        })
        .collect()
}

/// Builds the problem, stream, ground truth and regime feeds of a config.
pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    cfg.validate()?;
    let (cost, reg) = cfg.problem.build(cfg.constrained).map_err(|e| match e {
        Error::InvalidParams(m) => Error::Config(m),
        other => other,
    })?;
    let (h, times, measured, nominal) = match &cfg.stream {
        StreamSource::Synthetic(spec) => {
            let mut spec = spec.clone();
            spec.seed = cfg.seed;
            if spec.dim() != cost.dim_y() {
                return Err(Error::Config(format!(
                    "stream has dimension {} but the problem expects {}",
                    spec.dim(),
                    cost.dim_y()
                )));
            }
            let s = generate_stream(&spec)?;
            (s.h, s.times, s.measured, s.nominal)
        }
        StreamSource::Csv(csv) => {
            let data = ingest_csv(&csv.csv_path, cost.dim_y())?;
            let values = data.values();
            let smoothed = moving_average(&values, csv.smoothing_window.max(1));
            (data.h, data.times(), values, smoothed)
        }
    };
    if measured.is_empty() {
        return Err(Error::EmptyInput);
    }
    let steps = match cfg.steps {
        Some(s) => {
            s.validate(cost.mu(), cost.lip())?;
            s
        }
        None => StepSizes::default_for(cost.mu(), cost.lip()),
    };
    let truth = ground_truth_trajectory(cost.as_ref(), &nominal, &reg, steps.beta, cfg.truth_tol)?;

    let len = measured.len();
    let d = cost.dim_y();
    let mut rng = rng_from_seed(cfg.seed ^ REGIME_SEED_SALT);
    let mut oracle_feed = |variance: f64| -> Vec<Vector> {
        (0..len)
            .map(|k| {
                let target = &nominal[(k + 1).min(len - 1)];
                target + standard_normal(&mut rng, d) * variance.sqrt()
            })
            .collect()
    };
    let (corrections, oracle, extrapolated, predictor) = match cfg.regime {
        Regime::GoodPrediction { variance } => {
            let pred = oracle_feed(variance);
            (measured.clone(), Some(pred), measured, PredictorKind::OnePoint)
        }
        Regime::PoorPrediction { variance, data_weight } => {
            let pred = oracle_feed(variance);
            let z: Vec<Vector> = measured
                .iter()
                .zip(&nominal)
                .map(|(y, yb)| y * data_weight + yb * (1.0 - data_weight))
                .collect();
            (z.clone(), Some(pred), z, PredictorKind::OnePoint)
        }
        Regime::ExtrapolationA => (measured.clone(), None, measured, cfg.predictor),
        Regime::ExtrapolationB { window } => {
            let src = trailing_mean(&measured, window);
            (measured, None, src, cfg.predictor)
        }
    };

    let measurement_errors: Vec<Vector> = corrections.iter().zip(&nominal).map(|(z, yb)| z - yb).collect();
    let prediction_errors: Vec<Vector> = match &oracle {
        Some(pred) => (0..len - 1).map(|k| &pred[k] - &nominal[k + 1]).collect(),
        None => {
            let coeffs = predictor.coefficients();
            (coeffs.len() - 1..len.saturating_sub(1))
                .map(|k| {
                    let mut guess = Vector::zeros(d);
                    for (i, c) in coeffs.iter().enumerate() {
                        guess += &extrapolated[k - i] * *c;
                    }
                    guess - &nominal[k + 1]
                })
                .collect()
        }
    };

    Ok(Prepared {
        cost,
        reg,
        steps,
        h,
        times,
        nominal,
        truth,
        corrections,
        oracle,
        extrapolated,
        predictor,
        prediction_errors,
        measurement_errors,
    })
}

/// Filter covariances in state units: `Q = (C₀/μ)² Σ_pred`, `R = (C₀ g_C)² Σ_meas`,
/// where `g_C = (1 − (1 − βμ)^C)/μ` is the slowest-mode gain of `C` correction steps.
pub fn filter_covariances(prep: &Prepared, c: usize, full: bool) -> Result<CovModel> {
    let n = prep.cost.dim_x();
    let mu = prep.cost.mu();
    let c0 = prep.coupling()?;
    let d = prep.cost.dim_y();
    let sp = Prepared::noise_cov(&prep.prediction_errors, d, full)?;
    let sm = Prepared::noise_cov(&prep.measurement_errors, d, full)?;
    if d != n {
        // Isotropic summary when data and decision spaces differ.
        let q = (c0 / mu).powi(2) * sp.trace() / d as f64;
        let gc = (1.0 - (1.0 - prep.steps.beta * mu).powi(c as i32)) / mu;
        let r = (c0 * gc).powi(2) * sm.trace() / d as f64;
        return CovModel::isotropic(n, q + COV_FLOOR, r + COV_FLOOR);
    }
    let gc = (1.0 - (1.0 - prep.steps.beta * mu).powi(c as i32)) / mu;
    let eye = Matrix::identity(n, n) * COV_FLOOR;
    CovModel::constant(sp * (c0 / mu).powi(2) + &eye, sm * (c0 * gc).powi(2) + eye)
}

/// Largest one-step contraction `‖I − αH‖`, `‖I − βH‖` over the ground-truth trajectory.
///
/// These are the local Lipschitz constants of the prediction and correction
/// steps near the optimal trajectory, usually well below the `(μ, L)` formula.
pub fn empirical_contraction(prep: &Prepared) -> ContractionFactors {
    let n = prep.cost.dim_x();
    let eye = Matrix::identity(n, n);
    let mut f = ContractionFactors { rho_p: 0.0, rho_c: 0.0 };
    for (x, y) in prep.truth.trajectory.iter().zip(&prep.nominal) {
        let hess = prep.cost.hess(x, y);
        f.rho_p = f.rho_p.max(spectral_norm(&(&eye - &hess * prep.steps.alpha)));
        f.rho_c = f.rho_c.max(spectral_norm(&(&eye - &hess * prep.steps.beta)));
    }
    f
}

/// Scalar design data for a prepared stream.
pub fn design_params(
    cfg: &ExperimentConfig,
    prep: &Prepared,
    bounds: BoundsSource,
) -> Result<LmiScalarParams> {
    let mu = prep.cost.mu();
    let factors = contraction_factors(mu, prep.cost.lip(), prep.steps)?;
    let c0 = prep.coupling()?;
    match bounds {
        BoundsSource::Empirical => {
            let factors = empirical_contraction(prep);
            let d = prep.cost.dim_y();
            let sp = Prepared::noise_cov(&prep.prediction_errors, d, false)?;
            let sm = Prepared::noise_cov(&prep.measurement_errors, d, false)?;
            let tau_mu = c0 * sp.trace().max(0.0).sqrt() / mu;
            let sigma_c = prep.steps.beta * c0 * sm.trace().max(0.0).sqrt() / (1.0 - factors.rho_c);
            Ok(LmiScalarParams::from_noise_scales(
                factors,
                cfg.p,
                cfg.c,
                prep.truth.drift_delta,
                tau_mu,
                sigma_c,
            ))
        }
        BoundsSource::WorstCase => {
            let StreamSource::Synthetic(spec) = &cfg.stream else {
                return Err(Error::Config("worst-case bounds need a synthetic stream model".into()));
            };
            let model = ModelBounds {
                c0,
                c: spec.bound_c(),
                h: spec.h,
                sigma: spec.bound_sigma(),
                mu,
            };
            let wc = worst_case_params_from_model(&model, factors, cfg.p, cfg.c, prep.predictor, prep.steps.beta);
            Ok(LmiScalarParams::from_worst_case(&wc))
        }
    }
}

/// Designs the gain requested by `req`.
pub fn design_for(cfg: &ExperimentConfig, prep: &Prepared, req: &DesignRequest) -> Result<GainCertificate> {
    let params = design_params(cfg, prep, req.bounds)?;
    let grid = req.rho_grid.clone().unwrap_or_else(|| default_rho_grid(&params));
    let n = prep.cost.dim_x();
    match req.design {
        DesignKind::Static => design_static_gain(&params, &grid, n),
        DesignKind::Lpv => {
            if !(0.0..=1.0).contains(&req.q1_fraction) {
                return Err(Error::Config("q1_fraction must lie in [0, 1]".into()));
            }
            let base = LmiScalarParams {
                q: params.q * (1.0 - req.q1_fraction),
                ..params
            };
            let thetas = uniform_theta_grid(req.theta_points);
            design_lpv_gain(&base, params.q * req.q1_fraction, req.nu, &thetas, &grid, n)
        }
    }
}

struct GainPlan {
    gain: GainSchedule,
    certificate: Option<GainCertificate>,
    theta: Option<ThetaTracker>,
}

fn plan_gain(cfg: &ExperimentConfig, prep: &Prepared) -> Result<GainPlan> {
    let n = prep.cost.dim_x();
    let (gain, certificate, window) = match &cfg.gain {
        Some(GainSpec::Fixed(g)) => {
            g.validate(n)?;
            (g.clone(), None, DesignRequest::new(DesignKind::Lpv).theta_window)
        }
        other => {
            let req = match other {
                Some(GainSpec::Design(req)) => req.clone(),
                _ => DesignRequest::new(DesignKind::Static),
            };
            let cert = design_for(cfg, prep, &req)?;
            (cert.gain.clone(), Some(cert), req.theta_window)
        }
    };
    let theta = gain.is_lpv().then(|| {
        let drift = calibrate_max_drift(&prep.corrections, prep.h, window);
        let signal = ThetaSignal {
            max_drift: if drift > 0.0 { drift } else { 1.0 },
            window,
        };
        ThetaTracker::new(signal, prep.h)
    });
    Ok(GainPlan {
        gain,
        certificate,
        theta,
    })
}

/// Runs the configured algorithm and scores it against the ground truth.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<MetricsReport> {
    let start = Instant::now();
    let prep = prepare(cfg)?;
    run_prepared(cfg, &prep, start)
}

/// Runs an algorithm on an already prepared stream; `cfg` must be the config `prep` came from,
/// up to the algorithm and step counts.
pub fn run_prepared(cfg: &ExperimentConfig, prep: &Prepared, start: Instant) -> Result<MetricsReport> {
    cfg.validate()?;
    let cost = prep.cost.as_ref();
    let n = cost.dim_x();
    let len = prep.len();
    let mut errs = Vec::with_capacity(len);
    let mut hist = DataHistory::new();
    let mut certificate = None;
    let mut theta_max_step = None;

    match cfg.algorithm {
        Algorithm::TvEkf => {
            let cov = filter_covariances(prep, cfg.c, cfg.full_covariance)?;
            let mut state = EkfState::new(n);
            for k in 0..len {
                prep.history_after(k, &mut hist);
                state = ekf_step(
                    &state,
                    cost,
                    prep.predictor,
                    &hist,
                    prep.steps,
                    cfg.p,
                    cfg.c,
                    &cov,
                    &prep.corrections[k],
                    EkfOptions::default(),
                )?;
                errs.push((&state.x_corr - &prep.truth.trajectory[k]).norm());
            }
        }
        alg => {
            let mut plan = match alg {
                Algorithm::TvContract => Some(plan_gain(cfg, prep)?),
                _ => None,
            };
            let mut x_pred = Vector::zeros(n);
            for k in 0..len {
                let z = &prep.corrections[k];
                let x = match plan.as_mut() {
                    Some(plan) => {
                        let theta = plan.theta.as_mut().map_or(0.0, |t| t.observe(z));
                        contract_step(&x_pred, cost, &prep.reg, z, prep.steps, cfg.c, &plan.gain, theta)?
                    }
                    None => correct_psi(&x_pred, cost, &prep.reg, z, prep.steps, cfg.c, false).corrected,
                };
                errs.push((&x - &prep.truth.trajectory[k]).norm());
                prep.history_after(k, &mut hist);
                x_pred = predict_phi(&x, cost, &prep.reg, prep.predictor, &hist, prep.steps, cfg.p, false)?.x;
            }
            if let Some(plan) = plan {
                certificate = plan.certificate;
                theta_max_step = plan.theta.map(|t| t.max_step());
            }
        }
    }

    let warmup = ((len as f64) * cfg.warmup_fraction).floor() as usize;
    let (mean_err, p25, p75) = summarize(&errs, warmup)?;
    Ok(MetricsReport {
        regime: cfg.regime.label().to_string(),
        algorithm: cfg.algorithm.label().to_string(),
        p: cfg.p,
        c: cfg.c,
        seed: cfg.seed,
        mean_err,
        p25,
        p75,
        per_step_err: errs,
        warmup,
        ae_bound: certificate.as_ref().map(|c| c.ae_bound),
        certificate,
        theta_max_step,
        drift_delta: prep.truth.drift_delta,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
        config_echo: cfg.clone(),
    })
}
