use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::contract::GainSchedule;
use crate::design::DEFAULT_NU;
use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::operators::{PredictorKind, StepSizes};
use crate::problem::{
    ride_hail_cost, LinearParamCost, NoiseModel, Nominal, QuadraticCost, Regularizer, RideHailParams,
    SinusoidTerm, SmoothCost, StreamSpec,
};

/// `f(x; y) = ½ xᵀHx − bᵀx + yᵀAx` plus a regularizer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearParamSpec {
    /// Symmetric positive definite `n × n` Hessian, as rows.
    pub hessian: Vec<Vec<f64>>,
    #[serde(default)]
    pub b: Vec<f64>,
    /// `d × n` coupling, as rows.
    pub a: Vec<Vec<f64>>,
    #[serde(default = "zero_reg")]
    pub regularizer: Regularizer,
}

fn zero_reg() -> Regularizer {
    Regularizer::Zero
}

fn rows_to_matrix(rows: &[Vec<f64>], what: &str) -> Result<Matrix> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != m) {
        return Err(Error::Config(format!("{what} has rows of different lengths")));
    }
    Ok(Matrix::from_fn(n, m, |i, j| rows[i][j]))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProblemSpec {
    RideHail(RideHailParams),
    LinearParam(LinearParamSpec),
}

impl ProblemSpec {
    /// The smooth cost and the regularizer. `constrained = false` drops the ride-hailing box.
    pub fn build(&self, constrained: bool) -> Result<(Arc<dyn SmoothCost>, Regularizer)> {
        match self {
            ProblemSpec::RideHail(p) => {
                let cost = ride_hail_cost(p)?;
                let reg = if constrained { p.regularizer() } else { Regularizer::Zero };
                reg.validate()?;
                Ok((Arc::new(cost), reg))
            }
            ProblemSpec::LinearParam(spec) => {
                let h = rows_to_matrix(&spec.hessian, "hessian")?;
                let n = h.nrows();
                let b = if spec.b.is_empty() {
                    Vector::zeros(n)
                } else {
                    Vector::from_column_slice(&spec.b)
                };
                let base = QuadraticCost::new(h, b, Matrix::zeros(n, 0))?;
                let a = rows_to_matrix(&spec.a, "a")?;
                let cost = LinearParamCost::new(Arc::new(base), a)?;
                spec.regularizer.validate()?;
                let reg = if constrained { spec.regularizer.clone() } else { Regularizer::Zero };
                Ok((Arc::new(cost), reg))
            }
        }
    }
}

/// Where the data stream comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StreamSource {
    Synthetic(StreamSpec),
    Csv(CsvStream),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvStream {
    pub csv_path: PathBuf,
    /// Centered moving-average window used for the ground-truth data.
    #[serde(default = "default_smoothing")]
    pub smoothing_window: usize,
}

fn default_smoothing() -> usize {
    5
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// Prediction-correction baseline.
    Pc,
    TvEkf,
    TvContract,
    /// Correction only, on the raw stream (`P = 0`).
    StochCorrectionOnly,
}

impl Algorithm {
    pub fn label(self) -> &'static str {
        match self {
            Algorithm::Pc => "pc",
            Algorithm::TvEkf => "tv_ekf",
            Algorithm::TvContract => "tv_contract",
            Algorithm::StochCorrectionOnly => "stoch_correction_only",
        }
    }
}

/// How predictions and corrections are fed to the algorithms.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Regime {
    /// Predicted data is the next nominal sample plus `N(0, variance I)`;
    /// corrections use the raw stream.
    GoodPrediction {
        #[serde(default = "good_variance")]
        variance: f64,
    },
    /// Predicted data is the next nominal sample plus `N(0, variance I)`;
    /// corrections use `w y_k + (1 − w) ȳ_k`.
    PoorPrediction {
        #[serde(default = "poor_variance")]
        variance: f64,
        #[serde(default = "poor_weight")]
        data_weight: f64,
    },
    /// Extrapolation of the raw stream with the configured predictor.
    #[default]
    ExtrapolationA,
    /// Extrapolation of a trailing average of the raw stream.
    ExtrapolationB {
        #[serde(default = "trailing_window")]
        window: usize,
    },
}

fn good_variance() -> f64 {
    10.0
}
fn poor_variance() -> f64 {
    200.0
}
fn poor_weight() -> f64 {
    0.05
}
fn trailing_window() -> usize {
    3
}

impl Regime {
    pub fn good_prediction() -> Self {
        Regime::GoodPrediction {
            variance: good_variance(),
        }
    }

    pub fn poor_prediction() -> Self {
        Regime::PoorPrediction {
            variance: poor_variance(),
            data_weight: poor_weight(),
        }
    }

    pub fn extrapolation_b() -> Self {
        Regime::ExtrapolationB {
            window: trailing_window(),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Regime::GoodPrediction { .. } => "good_prediction",
            Regime::PoorPrediction { .. } => "poor_prediction",
            Regime::ExtrapolationA => "extrapolation_a",
            Regime::ExtrapolationB { .. } => "extrapolation_b",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Regime::GoodPrediction { variance } if !(variance >= 0.0) => {
                Err(Error::Config("prediction variance must be nonnegative".into()))
            }
            Regime::PoorPrediction { variance, data_weight }
                if !(variance >= 0.0) || !(0.0..=1.0).contains(&data_weight) =>
            {
                Err(Error::Config("poor_prediction needs variance >= 0 and data_weight in [0, 1]".into()))
            }
            Regime::ExtrapolationB { window: 0 } => Err(Error::Config("trailing window must be positive".into())),
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignKind {
    Static,
    Lpv,
}

/// Source of the constants fed to the gain design.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundsSource {
    /// Noise scales measured against the nominal data, drift from the ground truth.
    #[default]
    Empirical,
    /// Worst-case constants from the stream model.
    WorstCase,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignRequest {
    pub design: DesignKind,
    #[serde(default)]
    pub bounds: BoundsSource,
    /// Share of the prediction noise scale assigned to the scheduled part `Q₁`.
    #[serde(default = "default_q1_fraction")]
    pub q1_fraction: f64,
    #[serde(default = "default_nu")]
    pub nu: f64,
    #[serde(default = "default_theta_points")]
    pub theta_points: usize,
    /// Backward-difference lag of the scheduling signal.
    #[serde(default = "default_theta_window")]
    pub theta_window: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_grid: Option<Vec<f64>>,
}

fn default_q1_fraction() -> f64 {
    0.8
}
fn default_nu() -> f64 {
    DEFAULT_NU
}
fn default_theta_points() -> usize {
    4
}
fn default_theta_window() -> usize {
    6
}

impl DesignRequest {
    pub fn new(design: DesignKind) -> Self {
        Self {
            design,
            bounds: BoundsSource::Empirical,
            q1_fraction: default_q1_fraction(),
            nu: default_nu(),
            theta_points: default_theta_points(),
            theta_window: default_theta_window(),
            rho_grid: None,
        }
    }
}

/// A fixed gain or a request to design one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GainSpec {
    Fixed(GainSchedule),
    Design(DesignRequest),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    /// Keep the regularizer of the problem; `false` solves the unconstrained problem.
    #[serde(default = "yes")]
    pub constrained: bool,
    pub stream: StreamSource,
    pub algorithm: Algorithm,
    #[serde(rename = "P", alias = "p")]
    pub p: usize,
    #[serde(rename = "C", alias = "c")]
    pub c: usize,
    /// Defaults to `α = μ/L²`, `β = 1/L`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<StepSizes>,
    #[serde(default = "default_predictor")]
    pub predictor: PredictorKind,
    /// Used by `tv_contract`; defaults to a static design.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gain: Option<GainSpec>,
    #[serde(default)]
    pub regime: Regime,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<PathBuf>,
    /// Leading fraction of steps left out of the metrics.
    #[serde(default = "default_warmup")]
    pub warmup_fraction: f64,
    #[serde(default = "default_truth_tol")]
    pub truth_tol: f64,
    /// Full or isotropic noise covariances for the filter.
    #[serde(default = "yes")]
    pub full_covariance: bool,
}

fn yes() -> bool {
    true
}
fn default_predictor() -> PredictorKind {
    PredictorKind::OnePoint
}
fn default_warmup() -> f64 {
    0.05
}
fn default_truth_tol() -> f64 {
    1e-10
}

impl ExperimentConfig {
    /// Unconstrained five-company ride-hailing problem on a synthetic week of
    /// 5-minute demand samples with measurement variance 50.
    pub fn synthetic_default() -> Self {
        Self {
            problem: ProblemSpec::RideHail(RideHailParams::default()),
            constrained: false,
            stream: StreamSource::Synthetic(synthetic_demand_stream()),
            algorithm: Algorithm::Pc,
            p: 5,
            c: 1,
            steps: Some(StepSizes {
                alpha: 0.15,
                beta: 0.5,
            }),
            predictor: PredictorKind::OnePoint,
            gain: None,
            regime: Regime::good_prediction(),
            seed: 0,
            output_path: None,
            warmup_fraction: default_warmup(),
            truth_tol: default_truth_tol(),
            full_covariance: true,
        }
    }

    pub fn with_algorithm(mut self, algorithm: Algorithm, p: usize, c: usize) -> Self {
        self.algorithm = algorithm;
        self.p = p;
        self.c = c;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.p + self.c == 0 {
            return Err(Error::Config("P + C must be at least 1".into()));
        }
        if (self.algorithm == Algorithm::StochCorrectionOnly) != (self.p == 0) {
            return Err(Error::Config("stoch_correction_only is exactly the P = 0 algorithm".into()));
        }
        if self.algorithm == Algorithm::TvEkf && self.constrained && !self.is_unconstrained_problem() {
            return Err(Error::Config("tv_ekf needs an unconstrained problem (set constrained = false)".into()));
        }
        if !(0.0..1.0).contains(&self.warmup_fraction) {
            return Err(Error::Config("warmup_fraction must lie in [0, 1)".into()));
        }
        if !(self.truth_tol > 0.0) {
            return Err(Error::Config("truth_tol must be positive".into()));
        }
        self.regime.validate()?;
        if let StreamSource::Synthetic(spec) = &self.stream {
            spec.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        Ok(())
    }

    fn is_unconstrained_problem(&self) -> bool {
        match &self.problem {
            ProblemSpec::RideHail(_) => false,
            ProblemSpec::LinearParam(spec) => spec.regularizer.is_zero(),
        }
    }
}

/// A week of 5-minute demand samples for five companies of different sizes,
/// with daily and half-daily cycles.
pub fn synthetic_demand_stream() -> StreamSpec {
    let offset = vec![500.0, 420.0, 350.0, 280.0, 220.0];
    let day = 2.0 * std::f64::consts::PI / 1440.0;
    StreamSpec {
        h: 5.0,
        horizon: 2016,
        nominal: Nominal::SinusoidMixture {
            terms: vec![
                SinusoidTerm {
                    amplitude: offset.iter().map(|o| 0.45 * o).collect(),
                    omega: day,
                    phase: -1.2,
                },
                SinusoidTerm {
                    amplitude: offset.iter().map(|o| 0.12 * o).collect(),
                    omega: 2.0 * day,
                    phase: 0.4,
                },
            ],
            offset,
        },
        noise: NoiseModel::Isotropic { variance: 50.0 },
        seed: 0,
    }
}
