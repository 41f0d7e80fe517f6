use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::design::GainCertificate;
use crate::error::{Error, Result};

/// Linear-interpolation quantile: sorted value at fractional index `q (N − 1)`.
pub fn percentiles(errs: &[f64], q: f64) -> Result<f64> {
    if errs.is_empty() {
        return Err(Error::EmptyInput);
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::InvalidParams(format!("quantile {q} outside [0, 1]")));
    }
    let mut sorted = errs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let w = pos - lo as f64;
    Ok(sorted[lo] + (sorted[hi] - sorted[lo]) * w)
}

/// Outcome of one experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub regime: String,
    pub algorithm: String,
    #[serde(rename = "P")]
    pub p: usize,
    #[serde(rename = "C")]
    pub c: usize,
    pub seed: u64,
    /// Mean of `‖x_k − x̂*_k‖` after warmup.
    pub mean_err: f64,
    pub p25: f64,
    pub p75: f64,
    /// Every step, warmup included.
    pub per_step_err: Vec<f64>,
    pub warmup: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ae_bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<GainCertificate>,
    /// Largest observed step of the scheduling parameter.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_max_step: Option<f64>,
    pub drift_delta: f64,
    pub wall_ms: f64,
    pub config_echo: ExperimentConfig,
}

impl MetricsReport {
    /// Errors that enter the statistics.
    pub fn scored(&self) -> &[f64] {
        &self.per_step_err[self.warmup.min(self.per_step_err.len())..]
    }
}

/// `(mean, p25, p75)` of the errors after dropping the first `warmup`.
pub fn summarize(errs: &[f64], warmup: usize) -> Result<(f64, f64, f64)> {
    let tail = &errs[warmup.min(errs.len())..];
    if tail.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mean = tail.iter().sum::<f64>() / tail.len() as f64;
    Ok((mean, percentiles(tail, 0.25)?, percentiles(tail, 0.75)?))
}

/// Cross-seed summary of one `(regime, algorithm, P, C)` cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub regime: String,
    pub algorithm: String,
    #[serde(rename = "P")]
    pub p: usize,
    #[serde(rename = "C")]
    pub c: usize,
    pub seeds: usize,
    /// Mean over seeds of the per-run mean error.
    pub mean_err: f64,
    pub min_mean_err: f64,
    pub max_mean_err: f64,
}

pub fn summarize_seeds(reports: &[MetricsReport]) -> Vec<SeedSummary> {
    let mut cells: BTreeMap<(String, String, usize, usize), Vec<f64>> = BTreeMap::new();
    for r in reports {
        cells
            .entry((r.regime.clone(), r.algorithm.clone(), r.p, r.c))
            .or_default()
            .push(r.mean_err);
    }
    cells
        .into_iter()
        .map(|((regime, algorithm, p, c), means)| SeedSummary {
            regime,
            algorithm,
            p,
            c,
            seeds: means.len(),
            mean_err: means.iter().sum::<f64>() / means.len() as f64,
            min_mean_err: means.iter().copied().fold(f64::INFINITY, f64::min),
            max_mean_err: means.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
        .collect()
}
