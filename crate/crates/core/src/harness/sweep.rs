use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{Algorithm, ExperimentConfig, Regime};
use super::metrics::MetricsReport;
use super::run::{prepare, run_prepared};
use crate::error::Result;

/// Grid of experiments around a base config. Empty lists keep the base value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub base: ExperimentConfig,
    #[serde(default)]
    pub algorithms: Vec<Algorithm>,
    /// `(P, C)` pairs. `stoch_correction_only` uses `P = 0` and each `C` once.
    #[serde(default)]
    pub step_counts: Vec<[usize; 2]>,
    #[serde(default)]
    pub regimes: Vec<Regime>,
    #[serde(default)]
    pub seeds: Vec<u64>,
}

impl SweepConfig {
    /// Cells in regime, seed, algorithm, `(P, C)` order.
    pub fn cells(&self) -> Vec<ExperimentConfig> {
        let b = &self.base;
        let regimes = if self.regimes.is_empty() { vec![b.regime.clone()] } else { self.regimes.clone() };
        let seeds = if self.seeds.is_empty() { vec![b.seed] } else { self.seeds.clone() };
        let algorithms = if self.algorithms.is_empty() { vec![b.algorithm] } else { self.algorithms.clone() };
        let counts = if self.step_counts.is_empty() { vec![[b.p, b.c]] } else { self.step_counts.clone() };
        let mut out = Vec::new();
        for regime in &regimes {
            for &seed in &seeds {
                for &alg in &algorithms {
                    let mut seen = Vec::new();
                    for &[p, c] in &counts {
                        let p = if alg == Algorithm::StochCorrectionOnly { 0 } else { p };
                        if seen.contains(&(p, c)) {
                            continue;
                        }
                        seen.push((p, c));
                        let mut cfg = b.clone().with_algorithm(alg, p, c);
                        cfg.regime = regime.clone();
                        cfg.seed = seed;
                        cfg.output_path = None;
                        out.push(cfg);
                    }
                }
            }
        }
        out
    }
}

/// Runs every cell; the stream and ground truth are built once per `(regime, seed)`.
///
/// Cells run in parallel and the reports come back in [`SweepConfig::cells`] order.
pub fn run_sweep(sweep: &SweepConfig) -> Result<Vec<MetricsReport>> {
    let cells = sweep.cells();
    let mut groups: Vec<Vec<ExperimentConfig>> = Vec::new();
    for cfg in cells {
        match groups.last_mut() {
            Some(g) if g[0].regime == cfg.regime && g[0].seed == cfg.seed => g.push(cfg),
            _ => groups.push(vec![cfg]),
        }
    }
    let nested: Vec<Vec<MetricsReport>> = groups
        .par_iter()
        .map(|group| {
            let start = Instant::now();
            let prep = prepare(&group[0])?;
            let setup = start.elapsed();
            group
                .par_iter()
                .map(|cfg| {
                    let mut r = run_prepared(cfg, &prep, Instant::now())?;
                    r.wall_ms += setup.as_secs_f64() * 1e3;
                    Ok(r)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(nested.into_iter().flatten().collect())
}
