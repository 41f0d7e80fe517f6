//! Experiment orchestration: ground truth, regimes, metrics and reports.

mod config;
mod io;
mod metrics;
mod run;
mod sweep;
mod truth;

pub use config::{
    synthetic_demand_stream, Algorithm, BoundsSource, CsvStream, DesignKind, DesignRequest, ExperimentConfig,
    GainSpec, LinearParamSpec, ProblemSpec, Regime, StreamSource,
};
pub use io::{
    emit_per_step, emit_report, emit_seed_summary, fmt_sig6, ingest_csv, ingest_reader, report_csv, Ingested,
    ReportFormat, REPORT_HEADER,
};
pub use metrics::{percentiles, summarize, summarize_seeds, MetricsReport, SeedSummary};
pub use run::{design_for, design_params, empirical_contraction, filter_covariances, prepare, run_experiment, run_prepared, Prepared};
pub use sweep::{run_sweep, SweepConfig};
pub use truth::{ground_truth_trajectory, GroundTruth, TRUTH_MAX_ITERS};
