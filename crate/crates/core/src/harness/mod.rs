//! Experiment front end: configuration, reference optima, runs, CSV output,
//! slope fitting and timing.

mod config;
mod experiment;
mod reference;
mod slope;

pub use config::{
    default_constants, parse_config, parse_config_str, parse_config_with_base, preset, Algorithm,
    ExperimentConfig, PolicyFamily, PolicySpec, DEFAULT_CHANNEL_SEED, DEFAULT_OUTPUT, PRESETS,
};
pub use experiment::{
    csv_name, horizon_sweep, log_spaced_horizons, read_gap_series, run_algorithm, run_experiment,
    summary_window, timing_report, write_csv, ExperimentSummary, RunSummary, SweepPoint, TimingRow,
    CSV_HEADER,
};
pub use reference::{
    cross_check_policy, reference_optimum, reference_optimum_with, ReferenceOptimum,
    CONSISTENCY_TOLERANCE, DEFAULT_MXL_ITERATIONS, DEFAULT_TOLERANCE, MAX_ROUNDS,
};
pub use slope::fit_loglog_slope;
