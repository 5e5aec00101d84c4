//! Batch experiment driver: configuration, seeded runs, traces and summaries.

mod config;
mod csv;
mod experiment;

pub use config::{
    parse_config, parse_config_with, parse_seeds, ActionSetSpec, Bounds, EnvConfig,
    ExperimentConfig, PolicyConfig, DEFAULT_DELTA,
};
pub use csv::{emit_regret_csv, format_g12, regret_csv, CSV_HEADER};
pub use experiment::{
    build_environment, config_bounds, config_rho_threshold, run_experiment, run_seed, run_seeds,
    schedule_for, seed_block, sub_seed, summarize, write_outputs, ExitStatus, ExperimentOutcome,
    ExperimentSummary, SeedBound, SeedOutcome, SeedRun,
};
