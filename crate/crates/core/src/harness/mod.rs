//! Experiment orchestration: configs, the episode loop, parallel
//! realizations, the minimum-ensemble-size search, and CSV output.

mod config;
mod output;
mod runner;
mod search;

pub use config::{EnvConfig, EnvFamilyName, ExperimentConfig, RunConfig, SearchConfig};
pub use output::{format_float, write_min_models_csv, write_summary_csv, write_traces_csv, OUTPUT_DIR_ENV};
pub use runner::{run_agent, run_experiment, run_realization, AgentResult, ExperimentOutput, RegretTrace, RunOptions};
pub use search::{min_models_search, MinModelsReport, MinModelsRow, WindowEstimate};
