//! Scenario presets, Monte Carlo orchestration, configuration files and
//! result output, plus the acceptance scenarios and property checks used by
//! `soseq verify`.

pub mod acceptance;
pub mod config;
pub mod output;
pub mod presets;
pub mod properties;
pub mod runner;

pub use config::{AlgorithmSpec, BlindCost, ChannelSpec, Method, PostProcessing, ScenarioConfig};
pub use output::{power_mean_db, read_csv, summarize, write_csv, write_outputs, AlgorithmSummary, ResultRow, Stat, Summary};
pub use presets::{preset, preset_toml, PRESETS};
pub use runner::{first_problem, run_scenario, run_seed, Execution, RunOptions, ScenarioResult};
