//! Instance generation, pipeline execution, and report and plot emission.

mod config;
mod generate;
mod pipeline;
mod suite;
pub mod plot;

pub use config::{parse_checks, CheckFamily, Resolved, RunConfig, MAX_RESOLUTION};
pub use generate::{suite_instance, FSpec, NSpec};
pub use pipeline::{decompose, decomposition_json, indicator_sweep, run_pipeline, verify, write_outputs, Run, INTERP_EXPONENT, LP_EXPONENTS};
pub use suite::{run_suite, suite_config, summarize_suite, SuiteSummary, Worst};
