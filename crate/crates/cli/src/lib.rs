//! Experiment harness: campaign configs, scheduling of runs over
//! algorithms, dimensions and seeds, persistence, analysis and reporting.

pub mod analyze;
pub mod campaign;
pub mod config;
pub mod report;
pub mod store;

pub use analyze::{analyze, metric_table, Analysis};
pub use campaign::{load_manifest, problem_seed, run_campaign, run_seed, Manifest, Outcome};
pub use config::{parse_config, CampaignConfig, Mode};
pub use report::report;
