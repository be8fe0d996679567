//! Performance metrics and statistical comparisons over run traces.

mod metrics;
mod stats;
mod table;

pub use metrics::{budget_ratio, e_bbc, env_errors, loss_curve, LossPoint};
pub use stats::{
    a12, scott_knott, wilcoxon_signed_rank, EffectSize, Verdict, Wilcoxon, WilcoxonMethod,
};
pub use table::{A12Row, MetricRow, MetricTable, RankRow, TestReport, WilcoxonRow};
