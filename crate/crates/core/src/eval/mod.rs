//! Classification metrics, hypothesis tests and report generation.

pub mod metrics;
pub mod report;
pub mod stats;

pub use metrics::{f1_score, metrics, ConfusionCounts, MetricSet};
pub use report::{build_report, build_report_with, read_results_csv, results_csv, ParticipantResult, StatReport};
pub use stats::{
    bonferroni, kruskal_wallis, levene, shapiro_wilk, wilcoxon_signed_rank, LeveneCenter, TestMethod, TestResult,
};
