//! Experiment runner: planner variants over shared seeded scenes, sizing,
//! ground-truth matching, metrics and reports.

mod experiment;
mod metrics;
mod report;
mod variant;

pub use experiment::{
    ablation_matrix, attention_detections, evaluate_tracks, run_experiment, run_trial, size_episode, summarize,
    ExperimentConfig, ExperimentReport, MatchedFruitlet, TrialResult, VariantSummary,
};
pub use metrics::{compute_metrics, match_to_ground_truth, r_squared, Metrics};
pub use report::{
    read_report, summary_markdown, write_fruitlets_csv, write_report, write_summary_csv, write_trials_csv,
};
pub use variant::Variant;
