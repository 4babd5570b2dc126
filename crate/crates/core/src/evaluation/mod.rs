//! Source/target splits, ACC/ITR metrics, repeated randomized experiments
//! and paired significance tests.

mod experiment;
mod metrics;
mod split;

pub use experiment::{
    run_experiment, run_rule_ablation, write_ablation, write_outcome, AblationReport,
    ExperimentConfig, ExperimentOutcome, ExperimentReport, PairedComparison, RuleSweep, Summary,
    TrialRecord, TRIALS_CSV_HEADER,
};
pub use metrics::{accuracy, itr, mean_std, paired_ttest, TTest};
pub use split::{split_source_target, SplitPlan};
