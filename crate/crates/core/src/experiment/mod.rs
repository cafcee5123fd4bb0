//! Sweep runner, summary files and the gradient checker behind the CLI.

mod config;
pub mod gradcheck;
mod run;
pub mod summary;

pub use config::ExperimentConfig;
pub use gradcheck::{grad_check, GradCheckOptions, GradCheckReport};
pub use run::{
    run_experiment, run_trial, write_report, write_summaries, Cell, ExperimentReport, TrialRun, TRIALS_FILE,
};
pub use summary::{
    emit_summary, mean_std, parse_summary, parse_trials, read_trials, summarize_groups, summary_tables, SummaryRow,
    SummaryTable, TrialResult,
};
