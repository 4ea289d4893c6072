//! Experiment runner: training loops, periodic greedy evaluation, CSV
//! learning curves and their aggregation.

mod config;
mod demo;
mod run;
mod summary;

pub use config::{ExperimentConfig, RiskMode};
pub use demo::demo_episode;
pub use run::{
    checkpoint_path, evaluate, run_experiment, train, train_on, write_results_csv, EvalRow, EvalStats, RunResult,
    CHECKPOINT_DIR, CSV_HEADER, META_FILE, RESULTS_FILE,
};
pub use summary::{
    final_rows, median, median_curve, read_results_csv, steps_to_reach, summarize, summary_table,
    write_summary_csv, Spread, SummaryRow,
};
