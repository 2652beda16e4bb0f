//! Experiment protocol: task orders, per-sequence reports, aggregate
//! accuracies, transfer tables and significance tests.

mod report;
mod stats;

pub use report::{
    default_checkpoints, draw_orders, ordered_tasks, run_model, sequence_specs, Comparison, ExperimentReport,
    ModelSummary, SequenceReport, SequenceSpec, PAIRING, REPORT_SCHEMA_VERSION,
};
pub use stats::{all_tasks_average, last_task_average, paired_t_test, transfer_table, TTest, TransferRow};
