//! Synthetic streams, experiment runs and report files.

pub mod experiment;
pub mod generator;
pub mod report;

pub use experiment::{
    bench, prepare, replay, run_experiment, sensitivity_sweep, BenchReport, ExperimentConfig, ExperimentParams,
    ExperimentReport, ExperimentSummary, Prepared, SweepReport, Variant, WindowRecord,
};
pub use generator::{generate_pump_stream, DriftEvent, DriftKind, PumpStreamConfig};
pub use report::{emit_report, read_records_csv, read_records_jsonl, read_report, write_records_csv, ReportFormat};
