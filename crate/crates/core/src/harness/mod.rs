//! Corpus loading, benchmark runs, metrics and reports.

pub mod bench;
pub mod load;
pub mod metrics;
pub mod report;

pub use bench::{run_benchmark, run_benchmark_multi, run_specs, BenchmarkResult, ScenarioOutcome};
pub use load::{load_config, load_corpus, load_scenario};
pub use metrics::{Confusion, Metrics};
pub use report::{emit_report, write_csv, write_trace, MonitorOutput, ReportFormat, TraceEntry};
