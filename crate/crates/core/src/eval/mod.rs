//! Evaluation harness: synthetic worlds, retrieval metrics, trajectory
//! ingestion and the localization benchmark.

mod benchmark;
mod metrics;
mod trajectory;
mod world;

pub use benchmark::{
    run_benchmark, BenchmarkConfig, BenchmarkReport, Method, QueryOutcome, ReportRow,
};
pub use metrics::{
    auc, read_records_csv, recall_at_1, recall_at_n, roc_curve, write_records_csv, QueryItem,
    QueryRecord, QuerySet, ReferenceItem, RocPoint, ScoreMatrix,
};
pub use trajectory::{
    ingest_trajectory, query_set_from_trajectory, IngestOptions, TrajectoryFile, TrajectoryRow,
};
pub use world::{
    generate_world, generate_world_with_landmarks, sample_poses, Landmark, SyntheticWorldSpec,
};
