//! Evaluation: data splits, top-k metrics and generation benchmarks.

pub mod bench;
pub mod metrics;
pub mod split;

pub use bench::{bench_generation, BenchReport, BenchRow, BenchSettings};
pub use metrics::{
    evaluate, precision_at_k, recall_at_k, top_k, EvalReport, EvalRow, MetricCurve, Recommender, DEFAULT_MAX_K,
};
pub use split::{holdout, kfold, RatingEdge, Split};
