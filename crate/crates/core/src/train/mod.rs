//! Training loop, ranking metrics and evaluation reports.

mod experiment;
mod metrics;
mod report;
mod trainer;

pub use experiment::{message_repository, model_label, run_experiment, ExperimentContext, ExperimentRun};
pub use metrics::{bce_loss, hr_at_k, mrr, mrr_shared, HR_KS, TIE_RULE};
pub use report::{EvalReport, MetricSummary, RunMetrics, PROTOCOL};
pub(crate) use report::write_json;
pub use trainer::{
    evaluate, ranking_metrics, score_queries, train, EpochLog, TrainConfig, TrainOutcome, VisionProvider,
    VisualInput,
};
