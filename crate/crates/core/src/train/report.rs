use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::metrics::TIE_RULE;
use crate::error::{Error, Result};

/// Evaluation protocol version for Planetoid-style splits.
pub const PROTOCOL: &str = "v1";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single run.
    pub std: f64,
}

impl MetricSummary {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        MetricSummary { mean, std }
    }
}

/// Metrics of one trained model on one split.
pub type RunMetrics = BTreeMap<String, f64>;

/// Mean ± std across seeds plus cost counters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub dataset: String,
    pub model: String,
    pub seeds: Vec<u64>,
    pub metrics: BTreeMap<String, MetricSummary>,
    pub encode_count: u64,
    pub render_count: u64,
    pub wall_seconds: f64,
    pub protocol: String,
    pub tie_rule: String,
    /// Effective configuration, when the run came from one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<String>,
}

impl EvalReport {
    /// Summarizes per-seed metric maps; only metrics present in every run
    /// are kept.
    pub fn aggregate(
        dataset: &str,
        model: &str,
        seeds: Vec<u64>,
        runs: &[RunMetrics],
        encode_count: u64,
        render_count: u64,
        wall_seconds: f64,
    ) -> Self {
        let mut metrics = BTreeMap::new();
        if let Some(first) = runs.first() {
            for name in first.keys() {
                let vals: Option<Vec<f64>> = runs.iter().map(|r| r.get(name).copied()).collect();
                if let Some(vals) = vals {
                    metrics.insert(name.clone(), MetricSummary::of(&vals));
                }
            }
        }
        EvalReport {
            dataset: dataset.to_string(),
            model: model.to_string(),
            seeds,
            metrics,
            encode_count,
            render_count,
            wall_seconds,
            protocol: PROTOCOL.to_string(),
            tie_rule: TIE_RULE.to_string(),
            config: None,
        }
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        write_json(self, path)
    }
}

pub(crate) fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Format(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}
