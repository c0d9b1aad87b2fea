use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{node_pe, PeKind};
use crate::graph::{Graph, SplitSet};
use crate::model::{Aggregator, Model, ModelConfig, MpnnConfig};
use crate::par::Exec;
use crate::render::layout_edges;
use crate::render::RenderStyle;
use crate::train::{train, EvalReport, TrainConfig, VisualInput};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeBaselineConfig {
    pub kind: PeKind,
    /// Encoding width; `ImageCoords2D` requires 2.
    pub dim: usize,
    pub hidden: usize,
    pub train: TrainConfig,
    pub seeds: Vec<u64>,
    /// Layout style for `ImageCoords2D`.
    pub style: RenderStyle,
}

impl Default for PeBaselineConfig {
    fn default() -> Self {
        PeBaselineConfig {
            kind: PeKind::LaplacianPE,
            dim: 16,
            hidden: 64,
            train: TrainConfig::default(),
            seeds: vec![0],
            style: RenderStyle::default(),
        }
    }
}

/// Two GCN layers over the positional encoding as node features, then a
/// two-layer MLP readout. Encodings are computed on the message graph.
pub fn pe_baseline_experiment(
    dataset: &str,
    g: &Graph,
    splits: &SplitSet,
    cfg: &PeBaselineConfig,
    exec: Exec,
) -> Result<EvalReport> {
    if cfg.seeds.is_empty() {
        return Err(Error::Config("at least one seed is required".into()));
    }
    let start = Instant::now();
    let msg = splits.message_graph(g)?;
    let coords = (cfg.kind == PeKind::ImageCoords2D)
        .then(|| layout_edges(msg.num_nodes(), msg.edges(), &cfg.style, 0).positions);
    let pe = node_pe(&msg, cfg.kind, cfg.dim, coords.as_deref())?;
    let g_pe = g.clone().with_features(pe)?;
    let model_cfg = ModelConfig {
        readout_hidden: cfg.hidden,
        ..ModelConfig::baseline(MpnnConfig {
            depth: 2,
            in_dim: cfg.dim,
            hidden_dim: cfg.hidden,
            aggregator: Aggregator::GcnNormalizedSum,
        })
    };
    let mut runs = Vec::new();
    for &seed in &cfg.seeds {
        let model = Model::new(model_cfg.clone(), seed, None)?;
        let tc = TrainConfig { seed, ..cfg.train.clone() };
        runs.push(train(model, &g_pe, splits, VisualInput::None, &tc, exec)?.test);
    }
    let mut report = EvalReport::aggregate(
        dataset,
        &format!("gcn-pe-{:?}", cfg.kind).to_lowercase(),
        cfg.seeds.clone(),
        &runs,
        0,
        0,
        start.elapsed().as_secs_f64(),
    );
    report.config = serde_json::to_string(cfg).ok();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::gen_erdos_renyi;
    use crate::graph::{make_splits, SplitRatios};

    #[test]
    fn every_kind_runs() {
        let g = gen_erdos_renyi(24, 0.2, 5).unwrap();
        let s = make_splits(&g, SplitRatios::default(), 0).unwrap();
        for (kind, dim) in [
            (PeKind::DegreeCentrality, 1),
            (PeKind::LaplacianPE, 4),
            (PeKind::DistanceVector, 3),
            (PeKind::ImageCoords2D, 2),
        ] {
            let cfg = PeBaselineConfig {
                kind,
                dim,
                hidden: 8,
                train: TrainConfig {
                    epochs: 2,
                    batch_size: 32,
                    ..TrainConfig::default()
                },
                ..PeBaselineConfig::default()
            };
            let rep = pe_baseline_experiment("er24", &g, &s, &cfg, Exec::Sequential).unwrap();
            assert!(rep.metrics.contains_key("mrr"), "{kind:?}");
        }
    }

    #[test]
    fn laplacian_dim_must_be_below_n() {
        let g = gen_erdos_renyi(24, 0.2, 5).unwrap();
        let s = make_splits(&g, SplitRatios::default(), 0).unwrap();
        let cfg = PeBaselineConfig {
            dim: 24,
            ..PeBaselineConfig::default()
        };
        assert!(pe_baseline_experiment("er24", &g, &s, &cfg, Exec::Sequential).is_err());
    }
}
