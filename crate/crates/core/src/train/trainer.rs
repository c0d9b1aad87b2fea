use std::collections::HashMap;
use std::sync::Arc;
use std::time::Instant;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::metrics::{hr_at_k, mrr_shared, HR_KS};
use super::report::RunMetrics;
use crate::error::{Error, Result};
use crate::graph::{canonical_pair, Graph, NodeId, SplitSet};
use crate::model::{
    check_repo, graph_inputs, link_views, propagation, Counters, GraphInputs, Model, ModelKind, Vision,
};
use crate::nn::{Adam, AdamConfig, Tape};
use crate::par::Exec;
use crate::render::render;
use crate::rng::rng_for;
use crate::vsf::{EncoderHandle, VsfRepository};

/// Queries scored per tape during evaluation.
const EVAL_CHUNK: usize = 2048;
const MAX_WEIGHT_DECAY: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Positive links per step; each step adds as many sampled negatives.
    pub batch_size: usize,
    pub lr_main: f64,
    pub lr_vision: f64,
    pub weight_decay: f64,
    pub seed: u64,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    /// Validation selects on HR at this cut-off (clamped to the negatives available).
    pub select_k: usize,
    /// Also drop each step's positive links from the message adjacency.
    pub mask_message_edges: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 200,
            batch_size: 1024,
            lr_main: 1e-3,
            lr_vision: 1e-4,
            weight_decay: 0.0,
            seed: 0,
            patience: 20,
            select_k: 100,
            mask_message_edges: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch_size must be positive".into()));
        }
        if !(self.lr_main > 0.0 && self.lr_vision > 0.0) {
            return Err(Error::Config("learning rates must be positive".into()));
        }
        if !(0.0..=MAX_WEIGHT_DECAY).contains(&self.weight_decay) {
            return Err(Error::Config(format!(
                "weight_decay {} outside [0, {MAX_WEIGHT_DECAY}]",
                self.weight_decay
            )));
        }
        if self.select_k == 0 {
            return Err(Error::Config("select_k must be positive".into()));
        }
        Ok(())
    }

    fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr_main: self.lr_main,
            lr_vision: self.lr_vision,
            weight_decay: self.weight_decay,
            ..AdamConfig::default()
        }
    }
}

/// Visual side input for training and evaluation.
#[derive(Debug, Clone, Copy)]
pub enum VisualInput<'a> {
    None,
    /// Per-node VSFs for E-GVN.
    Repo(&'a VsfRepository),
    /// Frozen encoder for GVN; ignored when the model finetunes its own.
    Encoder(&'a EncoderHandle),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss: f64,
    pub valid: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the best validation epoch.
    pub model: Model,
    pub best_epoch: usize,
    pub select_metric: String,
    pub history: Vec<EpochLog>,
    pub valid: RunMetrics,
    pub test: RunMetrics,
    pub counters: Counters,
    pub stopped_early: bool,
    pub wall_seconds: f64,
}

/// Supplies per-batch visual input, remembering frozen link VSFs and
/// preprocessed images so each link is rendered and encoded once.
pub struct VisionProvider<'a> {
    graph: &'a Graph,
    input: VisualInput<'a>,
    nodes: Option<Array2<f64>>,
    link_vsf: HashMap<(NodeId, NodeId), Arc<Vec<f64>>>,
    link_img: HashMap<(NodeId, NodeId), Arc<Array2<f64>>>,
    exec: Exec,
    pub counters: Counters,
}

enum BatchVision {
    None,
    Links(Array2<f64>),
    Images(Vec<Arc<Array2<f64>>>),
}

impl<'a> VisionProvider<'a> {
    pub fn new(model: &Model, graph: &'a Graph, input: VisualInput<'a>, exec: Exec) -> Result<Self> {
        let nodes = match (model.kind(), input) {
            (ModelKind::Egvn, VisualInput::Repo(r)) => {
                check_repo(r, graph, &model.cfg.vision)?;
                Some(r.matrix())
            }
            (ModelKind::Egvn, _) => return Err(Error::arg("E-GVN training needs a VSF repository")),
            (ModelKind::Gvn, VisualInput::Encoder(_)) => None,
            (ModelKind::Gvn, _) if model.tape_encoder().is_some() => None,
            (ModelKind::Gvn, _) => return Err(Error::arg("GVN training needs an encoder")),
            (ModelKind::Baseline, _) => None,
        };
        Ok(VisionProvider {
            graph,
            input,
            nodes,
            link_vsf: HashMap::new(),
            link_img: HashMap::new(),
            exec,
            counters: Counters::default(),
        })
    }

    fn nodes(&self) -> Option<&Array2<f64>> {
        self.nodes.as_ref()
    }

    fn batch(&mut self, model: &Model, queries: &[(NodeId, NodeId)]) -> Result<BatchVision> {
        if model.kind() != ModelKind::Gvn {
            return Ok(BatchVision::None);
        }
        let keys: Vec<_> = queries.iter().map(|&(u, v)| canonical_pair(u, v)).collect();
        let mut missing: Vec<_> = keys.clone();
        missing.sort_unstable();
        missing.dedup();
        let finetune = model.tape_encoder().is_some();
        if finetune {
            missing.retain(|k| !self.link_img.contains_key(k));
        } else {
            missing.retain(|k| !self.link_vsf.contains_key(k));
        }
        if !missing.is_empty() {
            let spec = &model.cfg.vision;
            let views = link_views(self.graph, &missing, spec)?;
            let imgs = self.exec.try_map(&views, |v| render(v, &spec.style, v.layout_seed()))?;
            self.counters.renders += imgs.len();
            if finetune {
                let te = model.tape_encoder().unwrap();
                let proto = EncoderHandle::init(te.arch().clone(), 0)?;
                let pre = self.exec.map(&imgs, |img| Arc::new(proto.preprocess(img)));
                self.link_img.extend(missing.iter().copied().zip(pre));
            } else {
                let VisualInput::Encoder(enc) = self.input else {
                    return Err(Error::arg("GVN training needs an encoder"));
                };
                let rows = enc.encode_batch(&imgs, self.exec);
                self.counters.encodes += rows.len();
                self.link_vsf.extend(
                    missing
                        .iter()
                        .copied()
                        .zip(rows.into_iter().map(|r| Arc::new(r.0.iter().map(|&x| x as f64).collect()))),
                );
            }
        }
        if finetune {
            // every use runs the encoder on the tape
            self.counters.encodes += keys.len();
            return Ok(BatchVision::Images(keys.iter().map(|k| self.link_img[k].clone()).collect()));
        }
        let s = model.cfg.vsf_dim;
        let mut m = Array2::zeros((keys.len(), s));
        for (i, k) in keys.iter().enumerate() {
            m.row_mut(i).assign(&ndarray::ArrayView1::from(self.link_vsf[k].as_slice()));
        }
        Ok(BatchVision::Links(m))
    }
}

fn as_vision(b: &BatchVision) -> Vision<'_> {
    match b {
        BatchVision::None => Vision::None,
        BatchVision::Links(m) => Vision::Links(m),
        BatchVision::Images(v) => Vision::LinkImages(v),
    }
}

/// Scores `queries` with the model in evaluation mode.
pub fn score_queries(
    model: &Model,
    inputs: &GraphInputs,
    provider: &mut VisionProvider<'_>,
    queries: &[(NodeId, NodeId)],
) -> Result<Vec<f64>> {
    let y = model.embed(inputs, provider.nodes())?;
    let mut out = Vec::with_capacity(queries.len());
    for chunk in queries.chunks(EVAL_CHUNK) {
        let bv = provider.batch(model, chunk)?;
        out.extend(model.score(&y, as_vision(&bv), chunk)?);
    }
    Ok(out)
}

/// HR@K for every standard K the negative pool supports, and MRR.
pub fn ranking_metrics(pos: &[f64], neg: &[f64]) -> Result<RunMetrics> {
    let mut m = RunMetrics::new();
    for k in HR_KS.into_iter().filter(|&k| k <= neg.len()) {
        m.insert(format!("hr@{k}"), hr_at_k(pos, neg, k)?);
    }
    m.insert("mrr".into(), mrr_shared(pos, neg)?);
    Ok(m)
}

pub fn evaluate(
    model: &Model,
    inputs: &GraphInputs,
    provider: &mut VisionProvider<'_>,
    pos: &[(NodeId, NodeId)],
    neg: &[(NodeId, NodeId)],
) -> Result<RunMetrics> {
    let ps = score_queries(model, inputs, provider, pos)?;
    let ns = score_queries(model, inputs, provider, neg)?;
    ranking_metrics(&ps, &ns)
}

/// Random node pairs that are not edges of `g`.
fn train_negatives(g: &Graph, count: usize, rng: &mut crate::rng::Rng) -> Result<Vec<(NodeId, NodeId)>> {
    let n = g.num_nodes();
    if g.num_non_edges() == 0 {
        return Err(Error::Capacity {
            requested: count,
            available: 0,
        });
    }
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let u = rng.random_range(0..n);
        let v = rng.random_range(0..n);
        if u != v && !g.has_edge(u, v) {
            out.push(canonical_pair(u, v));
        }
    }
    Ok(out)
}

/// Trains on `splits.train_pos` over the message graph, keeps the best
/// validation epoch, and reports validation and test metrics for it.
pub fn train(
    mut model: Model,
    g: &Graph,
    splits: &SplitSet,
    input: VisualInput<'_>,
    cfg: &TrainConfig,
    exec: Exec,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    splits.validate(g)?;
    let start = Instant::now();
    let msg = splits.message_graph(g)?;
    let inputs = graph_inputs(&model, &msg, g.features())?;
    let mut provider = VisionProvider::new(&model, &msg, input, exec)?;
    let mut opt = Adam::new(cfg.adam());
    let k_sel = cfg.select_k.min(splits.valid_neg.len()).max(1);
    let select_metric = format!("hr@{k_sel}");
    let valid_score = |model: &Model, provider: &mut VisionProvider<'_>| -> Result<f64> {
        let ps = score_queries(model, &inputs, provider, &splits.valid_pos)?;
        let ns = score_queries(model, &inputs, provider, &splits.valid_neg)?;
        hr_at_k(&ps, &ns, k_sel)
    };

    let mut best = (valid_score(&model, &mut provider)?, 0usize, model.store.clone());
    let mut history = Vec::new();
    let mut since_best = 0;
    let mut stopped_early = false;
    let mut train_pos = splits.train_pos.clone();
    for epoch in 1..=cfg.epochs {
        let mut r = rng_for(cfg.seed, &format!("train/epoch/{epoch}"));
        train_pos.shuffle(&mut r);
        let (mut total, mut count) = (0.0, 0usize);
        for batch in train_pos.chunks(cfg.batch_size) {
            let negs = train_negatives(&msg, batch.len(), &mut r)?;
            let queries: Vec<_> = batch.iter().chain(&negs).copied().collect();
            let labels: Array2<f64> =
                Array2::from_shape_fn((queries.len(), 1), |(i, _)| if i < batch.len() { 1.0 } else { 0.0 });
            let step_inputs = if cfg.mask_message_edges {
                let held: std::collections::HashSet<_> = batch.iter().map(|&(u, v)| canonical_pair(u, v)).collect();
                let kept = msg.edges().iter().copied().filter(|e| !held.contains(e));
                GraphInputs {
                    prop: propagation(&msg.with_edges(kept)?, model.cfg.mpnn.aggregator),
                    x: inputs.x.clone(),
                }
            } else {
                inputs.clone()
            };
            let bv = provider.batch(&model, &queries)?;
            let vision = match model.kind() {
                ModelKind::Egvn => Vision::Nodes(provider.nodes().unwrap()),
                _ => as_vision(&bv),
            };
            let mut tape = Tape::new();
            let p = model.forward(&mut tape, &step_inputs, vision, &queries)?;
            let loss = tape.bce(p, Arc::new(labels));
            let lv = tape.scalar(loss);
            if !lv.is_finite() {
                return Err(Error::Divergence(format!("epoch {epoch}: loss {lv}")));
            }
            let grads = tape.backward(loss);
            if !grads.is_finite() {
                return Err(Error::Divergence(format!("epoch {epoch}: non-finite gradient")));
            }
            opt.step(&mut model.store, &grads);
            total += lv * queries.len() as f64;
            count += queries.len();
        }
        let v = valid_score(&model, &mut provider)?;
        history.push(EpochLog {
            epoch,
            loss: total / count.max(1) as f64,
            valid: v,
        });
        if v > best.0 {
            best = (v, epoch, model.store.clone());
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                stopped_early = true;
                break;
            }
        }
    }
    model.store = best.2;
    let valid = evaluate(&model, &inputs, &mut provider, &splits.valid_pos, &splits.valid_neg)?;
    let test = evaluate(&model, &inputs, &mut provider, &splits.test_pos, &splits.test_neg)?;
    Ok(TrainOutcome {
        model,
        best_epoch: best.1,
        select_metric,
        history,
        valid,
        test,
        counters: provider.counters,
        stopped_early,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::gen_erdos_renyi;
    use crate::graph::{make_splits, SplitRatios};
    use crate::model::{Aggregator, ModelConfig, MpnnConfig};

    fn setup() -> (Graph, SplitSet) {
        let g = gen_erdos_renyi(20, 0.25, 3).unwrap();
        let s = make_splits(&g, SplitRatios::default(), 1).unwrap();
        (g, s)
    }

    fn baseline() -> Model {
        Model::new(
            ModelConfig::baseline(MpnnConfig {
                depth: 2,
                in_dim: 1,
                hidden_dim: 16,
                aggregator: Aggregator::GcnNormalizedSum,
            }),
            0,
            None,
        )
        .unwrap()
    }

    #[test]
    fn one_epoch_smoke_and_determinism() {
        let (g, s) = setup();
        let cfg = TrainConfig {
            epochs: 3,
            batch_size: 16,
            lr_main: 0.01,
            ..TrainConfig::default()
        };
        let a = train(baseline(), &g, &s, VisualInput::None, &cfg, Exec::auto()).unwrap();
        assert!(a.history.iter().all(|h| h.loss.is_finite()));
        let b = train(baseline(), &g, &s, VisualInput::None, &cfg, Exec::Sequential).unwrap();
        assert_eq!(a.test, b.test);
        assert_eq!(a.model.store.digest(), b.model.store.digest());
        let mrr = a.test["mrr"];
        assert!(mrr > 0.0 && mrr <= 1.0);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig { lr_main: 0.0, ..TrainConfig::default() }.validate().is_err());
        assert!(TrainConfig { weight_decay: 1e-3, ..TrainConfig::default() }.validate().is_err());
        assert!(TrainConfig::default().validate().is_ok());
    }

    #[test]
    fn ranking_metrics_respect_pool_size() {
        let m = ranking_metrics(&[0.9, 0.1], &[0.5; 12]).unwrap();
        assert!(m.contains_key("hr@10") && !m.contains_key("hr@20"));
        assert_eq!(m["hr@1"], 0.5);
    }
}
