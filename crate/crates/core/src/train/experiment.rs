use std::path::Path;
use std::time::Instant;

use super::report::EvalReport;
use super::trainer::{train, TrainConfig, TrainOutcome, VisualInput};
use crate::error::{Error, Result};
use crate::graph::{Graph, SplitSet};
use crate::model::{Model, ModelConfig, ModelKind};
use crate::par::Exec;
use crate::render::RenderCache;
use crate::vsf::{BuildStats, EncoderHandle, VsfRepository};

/// Everything a training run needs besides its configuration.
#[derive(Clone, Copy)]
pub struct ExperimentContext<'a> {
    pub dataset: &'a str,
    pub graph: &'a Graph,
    pub splits: &'a SplitSet,
    /// Frozen encoder for VSFs; also the starting point for finetuning.
    pub encoder: Option<&'a EncoderHandle>,
    pub cache: &'a RenderCache,
    /// E-GVN repository file, reused when it matches. Built in memory when absent.
    pub repo_path: Option<&'a Path>,
    pub exec: Exec,
}

#[derive(Debug, Clone)]
pub struct ExperimentRun {
    pub report: EvalReport,
    pub outcomes: Vec<TrainOutcome>,
    pub repo_stats: Option<BuildStats>,
}

/// E-GVN repository over the message graph of `ctx.splits`.
pub fn message_repository(ctx: &ExperimentContext<'_>, cfg: &ModelConfig) -> Result<(VsfRepository, BuildStats)> {
    let enc = ctx
        .encoder
        .ok_or_else(|| Error::arg("E-GVN needs an encoder for its repository"))?;
    if enc.output_dim() != cfg.vsf_dim {
        return Err(Error::Config(format!(
            "encoder emits {} features, model expects vsf_dim = {}",
            enc.output_dim(),
            cfg.vsf_dim
        )));
    }
    let msg = ctx.splits.message_graph(ctx.graph)?;
    let (k, style) = (cfg.vision.k, &cfg.vision.style);
    match ctx.repo_path {
        Some(p) => VsfRepository::build_or_load(p, &msg, k, style, enc, ctx.cache, ctx.exec),
        None => VsfRepository::build(&msg, k, style, enc, ctx.cache, ctx.exec),
    }
}

/// Trains one model per seed and summarizes test metrics across seeds.
pub fn run_experiment(
    ctx: &ExperimentContext<'_>,
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    seeds: &[u64],
) -> Result<ExperimentRun> {
    if seeds.is_empty() {
        return Err(Error::Config("at least one seed is required".into()));
    }
    model_cfg.validate()?;
    train_cfg.validate()?;
    let start = Instant::now();
    let repo = match model_cfg.kind {
        ModelKind::Egvn => Some(message_repository(ctx, model_cfg)?),
        _ => None,
    };
    let input = match (&repo, model_cfg.kind, ctx.encoder) {
        (Some((r, _)), _, _) => VisualInput::Repo(r),
        (None, ModelKind::Gvn, Some(e)) => VisualInput::Encoder(e),
        _ => VisualInput::None,
    };
    let mut outcomes = Vec::with_capacity(seeds.len());
    let (mut encodes, mut renders) = (0u64, 0u64);
    if let Some((_, stats)) = &repo {
        encodes += stats.encoded as u64;
        renders += stats.rendered as u64;
    }
    for &seed in seeds {
        let model = Model::new(model_cfg.clone(), seed, ctx.encoder)?;
        let cfg = TrainConfig { seed, ..train_cfg.clone() };
        let out = train(model, ctx.graph, ctx.splits, input, &cfg, ctx.exec)?;
        encodes += out.counters.encodes as u64;
        renders += out.counters.renders as u64;
        outcomes.push(out);
    }
    let runs: Vec<_> = outcomes.iter().map(|o| o.test.clone()).collect();
    let report = EvalReport::aggregate(
        ctx.dataset,
        &model_label(model_cfg),
        seeds.to_vec(),
        &runs,
        encodes,
        renders,
        start.elapsed().as_secs_f64(),
    );
    Ok(ExperimentRun {
        report,
        outcomes,
        repo_stats: repo.map(|(_, s)| s),
    })
}

/// e.g. `egvn-attention`, or `baseline-gcn`.
pub fn model_label(cfg: &ModelConfig) -> String {
    match cfg.kind {
        ModelKind::Baseline => cfg.kind.name().to_string(),
        k => format!("{}-{}", k.name(), cfg.strategy.name()),
    }
}
