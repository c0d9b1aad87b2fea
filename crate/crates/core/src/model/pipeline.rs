use std::sync::Arc;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{node_features, propagation, GraphInputs, Model, ModelKind, Vision, VisionSpec};
use crate::error::{Error, Result};
use crate::graph::{canonical_pair, k_hop_link_subgraph, Graph, NodeId, SubgraphView};
use crate::par::Exec;
use crate::render::render;
use crate::vsf::{EncoderHandle, RepoMeta, VsfRepository};

/// Render and encoder invocations made while scoring.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    pub renders: usize,
    pub encodes: usize,
}

impl std::ops::AddAssign for Counters {
    fn add_assign(&mut self, o: Counters) {
        self.renders += o.renders;
        self.encodes += o.encodes;
    }
}

/// Link-centered views with endpoints in canonical order, so `(u,v)` and
/// `(v,u)` share one image.
pub fn link_views(g: &Graph, queries: &[(NodeId, NodeId)], spec: &VisionSpec) -> Result<Vec<SubgraphView>> {
    queries
        .iter()
        .map(|&(u, v)| {
            let (a, b) = canonical_pair(u, v);
            k_hop_link_subgraph(g, a, b, spec.k, spec.mask_center_link)
        })
        .collect()
}

/// Renders and encodes one image per query. Every query costs one render
/// and one encode; no cache is consulted.
pub fn link_vsfs(
    g: &Graph,
    queries: &[(NodeId, NodeId)],
    spec: &VisionSpec,
    enc: &EncoderHandle,
    exec: Exec,
    counters: &mut Counters,
) -> Result<Array2<f64>> {
    let views = link_views(g, queries, spec)?;
    let rows = exec.try_map(&views, |v| {
        let img = render(v, &spec.style, v.layout_seed())?;
        Ok(enc.encode_image(&img))
    })?;
    counters.renders += rows.len();
    counters.encodes += rows.len();
    let s = enc.output_dim();
    Ok(Array2::from_shape_fn((rows.len(), s), |(i, j)| rows[i].0[j] as f64))
}

/// Graph inputs for `g` under the model's aggregator.
pub fn graph_inputs(model: &Model, g: &Graph, x: Option<&Array2<f64>>) -> Result<GraphInputs> {
    let x = x.cloned().unwrap_or_else(|| node_features(g));
    super::check_features(g, &x, model.cfg.mpnn.in_dim)?;
    Ok(GraphInputs {
        prop: propagation(g, model.cfg.mpnn.aggregator),
        x: Arc::new(x),
    })
}

/// Full-graph MPNN, then one render + encode per query and post-MPNN fusion.
/// A finetuned model encodes with its current weights.
pub fn gvn_forward(
    model: &Model,
    g: &Graph,
    x: Option<&Array2<f64>>,
    queries: &[(NodeId, NodeId)],
    enc: &EncoderHandle,
    exec: Exec,
) -> Result<(Vec<f64>, Counters)> {
    if model.kind() != ModelKind::Gvn {
        return Err(Error::arg("gvn_forward needs a GVN model"));
    }
    let inputs = graph_inputs(model, g, x)?;
    let snapshot;
    let enc = match model.tape_encoder() {
        Some(te) => {
            snapshot = te.snapshot(&model.store);
            &snapshot
        }
        None => enc,
    };
    let mut counters = Counters::default();
    let vsf = link_vsfs(g, queries, &model.cfg.vision, enc, exec, &mut counters)?;
    let p = model.predict(&inputs, Vision::Links(&vsf), queries)?;
    Ok((p, counters))
}

/// Pre-MPNN fusion from a stored repository; renders and encodes nothing.
pub fn egvn_forward(
    model: &Model,
    g: &Graph,
    x: Option<&Array2<f64>>,
    queries: &[(NodeId, NodeId)],
    repo: &VsfRepository,
) -> Result<(Vec<f64>, Counters)> {
    if model.kind() != ModelKind::Egvn {
        return Err(Error::arg("egvn_forward needs an E-GVN model"));
    }
    check_repo(repo, g, &model.cfg.vision)?;
    let inputs = graph_inputs(model, g, x)?;
    let v = repo.matrix();
    let p = model.predict(&inputs, Vision::Nodes(&v), queries)?;
    Ok((p, Counters::default()))
}

/// Repository must come from this graph, style and scope.
pub fn check_repo(repo: &VsfRepository, g: &Graph, spec: &VisionSpec) -> Result<()> {
    let expected = RepoMeta {
        graph_digest: g.digest(),
        style_digest: spec.style.digest(),
        k: spec.k,
        encoder_id: repo.meta().encoder_id.clone(),
    };
    repo.meta().check(&expected)
}
