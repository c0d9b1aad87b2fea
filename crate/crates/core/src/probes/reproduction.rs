use std::sync::Arc;

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use super::{ProbeReport, ProbeScore};
use crate::error::{Error, Result};
use crate::features::{drnl_labels, node_pe, pair_sf, spd_target, PeKind, SfKind};
use crate::graph::{k_hop_link_subgraph, Graph, NodeId};
use crate::nn::{Adam, AdamConfig, Init, LrGroup, Mlp, ParamStore, Tape, Var};
use crate::rng::{derive_seed, rng};
use crate::vsf::EncoderHandle;

/// Success criterion stamped on every reproduction score.
pub const RR_CRITERION: &str = "rr-v1";
const REL_TOL: f64 = 0.10;
const ZERO_TARGET_TOL: f64 = 0.05;
const CHECK_EVERY: usize = 50;

/// Whether one prediction reproduces its target.
pub fn sf_success(integer: bool, pred: f64, target: f64) -> bool {
    if integer {
        pred.round() == target
    } else if target == 0.0 {
        pred.abs() < ZERO_TARGET_TOL
    } else {
        ((pred - target) / target).abs() <= REL_TOL
    }
}

/// Fraction of reproduced targets; `None` when the targets are constant.
pub fn success_ratio(integer: bool, preds: &[f64], targets: &[f64]) -> Option<f64> {
    let first = *targets.first()?;
    if targets.iter().all(|&t| t == first) {
        return None;
    }
    let hits = preds
        .iter()
        .zip(targets)
        .filter(|&(&p, &t)| sf_success(integer, p, t))
        .count();
    Some(hits as f64 / targets.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SfTarget {
    pub kind: SfKind,
    pub values: Vec<f64>,
}

/// Scalar SF targets for each pair. SPD is clamped, DRNL is the label sum
/// over the enclosing `k`-hop subgraph, DE averages endpoint distances to the
/// `de_anchors` highest-degree nodes.
pub fn pair_targets(
    g: &Graph,
    pairs: &[(NodeId, NodeId)],
    kinds: &[SfKind],
    k: usize,
    de_anchors: usize,
) -> Result<Vec<SfTarget>> {
    let de = if kinds.contains(&SfKind::DE) {
        Some(node_pe(g, PeKind::DistanceVector, de_anchors, None)?)
    } else {
        None
    };
    kinds
        .iter()
        .map(|&kind| {
            let values = pairs
                .iter()
                .map(|&(u, v)| match kind {
                    SfKind::CN | SfKind::AA | SfKind::RA => pair_sf(g, kind, u, v),
                    SfKind::SPD => spd_target(g, u, v, k),
                    SfKind::DRNL => {
                        let view = k_hop_link_subgraph(g, u, v, k, true)?;
                        Ok(drnl_labels(&view)?.iter().map(|&l| l as f64).sum())
                    }
                    SfKind::DE => {
                        let d = de.as_ref().expect("computed above");
                        Ok((d.row(u).sum() + d.row(v).sum()) / (2 * d.ncols()) as f64)
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(SfTarget { kind, values })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RrConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub lr: f64,
    /// Encoder learning rate when finetuning.
    pub lr_vision: f64,
    pub seed: u64,
}

impl Default for RrConfig {
    fn default() -> Self {
        RrConfig {
            hidden: 64,
            epochs: 2000,
            lr: 1e-2,
            lr_vision: 1e-4,
            seed: 0,
        }
    }
}

/// Probe inputs: fixed feature rows, or preprocessed images pushed through
/// an encoder that trains with the MLP.
#[derive(Clone, Copy)]
pub enum ProbeInput<'a> {
    Frozen(&'a Array2<f64>),
    Finetune {
        encoder: &'a EncoderHandle,
        images: &'a [Arc<Array2<f64>>],
    },
}

impl ProbeInput<'_> {
    fn len(&self) -> usize {
        match self {
            ProbeInput::Frozen(x) => x.nrows(),
            ProbeInput::Finetune { images, .. } => images.len(),
        }
    }
}

/// Column z-scores; constant columns become zero.
fn standardize(x: &Array2<f64>) -> Array2<f64> {
    let mean = x.mean_axis(Axis(0)).expect("non-empty");
    let std = x.std_axis(Axis(0), 0.0);
    let mut out = x - &mean;
    for (mut col, &s) in out.columns_mut().into_iter().zip(&std) {
        col /= if s > 1e-12 { s } else { 1.0 };
    }
    out
}

/// Fits a 3-layer MLP per target and reports the share of probe items
/// whose SF it reproduces.
pub fn reproduction_ratio(input: ProbeInput<'_>, targets: &[SfTarget], cfg: &RrConfig) -> Result<ProbeReport> {
    let n = input.len();
    if n == 0 {
        return Err(Error::arg("empty probe set"));
    }
    if let Some(t) = targets.iter().find(|t| t.values.len() != n) {
        return Err(Error::arg(format!(
            "{} has {} targets for {n} probe items",
            t.kind.name(),
            t.values.len()
        )));
    }
    let finetuned = matches!(input, ProbeInput::Finetune { .. });
    let mut report = ProbeReport::new(
        "reproduction-ratio",
        &serde_json::json!({ "mlp": cfg, "finetuned": finetuned, "items": n }),
    );
    let frozen = match input {
        ProbeInput::Frozen(x) => Some(Arc::new(standardize(x))),
        ProbeInput::Finetune { .. } => None,
    };
    for target in targets {
        let name = target.kind.name().to_string();
        let t = &target.values;
        let mean = t.iter().sum::<f64>() / n as f64;
        let std = (t.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
        if std == 0.0 {
            report
                .scores
                .insert(name, ProbeScore::undefined(RR_CRITERION, "constant target over the probe set"));
            continue;
        }
        let preds = fit_one(input, frozen.as_ref(), t, mean, std, target.kind, cfg)?;
        let ratio = success_ratio(target.kind.is_integer(), &preds, t).expect("non-constant");
        report.scores.insert(name, ProbeScore::defined(ratio, RR_CRITERION));
    }
    Ok(report)
}

fn fit_one(
    input: ProbeInput<'_>,
    frozen: Option<&Arc<Array2<f64>>>,
    t: &[f64],
    mean: f64,
    std: f64,
    kind: SfKind,
    cfg: &RrConfig,
) -> Result<Vec<f64>> {
    let mut store = ParamStore::new();
    let mut r = rng(derive_seed(cfg.seed, &format!("probe/rr/{}", kind.name())));
    let (in_dim, tape_enc) = match input {
        ProbeInput::Frozen(x) => (x.ncols(), None),
        ProbeInput::Finetune { encoder, .. } => {
            let mut e = encoder.clone();
            e.set_trainable(true);
            (e.output_dim(), Some(e.register(&mut store, "encoder")?))
        }
    };
    let mlp = Mlp::new(
        &mut store,
        "mlp",
        &[in_dim, cfg.hidden, cfg.hidden, 1],
        Init::Glorot,
        LrGroup::Main,
        &mut r,
    )?;
    let z = Arc::new(Array2::from_shape_fn((t.len(), 1), |(i, _)| (t[i] - mean) / std));
    let mut opt = Adam::new(AdamConfig {
        lr_main: cfg.lr,
        lr_vision: cfg.lr_vision,
        ..AdamConfig::default()
    });
    let forward = |tape: &mut Tape, store: &ParamStore| -> Var {
        let x = match (frozen, input, &tape_enc) {
            (Some(x), _, _) => tape.constant(x.as_ref().clone()),
            (None, ProbeInput::Finetune { images, .. }, Some(te)) => {
                let rows: Vec<Var> = images.iter().map(|img| te.forward(tape, store, img.clone())).collect();
                tape.concat_rows(&rows)
            }
            _ => unreachable!("input and encoder agree"),
        };
        mlp.forward(tape, store, x)
    };
    let decode = |out: &Array2<f64>| out.column(0).iter().map(|&o| o * std + mean).collect::<Vec<_>>();
    for epoch in 1..=cfg.epochs {
        let mut tape = Tape::new();
        let out = forward(&mut tape, &store);
        let loss = tape.mse(out, z.clone());
        if !tape.scalar(loss).is_finite() {
            return Err(Error::Divergence(format!("{} probe diverged at epoch {epoch}", kind.name())));
        }
        if epoch % CHECK_EVERY == 1 {
            let preds = decode(tape.value(out));
            if success_ratio(kind.is_integer(), &preds, t) == Some(1.0) {
                return Ok(preds);
            }
        }
        let grads = tape.backward(loss);
        opt.step(&mut store, &grads);
    }
    let mut tape = Tape::new();
    let out = forward(&mut tape, &store);
    Ok(decode(tape.value(out)))
}
