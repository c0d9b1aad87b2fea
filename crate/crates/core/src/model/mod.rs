//! Message passing, readout, and the GVN / E-GVN fusion models.

mod checkpoint;
mod cost;
mod integrate;
mod mpnn;
mod pipeline;

use std::sync::Arc;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::NodeId;
use crate::nn::{Init, ParamStore, SpOp, Tape, Var};
use crate::render::RenderStyle;
use crate::rng::{derive_seed, rng};
use crate::vsf::{Adapter, EncoderArch, EncoderHandle, TapeEncoder};

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use cost::{estimate_costs, CostMode, CostReport};
pub use integrate::{
    EgvnIntegration, GatedInjection, GvnIntegration, Readout, Strategy, EGVN_DELTA_RAW_INIT,
    GVN_DELTA_RAW_INIT,
};
pub use mpnn::{check_features, node_features, propagation, Aggregator, Mpnn, MpnnConfig};
pub use pipeline::{check_repo, egvn_forward, graph_inputs, gvn_forward, link_views, link_vsfs, Counters};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    /// MPNN and readout only.
    Baseline,
    /// Link-centered images fused after message passing.
    Gvn,
    /// Node-centered VSFs fused into node attributes before message passing.
    Egvn,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Baseline => "baseline-gcn",
            ModelKind::Gvn => "gvn",
            ModelKind::Egvn => "egvn",
        }
    }
}

/// Rendering parameters the model's VSFs were (or will be) produced with.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VisionSpec {
    pub k: usize,
    pub style: RenderStyle,
    pub mask_center_link: bool,
}

impl Default for VisionSpec {
    fn default() -> Self {
        VisionSpec {
            k: 2,
            style: RenderStyle::default(),
            mask_center_link: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub mpnn: MpnnConfig,
    pub strategy: Strategy,
    /// VSF width S.
    pub vsf_dim: usize,
    /// E-GVN adapter output width; `None` feeds raw VSFs.
    pub adapter_out: Option<usize>,
    pub readout_hidden: usize,
    pub vdecoder_hidden: usize,
    /// Overrides the identity-at-init δ for weighted fusion.
    pub delta_raw_init: Option<f64>,
    /// GVN only: train the encoder with the rest of the model.
    pub encoder: Option<EncoderArch>,
    pub vision: VisionSpec,
}

impl ModelConfig {
    pub fn baseline(mpnn: MpnnConfig) -> Self {
        ModelConfig {
            kind: ModelKind::Baseline,
            mpnn,
            strategy: Strategy::Attention,
            vsf_dim: 0,
            adapter_out: None,
            readout_hidden: 64,
            vdecoder_hidden: 64,
            delta_raw_init: None,
            encoder: None,
            vision: VisionSpec::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.mpnn.validate()?;
        if self.kind != ModelKind::Baseline && self.vsf_dim == 0 {
            return Err(Error::Config("vision models need vsf_dim > 0".into()));
        }
        if !(1..=3).contains(&self.vision.k) {
            return Err(Error::Config(format!("k = {} outside 1..=3", self.vision.k)));
        }
        if self.adapter_out == Some(0) || self.readout_hidden == 0 || self.vdecoder_hidden == 0 {
            return Err(Error::Config("layer widths must be positive".into()));
        }
        if self.adapter_out.is_some() && self.kind != ModelKind::Egvn {
            return Err(Error::Config("the adapter belongs to E-GVN".into()));
        }
        if let Some(arch) = &self.encoder {
            if self.kind != ModelKind::Gvn {
                return Err(Error::Config("encoder finetuning applies to GVN".into()));
            }
            if arch.output_dim() != self.vsf_dim {
                return Err(Error::Config(format!(
                    "encoder emits {} features, vsf_dim is {}",
                    arch.output_dim(),
                    self.vsf_dim
                )));
            }
        }
        Ok(())
    }
}

/// Graph-side forward inputs.
#[derive(Debug, Clone)]
pub struct GraphInputs {
    pub prop: Arc<SpOp>,
    pub x: Arc<Array2<f64>>,
}

/// Visual inputs matching the model kind.
#[derive(Debug, Clone, Copy)]
pub enum Vision<'a> {
    None,
    /// One VSF row per query (GVN).
    Links(&'a Array2<f64>),
    /// One preprocessed image per query, encoded on the tape (GVN full).
    LinkImages(&'a [Arc<Array2<f64>>]),
    /// One VSF row per node (E-GVN).
    Nodes(&'a Array2<f64>),
}

#[derive(Debug, Clone)]
enum Fusion {
    None,
    Gvn(GvnIntegration),
    Egvn { integ: EgvnIntegration, adapter: Option<Adapter> },
}

/// A complete link predictor and its parameters.
#[derive(Debug, Clone)]
pub struct Model {
    pub cfg: ModelConfig,
    pub store: ParamStore,
    mpnn: Mpnn,
    readout: Readout,
    fusion: Fusion,
    encoder: Option<TapeEncoder>,
}

impl Model {
    /// Fresh parameters from `seed`. A finetuned encoder starts from
    /// `encoder` when given, otherwise from seeded weights.
    pub fn new(cfg: ModelConfig, seed: u64, encoder: Option<&EncoderHandle>) -> Result<Self> {
        cfg.validate()?;
        let mut store = ParamStore::new();
        let mut r = rng(derive_seed(seed, "model/init"));
        let f_out = cfg.mpnn.hidden_dim;
        let vis_width = cfg.adapter_out.unwrap_or(cfg.vsf_dim);
        let mpnn_vis = match (cfg.kind, cfg.strategy) {
            (ModelKind::Egvn, Strategy::Concat) => vis_width,
            _ => 0,
        };
        let mpnn = Mpnn::new(&mut store, "mpnn", &cfg.mpnn, mpnn_vis, Init::Glorot, &mut r)?;
        let readout_vis = match (cfg.kind, cfg.strategy) {
            (ModelKind::Gvn, Strategy::Concat) => cfg.vsf_dim,
            _ => 0,
        };
        let readout = Readout::new(
            &mut store,
            "readout",
            &[f_out, cfg.readout_hidden, 1],
            readout_vis,
            Init::Glorot,
            &mut r,
        )?;
        let fusion = match cfg.kind {
            ModelKind::Baseline => Fusion::None,
            ModelKind::Gvn => Fusion::Gvn(GvnIntegration::new(
                &mut store,
                cfg.strategy,
                cfg.vsf_dim,
                f_out,
                cfg.vdecoder_hidden,
                cfg.delta_raw_init,
                &mut r,
            )?),
            ModelKind::Egvn => {
                let adapter = match cfg.adapter_out {
                    Some(out) => Some(Adapter::new(&mut store, "adapter", cfg.vsf_dim, out, Init::Glorot, &mut r)?),
                    None => None,
                };
                Fusion::Egvn {
                    integ: EgvnIntegration::new(
                        &mut store,
                        cfg.strategy,
                        vis_width,
                        cfg.mpnn.in_dim,
                        cfg.delta_raw_init,
                        &mut r,
                    )?,
                    adapter,
                }
            }
        };
        let encoder = match &cfg.encoder {
            Some(arch) => {
                let mut h = match encoder {
                    Some(h) if h.arch() == arch => h.clone(),
                    Some(_) => return Err(Error::Config("encoder weights do not match the configured architecture".into())),
                    None => EncoderHandle::init(arch.clone(), derive_seed(seed, "model/encoder"))?,
                };
                h.set_trainable(true);
                Some(h.register(&mut store, "encoder")?)
            }
            None => None,
        };
        Ok(Model {
            cfg,
            store,
            mpnn,
            readout,
            fusion,
            encoder,
        })
    }

    pub fn kind(&self) -> ModelKind {
        self.cfg.kind
    }

    pub fn tape_encoder(&self) -> Option<&TapeEncoder> {
        self.encoder.as_ref()
    }

    /// Width of one endpoint's readout input.
    pub fn readout_input_width(&self) -> usize {
        self.readout.input_width(&self.store)
    }

    pub fn mpnn_input_width(&self) -> usize {
        self.mpnn.input_width(&self.store)
    }

    fn check_queries(&self, n: usize, queries: &[(NodeId, NodeId)]) -> Result<()> {
        if let Some(&(u, v)) = queries.iter().find(|&&(u, v)| u >= n || v >= n) {
            return Err(Error::arg(format!("query ({u},{v}) outside {n} nodes")));
        }
        Ok(())
    }

    /// Node representations `Y = MPNN(X)` with no visual input.
    pub fn node_repr(&self, tape: &mut Tape, inputs: &GraphInputs) -> Var {
        let x = tape.constant((*inputs.x).clone());
        self.mpnn.forward(tape, &self.store, &inputs.prop, x)
    }

    /// The plain MPNN + readout path over this model's parameters.
    pub fn base_forward(&self, tape: &mut Tape, inputs: &GraphInputs, queries: &[(NodeId, NodeId)]) -> Result<Var> {
        self.check_queries(inputs.x.nrows(), queries)?;
        let y = self.node_repr(tape, inputs);
        let (yu, yv) = gather_pairs(tape, y, queries);
        Ok(self.readout.forward(tape, &self.store, yu, yv, None))
    }

    /// Link probabilities `q × 1`.
    pub fn forward(
        &self,
        tape: &mut Tape,
        inputs: &GraphInputs,
        vision: Vision<'_>,
        queries: &[(NodeId, NodeId)],
    ) -> Result<Var> {
        let n = inputs.x.nrows();
        self.check_queries(n, queries)?;
        let store = &self.store;
        match (&self.fusion, vision) {
            (Fusion::None, _) => self.base_forward(tape, inputs, queries),
            (Fusion::Gvn(integ), Vision::Links(v)) => {
                check_rows(v, queries.len(), self.cfg.vsf_dim, "link VSFs")?;
                let y = self.node_repr(tape, inputs);
                let (yu, yv) = gather_pairs(tape, y, queries);
                let vsf = tape.constant(v.clone());
                Ok(integ.forward(tape, store, &self.readout, yu, yv, vsf))
            }
            (Fusion::Gvn(integ), Vision::LinkImages(imgs)) => {
                let enc = self
                    .encoder
                    .as_ref()
                    .ok_or_else(|| Error::arg("raw images need a finetuned encoder"))?;
                if imgs.len() != queries.len() {
                    return Err(Error::arg(format!("{} images for {} queries", imgs.len(), queries.len())));
                }
                let y = self.node_repr(tape, inputs);
                let (yu, yv) = gather_pairs(tape, y, queries);
                let rows: Vec<Var> = imgs.iter().map(|img| enc.forward(tape, store, img.clone())).collect();
                let vsf = tape.concat_rows(&rows);
                Ok(integ.forward(tape, store, &self.readout, yu, yv, vsf))
            }
            (Fusion::Egvn { integ, adapter }, Vision::Nodes(v)) => {
                check_rows(v, n, self.cfg.vsf_dim, "node VSFs")?;
                let raw = tape.constant(v.clone());
                let vt = match adapter {
                    Some(a) => a.forward(tape, store, raw),
                    None => raw,
                };
                let x = tape.constant((*inputs.x).clone());
                let xt = integ.forward(tape, store, x, vt);
                let y = self.mpnn.forward(tape, store, &inputs.prop, xt);
                let (yu, yv) = gather_pairs(tape, y, queries);
                Ok(self.readout.forward(tape, store, yu, yv, None))
            }
            (_, other) => Err(Error::arg(format!(
                "{} model cannot use {} visual input",
                self.cfg.kind.name(),
                match other {
                    Vision::None => "no",
                    Vision::Links(_) => "per-link",
                    Vision::LinkImages(_) => "per-link image",
                    Vision::Nodes(_) => "per-node",
                }
            ))),
        }
    }

    /// Probabilities as plain numbers.
    pub fn predict(&self, inputs: &GraphInputs, vision: Vision<'_>, queries: &[(NodeId, NodeId)]) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let p = self.forward(&mut tape, inputs, vision, queries)?;
        Ok(tape.value(p).iter().copied().collect())
    }

    /// Final node representations, with node VSFs fused in for E-GVN.
    pub fn embed(&self, inputs: &GraphInputs, nodes: Option<&Array2<f64>>) -> Result<Array2<f64>> {
        let mut tape = Tape::new();
        let y = match (&self.fusion, nodes) {
            (Fusion::Egvn { .. }, Some(v)) => {
                check_rows(v, inputs.x.nrows(), self.cfg.vsf_dim, "node VSFs")?;
                let x = tape.constant((*inputs.x).clone());
                let vv = tape.constant(v.clone());
                let xt = self.egvn_attributes(&mut tape, x, vv)?;
                self.mpnn.forward(&mut tape, &self.store, &inputs.prop, xt)
            }
            (Fusion::Egvn { .. }, None) => return Err(Error::arg("E-GVN needs node VSFs")),
            _ => self.node_repr(&mut tape, inputs),
        };
        Ok(tape.value(y).clone())
    }

    /// Scores queries from precomputed representations `y`; GVN models also
    /// take per-query visual input.
    pub fn score(&self, y: &Array2<f64>, vision: Vision<'_>, queries: &[(NodeId, NodeId)]) -> Result<Vec<f64>> {
        self.check_queries(y.nrows(), queries)?;
        let mut tape = Tape::new();
        let yc = tape.constant(y.clone());
        let (yu, yv) = gather_pairs(&mut tape, yc, queries);
        let store = &self.store;
        let p = match (&self.fusion, vision) {
            (Fusion::Gvn(integ), Vision::Links(v)) => {
                check_rows(v, queries.len(), self.cfg.vsf_dim, "link VSFs")?;
                let vsf = tape.constant(v.clone());
                integ.forward(&mut tape, store, &self.readout, yu, yv, vsf)
            }
            (Fusion::Gvn(integ), Vision::LinkImages(imgs)) => {
                let enc = self
                    .encoder
                    .as_ref()
                    .ok_or_else(|| Error::arg("raw images need a finetuned encoder"))?;
                let rows: Vec<Var> = imgs.iter().map(|img| enc.forward(&mut tape, store, img.clone())).collect();
                let vsf = tape.concat_rows(&rows);
                integ.forward(&mut tape, store, &self.readout, yu, yv, vsf)
            }
            (Fusion::Gvn(_), _) => return Err(Error::arg("GVN scoring needs per-link visual input")),
            _ => self.readout.forward(&mut tape, store, yu, yv, None),
        };
        Ok(tape.value(p).iter().copied().collect())
    }

    /// E-GVN attribute fusion alone: `x̃` for every node.
    pub fn egvn_attributes(&self, tape: &mut Tape, x: Var, vsf: Var) -> Result<Var> {
        match &self.fusion {
            Fusion::Egvn { integ, adapter } => {
                let vt = match adapter {
                    Some(a) => a.forward(tape, &self.store, vsf),
                    None => vsf,
                };
                Ok(integ.forward(tape, &self.store, x, vt))
            }
            _ => Err(Error::arg("not an E-GVN model")),
        }
    }
}

fn check_rows(v: &Array2<f64>, rows: usize, cols: usize, what: &str) -> Result<()> {
    if v.dim() != (rows, cols) {
        return Err(Error::arg(format!("{what} are {:?}, expected ({rows}, {cols})", v.dim())));
    }
    Ok(())
}

fn gather_pairs(tape: &mut Tape, y: Var, queries: &[(NodeId, NodeId)]) -> (Var, Var) {
    let us = Arc::new(queries.iter().map(|q| q.0).collect());
    let vs = Arc::new(queries.iter().map(|q| q.1).collect());
    (tape.gather_rows(y, us), tape.gather_rows(y, vs))
}
