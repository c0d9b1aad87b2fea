//! TOML run configuration. Every section has defaults; unknown keys are
//! rejected.

use std::path::{Path, PathBuf};

use gvn_core::graph::{load_edge_list, load_features, load_planetoid, make_splits, Graph, SplitRatios, SplitSet};
use gvn_core::model::{Aggregator, ModelConfig, ModelKind, MpnnConfig, Strategy, VisionSpec};
use gvn_core::render::{Labeling, NodeShape, RenderStyle, Visualizer};
use gvn_core::train::TrainConfig;
use gvn_core::vsf::{EncoderArch, EncoderHandle, DEFAULT_VSF_DIM};
use gvn_core::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seeds: Vec<u64>,
    pub out: PathBuf,
    pub cache: Option<PathBuf>,
    /// E-GVN repository file; defaults to `<out>/repository.vsfr`.
    pub repository: Option<PathBuf>,
    pub dataset: DatasetConfig,
    pub model: ModelSection,
    pub encoder: EncoderSection,
    pub train: TrainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seeds: vec![0],
            out: PathBuf::from("runs"),
            cache: None,
            repository: None,
            dataset: DatasetConfig::default(),
            model: ModelSection::default(),
            encoder: EncoderSection::default(),
            train: TrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    pub name: String,
    /// Whitespace-separated edge list.
    pub edges: Option<PathBuf>,
    /// Dense feature rows for an edge-list dataset.
    pub features: Option<PathBuf>,
    /// Directory holding `<name>.content` and `<name>.cites`.
    pub planetoid_dir: Option<PathBuf>,
    /// Saved split directory; generated from the ratios when absent.
    pub splits: Option<PathBuf>,
    pub valid_ratio: f64,
    pub test_ratio: f64,
    pub split_seed: u64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            name: "dataset".into(),
            edges: None,
            features: None,
            planetoid_dir: None,
            splits: None,
            valid_ratio: 0.1,
            test_ratio: 0.2,
            split_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    /// `baseline-gcn`, `gvn` or `egvn`.
    pub kind: String,
    pub integration: Strategy,
    pub aggregator: Aggregator,
    pub depth: usize,
    pub hidden: usize,
    pub readout_hidden: usize,
    pub vdecoder_hidden: usize,
    pub adapter_out: Option<usize>,
    pub delta_raw_init: Option<f64>,
    /// GVN: train the encoder with the model.
    pub finetune_encoder: bool,
    pub k: usize,
    pub mask_center_link: bool,
    pub style: StyleSection,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            kind: "baseline-gcn".into(),
            integration: Strategy::Attention,
            aggregator: Aggregator::GcnNormalizedSum,
            depth: 2,
            hidden: 64,
            readout_hidden: 64,
            vdecoder_hidden: 64,
            adapter_out: None,
            delta_raw_init: None,
            finetune_encoder: false,
            k: 2,
            mask_center_link: true,
            style: StyleSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StyleSection {
    pub profile: Visualizer,
    /// Square canvas side in pixels.
    pub canvas: u32,
    pub labeling: Labeling,
    pub shape: Option<NodeShape>,
    pub randomize_per_sample: bool,
}

impl Default for StyleSection {
    fn default() -> Self {
        StyleSection {
            profile: Visualizer::Graphviz,
            canvas: 224,
            labeling: Labeling::NoLabel,
            shape: None,
            randomize_per_sample: false,
        }
    }
}

impl StyleSection {
    pub fn to_style(&self) -> RenderStyle {
        let mut s = RenderStyle::profile(self.profile).with_canvas(self.canvas, self.canvas);
        s.labeling = self.labeling;
        if let Some(shape) = self.shape {
            s.node_shape = shape;
        }
        s.randomize_per_sample = self.randomize_per_sample;
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EncoderSection {
    /// Weights file; seeded weights of the default architecture otherwise.
    pub weights: Option<PathBuf>,
    pub dim: usize,
    pub seed: u64,
}

impl Default for EncoderSection {
    fn default() -> Self {
        EncoderSection {
            weights: None,
            dim: DEFAULT_VSF_DIM,
            seed: 0,
        }
    }
}

pub fn parse_kind(s: &str) -> Result<ModelKind> {
    [ModelKind::Baseline, ModelKind::Gvn, ModelKind::Egvn]
        .into_iter()
        .find(|k| k.name() == s)
        .ok_or_else(|| Error::Config(format!("unknown model '{s}' (expected baseline-gcn, gvn or egvn)")))
}

pub fn parse_strategy(s: &str) -> Result<Strategy> {
    Strategy::ALL
        .into_iter()
        .find(|x| x.name() == s)
        .ok_or_else(|| Error::Config(format!("unknown integration '{s}' (expected attention, concat or weighted)")))
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            e => e,
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn cache_dir(&self) -> PathBuf {
        self.cache.clone().unwrap_or_else(|| self.out.join("cache"))
    }

    pub fn repository_path(&self) -> PathBuf {
        self.repository.clone().unwrap_or_else(|| self.out.join("repository.vsfr"))
    }

    /// Checks everything that can be checked without touching data.
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must not be empty".into()));
        }
        let d = &self.dataset;
        match (&d.edges, &d.planetoid_dir) {
            (Some(_), Some(_)) => return Err(Error::Config("set either dataset.edges or dataset.planetoid_dir".into())),
            (None, None) => return Err(Error::Config("dataset.edges or dataset.planetoid_dir is required".into())),
            _ => {}
        }
        SplitRatios::new(1.0 - d.valid_ratio - d.test_ratio, d.valid_ratio, d.test_ratio)?;
        self.train.validate()?;
        self.model_config(1)?.validate()
    }

    /// Model configuration for a graph with `in_dim` feature columns.
    pub fn model_config(&self, in_dim: usize) -> Result<ModelConfig> {
        let m = &self.model;
        let kind = parse_kind(&m.kind)?;
        let encoder = (kind == ModelKind::Gvn && m.finetune_encoder).then(|| self.encoder_arch());
        Ok(ModelConfig {
            kind,
            mpnn: MpnnConfig {
                depth: m.depth,
                in_dim,
                hidden_dim: m.hidden,
                aggregator: m.aggregator,
            },
            strategy: m.integration,
            vsf_dim: if kind == ModelKind::Baseline { 0 } else { self.encoder.dim },
            adapter_out: m.adapter_out,
            readout_hidden: m.readout_hidden,
            vdecoder_hidden: m.vdecoder_hidden,
            delta_raw_init: m.delta_raw_init,
            encoder,
            vision: VisionSpec {
                k: m.k,
                style: m.style.to_style(),
                mask_center_link: m.mask_center_link,
            },
        })
    }

    pub fn encoder_arch(&self) -> EncoderArch {
        let c = self.model.style.canvas as usize;
        EncoderArch::convstack((c, c), self.encoder.dim)
    }

    pub fn load_encoder(&self) -> Result<EncoderHandle> {
        let enc = match &self.encoder.weights {
            Some(p) => EncoderHandle::load(p)?,
            None => EncoderHandle::init(self.encoder_arch(), self.encoder.seed)?,
        };
        if enc.output_dim() != self.encoder.dim {
            return Err(Error::Config(format!(
                "encoder emits {} features but encoder.dim = {}",
                enc.output_dim(),
                self.encoder.dim
            )));
        }
        Ok(enc)
    }

    pub fn load_graph(&self) -> Result<Graph> {
        let d = &self.dataset;
        if let Some(dir) = &d.planetoid_dir {
            return load_planetoid(dir, &d.name);
        }
        let path = d.edges.as_ref().ok_or_else(|| Error::Config("no dataset configured".into()))?;
        let g = load_edge_list(path, None)?;
        match &d.features {
            Some(f) => {
                let x = load_features(f, g.num_nodes())?;
                g.with_features(x)
            }
            None => Ok(g),
        }
    }

    pub fn load_splits(&self, g: &Graph) -> Result<SplitSet> {
        let d = &self.dataset;
        let s = match &d.splits {
            Some(dir) => SplitSet::load_dir(dir)?,
            None => make_splits(
                g,
                SplitRatios::new(1.0 - d.valid_ratio - d.test_ratio, d.valid_ratio, d.test_ratio)?,
                d.split_seed,
            )?,
        };
        s.validate(g)?;
        Ok(s)
    }
}
