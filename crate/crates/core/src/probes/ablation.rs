use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelConfig, ModelKind, Strategy};
use crate::render::{Labeling, NamedColor, NodeShape, RenderStyle, Visualizer};
use crate::train::{model_label, run_experiment, EvalReport, ExperimentContext, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationAxis {
    ScopeK,
    StyleConsistency,
    VisualizerVariant,
    Integration,
    Adaptivity,
    Labeling,
    Color,
    Shape,
}

impl AblationAxis {
    pub const ALL: [AblationAxis; 8] = [
        AblationAxis::ScopeK,
        AblationAxis::StyleConsistency,
        AblationAxis::VisualizerVariant,
        AblationAxis::Integration,
        AblationAxis::Adaptivity,
        AblationAxis::Labeling,
        AblationAxis::Color,
        AblationAxis::Shape,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AblationAxis::ScopeK => "scope_k",
            AblationAxis::StyleConsistency => "style_consistency",
            AblationAxis::VisualizerVariant => "visualizer_variant",
            AblationAxis::Integration => "integration",
            AblationAxis::Adaptivity => "adaptivity",
            AblationAxis::Labeling => "labeling",
            AblationAxis::Color => "color",
            AblationAxis::Shape => "shape",
        }
    }

    /// Accepted grid values.
    pub fn values(self) -> &'static [&'static str] {
        match self {
            AblationAxis::ScopeK => &["1", "2", "3"],
            AblationAxis::StyleConsistency => &["consistent", "random"],
            AblationAxis::VisualizerVariant => &["graphviz", "matplotlib", "igraph"],
            AblationAxis::Integration => &["attention", "concat", "weighted"],
            AblationAxis::Adaptivity => &["freeze", "partial", "full"],
            AblationAxis::Labeling => &["no-label", "re-label", "unique"],
            AblationAxis::Color => &["white", "black", "brown", "yellow", "red", "green"],
            AblationAxis::Shape => &["box", "circle", "ellipse", "pentagon"],
        }
    }
}

impl FromStr for AblationAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AblationAxis::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::arg(format!("unknown ablation axis '{s}'")))
    }
}

fn kebab<T: serde::de::DeserializeOwned>(value: &str) -> Result<T> {
    serde_json::from_value(serde_json::Value::String(value.to_string()))
        .map_err(|_| Error::arg(format!("unsupported value '{value}'")))
}

/// `base` with one axis set to `value`. `encoder` is needed for the
/// `full` adaptivity level, which finetunes the encoder.
pub fn apply_axis(
    base: &ModelConfig,
    axis: AblationAxis,
    value: &str,
    encoder: Option<&crate::vsf::EncoderArch>,
) -> Result<ModelConfig> {
    if !axis.values().contains(&value) {
        return Err(Error::arg(format!(
            "'{value}' is not a {} value (expected one of {:?})",
            axis.name(),
            axis.values()
        )));
    }
    let mut cfg = base.clone();
    let style = &mut cfg.vision.style;
    match axis {
        AblationAxis::ScopeK => cfg.vision.k = value.parse().expect("checked above"),
        AblationAxis::StyleConsistency => style.randomize_per_sample = value == "random",
        AblationAxis::VisualizerVariant => {
            let (h, w) = style.canvas_px;
            let v: Visualizer = kebab(value)?;
            *style = RenderStyle {
                labeling: style.labeling,
                ..RenderStyle::profile(v).with_canvas(h, w)
            };
        }
        AblationAxis::Integration => {
            cfg.strategy = Strategy::ALL
                .into_iter()
                .find(|s| s.name() == value)
                .expect("checked above");
        }
        AblationAxis::Adaptivity => match value {
            "freeze" => {
                cfg.kind = ModelKind::Egvn;
                cfg.adapter_out = None;
                cfg.encoder = None;
            }
            "partial" => {
                cfg.kind = ModelKind::Egvn;
                cfg.adapter_out = Some(base.adapter_out.unwrap_or(base.mpnn.hidden_dim));
                cfg.encoder = None;
            }
            _ => {
                let arch = encoder.ok_or_else(|| Error::arg("full adaptivity needs an encoder"))?;
                cfg.kind = ModelKind::Gvn;
                cfg.adapter_out = None;
                cfg.encoder = Some(arch.clone());
            }
        },
        AblationAxis::Labeling => style.labeling = kebab::<Labeling>(value)?,
        AblationAxis::Shape => style.node_shape = kebab::<NodeShape>(value)?,
        AblationAxis::Color => {
            let c = NamedColor::ALL
                .into_iter()
                .find(|c| format!("{c:?}").to_lowercase() == value)
                .expect("checked above");
            style.fill_color = c.rgb();
            if style.center_color == style.fill_color {
                style.center_color = if c == NamedColor::Red { NamedColor::Green } else { NamedColor::Red }.rgb();
            }
            if c == NamedColor::Black {
                style.outline_color = NamedColor::White.rgb();
            }
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

/// One report per grid value, all trained with the same seeds.
pub fn ablation_driver(
    ctx: &ExperimentContext<'_>,
    axis: AblationAxis,
    grid: &[String],
    base: &ModelConfig,
    train_cfg: &TrainConfig,
    seeds: &[u64],
) -> Result<Vec<EvalReport>> {
    let arch = ctx.encoder.map(|e| e.arch().clone());
    // validate the whole grid before training anything
    let cfgs = grid
        .iter()
        .map(|v| apply_axis(base, axis, v, arch.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    grid.iter()
        .zip(cfgs)
        .map(|(value, cfg)| {
            let mut ctx = *ctx;
            // a shared repository file would go stale across grid points
            ctx.repo_path = None;
            let mut report = run_experiment(&ctx, &cfg, train_cfg, seeds)?.report;
            report.model = format!("{} [{}={value}]", model_label(&cfg), axis.name());
            report.config = serde_json::to_string(&cfg).ok();
            Ok(report)
        })
        .collect()
}
