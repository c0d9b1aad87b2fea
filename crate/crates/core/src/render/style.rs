use rand::seq::IndexedRandom;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::rng::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rgb(pub u8, pub u8, pub u8);

/// The named palette style sampling draws from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NamedColor {
    White,
    Black,
    Brown,
    Yellow,
    Red,
    Green,
}

impl NamedColor {
    pub const ALL: [NamedColor; 6] = [
        NamedColor::White,
        NamedColor::Black,
        NamedColor::Brown,
        NamedColor::Yellow,
        NamedColor::Red,
        NamedColor::Green,
    ];

    pub fn rgb(self) -> Rgb {
        match self {
            NamedColor::White => Rgb(255, 255, 255),
            NamedColor::Black => Rgb(0, 0, 0),
            NamedColor::Brown => Rgb(165, 42, 42),
            NamedColor::Yellow => Rgb(255, 255, 0),
            NamedColor::Red => Rgb(255, 0, 0),
            NamedColor::Green => Rgb(0, 128, 0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeShape {
    Box,
    Circle,
    Ellipse,
    Pentagon,
}

impl NodeShape {
    pub const ALL: [NodeShape; 4] = [
        NodeShape::Ellipse,
        NodeShape::Box,
        NodeShape::Circle,
        NodeShape::Pentagon,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Labeling {
    /// No text at all.
    NoLabel,
    /// Local ids, starting from zero.
    ReLabel,
    /// Global node ids.
    Unique,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LayoutKind {
    ForceDirected,
}

/// Visualizer families. Each one is a preset of force parameters and glyph
/// styling; all of them share the same force-directed engine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Visualizer {
    Graphviz,
    Matplotlib,
    Igraph,
}

impl Visualizer {
    pub const ALL: [Visualizer; 3] = [Visualizer::Graphviz, Visualizer::Matplotlib, Visualizer::Igraph];

    /// Scale on the ideal spring length.
    pub(crate) fn spring_scale(self) -> f64 {
        match self {
            Visualizer::Graphviz => 1.0,
            Visualizer::Matplotlib => 0.8,
            Visualizer::Igraph => 1.25,
        }
    }
}

/// Full visual configuration for one experiment run.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RenderStyle {
    /// `(height, width)` in pixels.
    pub canvas_px: (u32, u32),
    pub node_shape: NodeShape,
    pub fill_color: Rgb,
    pub center_color: Rgb,
    pub background_color: Rgb,
    pub outline_color: Rgb,
    pub labeling: Labeling,
    pub layout: LayoutKind,
    pub visualizer: Visualizer,
    pub layout_iterations: u32,
    pub edge_width_px: u32,
    pub node_radius_px: u32,
    /// Draw every view with its own sampled style, keyed by its structure.
    #[serde(default)]
    pub randomize_per_sample: bool,
}

impl Default for RenderStyle {
    /// White background, white boxes with black outlines, brown centers, no labels.
    fn default() -> Self {
        RenderStyle {
            canvas_px: (224, 224),
            node_shape: NodeShape::Box,
            fill_color: NamedColor::White.rgb(),
            center_color: NamedColor::Brown.rgb(),
            background_color: NamedColor::White.rgb(),
            outline_color: NamedColor::Black.rgb(),
            labeling: Labeling::NoLabel,
            layout: LayoutKind::ForceDirected,
            visualizer: Visualizer::Graphviz,
            layout_iterations: 100,
            edge_width_px: 1,
            node_radius_px: 7,
            randomize_per_sample: false,
        }
    }
}

impl RenderStyle {
    /// Preset resembling a given visualizer family.
    pub fn profile(visualizer: Visualizer) -> Self {
        let base = RenderStyle::default();
        match visualizer {
            Visualizer::Graphviz => base,
            Visualizer::Matplotlib => RenderStyle {
                node_shape: NodeShape::Circle,
                fill_color: Rgb(31, 119, 180),
                center_color: Rgb(255, 127, 14),
                outline_color: Rgb(31, 119, 180),
                visualizer,
                edge_width_px: 1,
                node_radius_px: 6,
                ..base
            },
            Visualizer::Igraph => RenderStyle {
                node_shape: NodeShape::Circle,
                fill_color: Rgb(255, 0, 0),
                center_color: Rgb(255, 255, 0),
                outline_color: Rgb(0, 0, 0),
                visualizer,
                edge_width_px: 2,
                node_radius_px: 8,
                ..base
            },
        }
    }

    /// Same style on a different canvas with proportionally scaled glyphs.
    pub fn with_canvas(mut self, height: u32, width: u32) -> Self {
        let scale = height.min(width) as f64 / self.canvas_px.0.min(self.canvas_px.1) as f64;
        self.node_radius_px = ((self.node_radius_px as f64 * scale).round() as u32).max(1);
        self.canvas_px = (height, width);
        self
    }

    /// Lowercase hex SHA-256 over the ordered style fields.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(b"style/v1");
        h.update(self.canvas_px.0.to_le_bytes());
        h.update(self.canvas_px.1.to_le_bytes());
        h.update([self.node_shape as u8]);
        for c in [
            self.fill_color,
            self.center_color,
            self.background_color,
            self.outline_color,
        ] {
            h.update([c.0, c.1, c.2]);
        }
        h.update([self.labeling as u8, self.layout as u8, self.visualizer as u8]);
        h.update(self.layout_iterations.to_le_bytes());
        h.update(self.edge_width_px.to_le_bytes());
        h.update(self.node_radius_px.to_le_bytes());
        h.update([self.randomize_per_sample as u8]);
        hex::encode(h.finalize())
    }
}

/// Samples node color, shape and visualizer; the center color is always
/// different from the sampled fill.
pub fn randomize_style(base: &RenderStyle, seed: u64) -> RenderStyle {
    let mut r = rng(seed);
    let visualizer = *Visualizer::ALL.choose(&mut r).expect("non-empty");
    let fill = *NamedColor::ALL.choose(&mut r).expect("non-empty");
    let shape = *NodeShape::ALL.choose(&mut r).expect("non-empty");
    let centers: Vec<NamedColor> = NamedColor::ALL.into_iter().filter(|&c| c != fill).collect();
    let center = *centers.choose(&mut r).expect("five left");
    let profile = RenderStyle::profile(visualizer);
    RenderStyle {
        canvas_px: base.canvas_px,
        node_shape: shape,
        fill_color: fill.rgb(),
        center_color: center.rgb(),
        // black fills need a visible outline
        outline_color: if fill == NamedColor::Black {
            NamedColor::White.rgb()
        } else {
            NamedColor::Black.rgb()
        },
        visualizer,
        edge_width_px: profile.edge_width_px,
        randomize_per_sample: false,
        ..base.clone()
    }
}
