//! Deterministic subgraph rasterization: force-directed layout, glyph
//! styles, center highlighting, and a content-addressed PNG cache.

mod cache;
mod layout;
mod raster;
mod style;

pub use cache::{encode_png, read_png, write_png, BatchOutput, RenderCache, RenderJob};
pub use layout::{layout, LayoutResult, MIN_SEPARATION};
pub(crate) use layout::layout_edges;
pub use raster::{render, ImageBuffer, MAX_RENDER_NODES};
pub use style::{
    randomize_style, Labeling, LayoutKind, NamedColor, NodeShape, RenderStyle, Rgb, Visualizer,
};

