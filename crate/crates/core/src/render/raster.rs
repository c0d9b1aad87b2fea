use sha2::{Digest, Sha256};

use super::layout::layout;
use super::style::{randomize_style, Labeling, NodeShape, RenderStyle, Rgb};
use crate::error::{Error, Result};
use crate::graph::SubgraphView;
use crate::rng::derive_seed;

/// Views above this many nodes are down-sampled (BFS order from the center)
/// before layout.
pub const MAX_RENDER_NODES: usize = 120;

/// `H × W × 3` 8-bit RGB raster, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageBuffer {
    height: u32,
    width: u32,
    data: Vec<u8>,
}

impl ImageBuffer {
    pub fn new(height: u32, width: u32, fill: Rgb) -> Self {
        let mut data = Vec::with_capacity((height * width * 3) as usize);
        for _ in 0..height * width {
            data.extend_from_slice(&[fill.0, fill.1, fill.2]);
        }
        ImageBuffer { height, width, data }
    }

    pub fn from_raw(height: u32, width: u32, data: Vec<u8>) -> Result<Self> {
        if data.len() != (height * width * 3) as usize {
            return Err(Error::Format(format!(
                "raw buffer of {} bytes does not match {height}x{width}x3",
                data.len()
            )));
        }
        Ok(ImageBuffer { height, width, data })
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn as_raw(&self) -> &[u8] {
        &self.data
    }

    pub fn pixel(&self, x: u32, y: u32) -> Rgb {
        let i = ((y * self.width + x) * 3) as usize;
        Rgb(self.data[i], self.data[i + 1], self.data[i + 2])
    }

    fn put(&mut self, x: i64, y: i64, c: Rgb) {
        if x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64 {
            return;
        }
        let i = ((y as u32 * self.width + x as u32) * 3) as usize;
        self.data[i] = c.0;
        self.data[i + 1] = c.1;
        self.data[i + 2] = c.2;
    }

    /// Lowercase hex SHA-256 of the raw pixel bytes plus dimensions.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.height.to_le_bytes());
        h.update(self.width.to_le_bytes());
        h.update(&self.data);
        hex::encode(h.finalize())
    }

    /// Number of pixels whose color differs between two equally sized images.
    pub fn diff_count(&self, other: &ImageBuffer) -> usize {
        assert_eq!((self.height, self.width), (other.height, other.width));
        self.data
            .chunks_exact(3)
            .zip(other.data.chunks_exact(3))
            .filter(|(a, b)| a != b)
            .count()
    }
}

fn inside(shape: NodeShape, dx: f64, dy: f64, r: f64) -> bool {
    match shape {
        NodeShape::Box => dx.abs() <= 1.4 * r && dy.abs() <= r,
        NodeShape::Circle => dx * dx + dy * dy <= r * r,
        NodeShape::Ellipse => (dx / (1.5 * r)).powi(2) + (dy / r).powi(2) <= 1.0,
        NodeShape::Pentagon => {
            // regular pentagon, vertex up, circumradius 1.15 r; inside all five edge half-planes
            let rc = 1.15 * r;
            let apothem = rc * (std::f64::consts::PI / 5.0).cos();
            (0..5).all(|i| {
                let theta = std::f64::consts::PI / 2.0 + std::f64::consts::PI / 5.0
                    + 2.0 * std::f64::consts::PI * i as f64 / 5.0;
                // image y grows downwards
                dx * theta.cos() - dy * theta.sin() <= apothem
            })
        }
    }
}

fn half_extent(shape: NodeShape, r: f64) -> f64 {
    match shape {
        NodeShape::Box => 1.4 * r,
        NodeShape::Circle => r,
        NodeShape::Ellipse => 1.5 * r,
        NodeShape::Pentagon => 1.15 * r,
    }
}

fn draw_glyph(img: &mut ImageBuffer, cx: i64, cy: i64, style: &RenderStyle, fill: Rgb) {
    let r = style.node_radius_px as f64;
    let ext = half_extent(style.node_shape, r).ceil() as i64 + 1;
    let is_in = |x: i64, y: i64| inside(style.node_shape, (x - cx) as f64, (y - cy) as f64, r);
    for y in cy - ext..=cy + ext {
        for x in cx - ext..=cx + ext {
            if !is_in(x, y) {
                continue;
            }
            let border = !is_in(x - 1, y) || !is_in(x + 1, y) || !is_in(x, y - 1) || !is_in(x, y + 1);
            img.put(x, y, if border { style.outline_color } else { fill });
        }
    }
}

/// Bresenham line with a square brush of `width` pixels.
fn draw_line(img: &mut ImageBuffer, (x0, y0): (i64, i64), (x1, y1): (i64, i64), width: u32, c: Rgb) {
    let w = width.max(1) as i64;
    let lo = -(w - 1) / 2;
    let hi = w / 2;
    let (dx, dy) = ((x1 - x0).abs(), -(y1 - y0).abs());
    let (sx, sy) = (if x0 < x1 { 1 } else { -1 }, if y0 < y1 { 1 } else { -1 });
    let (mut x, mut y, mut err) = (x0, y0, dx + dy);
    loop {
        for oy in lo..=hi {
            for ox in lo..=hi {
                img.put(x + ox, y + oy, c);
            }
        }
        if x == x1 && y == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
}

/// 3x5 bitmap digits, one row per entry, bit 2 = leftmost column.
const DIGITS: [[u8; 5]; 10] = [
    [0b111, 0b101, 0b101, 0b101, 0b111],
    [0b010, 0b110, 0b010, 0b010, 0b111],
    [0b111, 0b001, 0b111, 0b100, 0b111],
    [0b111, 0b001, 0b111, 0b001, 0b111],
    [0b101, 0b101, 0b111, 0b001, 0b001],
    [0b111, 0b100, 0b111, 0b001, 0b111],
    [0b111, 0b100, 0b111, 0b101, 0b111],
    [0b111, 0b001, 0b010, 0b010, 0b010],
    [0b111, 0b101, 0b111, 0b101, 0b111],
    [0b111, 0b101, 0b111, 0b001, 0b111],
];

fn draw_number(img: &mut ImageBuffer, cx: i64, cy: i64, value: usize, c: Rgb) {
    let text = value.to_string();
    let width = text.len() as i64 * 4 - 1;
    let x0 = cx - width / 2;
    let y0 = cy - 2;
    for (k, ch) in text.bytes().enumerate() {
        let glyph = DIGITS[(ch - b'0') as usize];
        for (row, bits) in glyph.iter().enumerate() {
            for col in 0..3 {
                if bits & (0b100 >> col) != 0 {
                    img.put(x0 + k as i64 * 4 + col, y0 + row as i64, c);
                }
            }
        }
    }
}

fn check_canvas(style: &RenderStyle) -> Result<()> {
    let (h, w) = style.canvas_px;
    let glyph = 2.0 * half_extent(style.node_shape, style.node_radius_px as f64) + 2.0;
    if h < 8 || w < 8 || glyph > 0.5 * h.min(w) as f64 {
        return Err(Error::Config(format!(
            "canvas {h}x{w} too small for {:?} glyphs of radius {}",
            style.node_shape, style.node_radius_px
        )));
    }
    Ok(())
}

/// Rasterizes a subgraph: edges first, then plain nodes, then the center
/// node(s) on top. No anti-aliasing; output is a pure function of the inputs.
pub fn render(view: &SubgraphView, style: &RenderStyle, seed: u64) -> Result<ImageBuffer> {
    check_canvas(style)?;
    let view = view.truncated(MAX_RENDER_NODES);
    let sampled;
    let style = if style.randomize_per_sample {
        sampled = randomize_style(style, derive_seed(view.layout_seed(), "style"));
        &sampled
    } else {
        style
    };
    let positions = layout(&view, style, seed).positions;
    Ok(draw(&view, &positions, style))
}

/// Paints a view at fixed normalized positions.
pub(crate) fn draw(view: &SubgraphView, positions: &[(f64, f64)], style: &RenderStyle) -> ImageBuffer {
    let (h, w) = style.canvas_px;
    let to_px = |(x, y): (f64, f64)| {
        (
            (x * (w - 1) as f64).round() as i64,
            (y * (h - 1) as f64).round() as i64,
        )
    };
    let px: Vec<(i64, i64)> = positions.iter().copied().map(to_px).collect();

    let mut img = ImageBuffer::new(h, w, style.background_color);
    for &(a, b) in view.edges() {
        draw_line(&mut img, px[a], px[b], style.edge_width_px, style.outline_color);
    }
    let order = (view.num_centers()..view.num_nodes()).chain(0..view.num_centers());
    for i in order {
        let fill = if view.is_center(i) {
            style.center_color
        } else {
            style.fill_color
        };
        draw_glyph(&mut img, px[i].0, px[i].1, style, fill);
        let label = match style.labeling {
            Labeling::NoLabel => None,
            Labeling::ReLabel => Some(i),
            Labeling::Unique => Some(view.nodes()[i]),
        };
        if let Some(label) = label {
            draw_number(&mut img, px[i].0, px[i].1, label, style.outline_color);
        }
    }
    img
}
