use rand::Rng as _;

use super::style::RenderStyle;
use crate::graph::SubgraphView;
use crate::rng::{derive_seed, rng};

/// Floor on pairwise distances inside the force computation (unit-square
/// coordinates). Keeps repulsion finite for coincident nodes.
pub const MIN_SEPARATION: f64 = 0.01;

const INITIAL_TEMPERATURE: f64 = 0.1;
const MARGIN: f64 = 0.05;

/// One normalized `(x, y)` per local node, inside `[0.05, 0.95]²`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayoutResult {
    pub positions: Vec<(f64, f64)>,
}

/// Fruchterman–Reingold placement with a fixed iteration count and a
/// linear cooling schedule, started from seeded uniform positions.
pub fn layout(view: &SubgraphView, style: &RenderStyle, seed: u64) -> LayoutResult {
    layout_edges(view.num_nodes(), view.edges(), style, seed)
}

pub(crate) fn layout_edges(
    n: usize,
    edges: &[(usize, usize)],
    style: &RenderStyle,
    seed: u64,
) -> LayoutResult {
    if n == 0 {
        return LayoutResult { positions: Vec::new() };
    }
    if n == 1 {
        return LayoutResult {
            positions: vec![(0.5, 0.5)],
        };
    }
    let mut r = rng(derive_seed(seed, "layout"));
    let mut pos: Vec<[f64; 2]> = (0..n).map(|_| [r.random::<f64>(), r.random::<f64>()]).collect();
    let spring = style.visualizer.spring_scale() * (1.0 / n as f64).sqrt();
    let spring2 = spring * spring;
    let iterations = style.layout_iterations.max(1);
    let mut disp = vec![[0.0f64; 2]; n];

    for it in 0..iterations {
        let temperature = INITIAL_TEMPERATURE * (1.0 - it as f64 / iterations as f64);
        disp.iter_mut().for_each(|d| *d = [0.0, 0.0]);
        for i in 0..n {
            for j in i + 1..n {
                let (dx, dy, d) = separation(&pos, i, j);
                let f = spring2 / d;
                let (fx, fy) = (dx / d * f, dy / d * f);
                disp[i][0] += fx;
                disp[i][1] += fy;
                disp[j][0] -= fx;
                disp[j][1] -= fy;
            }
        }
        for &(a, b) in edges {
            let (dx, dy, d) = separation(&pos, a, b);
            let f = d * d / spring;
            let (fx, fy) = (dx / d * f, dy / d * f);
            disp[a][0] -= fx;
            disp[a][1] -= fy;
            disp[b][0] += fx;
            disp[b][1] += fy;
        }
        for (p, d) in pos.iter_mut().zip(&disp) {
            let len = (d[0] * d[0] + d[1] * d[1]).sqrt();
            if len > 0.0 {
                let step = len.min(temperature) / len;
                p[0] += d[0] * step;
                p[1] += d[1] * step;
            }
        }
    }
    LayoutResult {
        positions: normalize(&pos),
    }
}

/// Vector from `j` to `i` and its (floored) length. Coincident nodes get a
/// fixed, index-dependent direction.
fn separation(pos: &[[f64; 2]], i: usize, j: usize) -> (f64, f64, f64) {
    let mut dx = pos[i][0] - pos[j][0];
    let mut dy = pos[i][1] - pos[j][1];
    if dx.abs() < 1e-12 && dy.abs() < 1e-12 {
        let theta = ((i + 1) * (j + 2)) as f64;
        dx = MIN_SEPARATION * theta.cos();
        dy = MIN_SEPARATION * theta.sin();
    }
    let d = (dx * dx + dy * dy).sqrt().max(MIN_SEPARATION);
    (dx, dy, d)
}

/// Uniform scaling into `[0.05, 0.95]²`, centered, aspect preserved.
fn normalize(pos: &[[f64; 2]]) -> Vec<(f64, f64)> {
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in pos {
        for a in 0..2 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let span = (hi[0] - lo[0]).max(hi[1] - lo[1]);
    if span < 1e-12 {
        return vec![(0.5, 0.5); pos.len()];
    }
    let scale = (1.0 - 2.0 * MARGIN) / span;
    let mid = [(lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0];
    pos.iter()
        .map(|p| (0.5 + (p[0] - mid[0]) * scale, 0.5 + (p[1] - mid[1]) * scale))
        .collect()
}
