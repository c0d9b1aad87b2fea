//! Heuristic structural features, positional encodings, synthetic graph
//! generators and substructure counters.

mod generators;
mod pe;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId, SubgraphView, UNREACHABLE};

pub use generators::{gen_erdos_renyi, gen_random_regular};
pub use pe::{node_pe, DISTANCE_CAP};

/// Hand-designed structural feature families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SfKind {
    CN,
    AA,
    RA,
    SPD,
    DRNL,
    DE,
}

impl SfKind {
    pub const ALL: [SfKind; 6] = [
        SfKind::CN,
        SfKind::AA,
        SfKind::RA,
        SfKind::SPD,
        SfKind::DRNL,
        SfKind::DE,
    ];

    /// Integer-valued families are scored by exact match after rounding.
    pub fn is_integer(self) -> bool {
        matches!(self, SfKind::CN | SfKind::SPD | SfKind::DRNL)
    }

    pub fn name(self) -> &'static str {
        match self {
            SfKind::CN => "CN",
            SfKind::AA => "AA",
            SfKind::RA => "RA",
            SfKind::SPD => "SPD",
            SfKind::DRNL => "DRNL",
            SfKind::DE => "DE",
        }
    }
}

/// Node positional encodings used as baselines against visual features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PeKind {
    ImageCoords2D,
    LaplacianPE,
    DistanceVector,
    DegreeCentrality,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Substructure {
    Triangle,
    ThreeStar,
}

fn sorted_intersection<'a>(a: &'a [NodeId], b: &'a [NodeId]) -> impl Iterator<Item = NodeId> + 'a {
    let (mut i, mut j) = (0, 0);
    std::iter::from_fn(move || {
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    let x = a[i];
                    i += 1;
                    j += 1;
                    return Some(x);
                }
            }
        }
        None
    })
}

pub fn common_neighbors(g: &Graph, u: NodeId, v: NodeId) -> Vec<NodeId> {
    sorted_intersection(g.neighbors(u), g.neighbors(v)).collect()
}

/// Pairwise heuristic between `u` and `v`. SPD is `f64::INFINITY` for
/// disconnected pairs. DRNL and DE are node labelings, not pair scores.
pub fn pair_sf(g: &Graph, kind: SfKind, u: NodeId, v: NodeId) -> Result<f64> {
    g.check_node(u)?;
    g.check_node(v)?;
    if u == v {
        return Err(Error::arg("pair features need two distinct nodes"));
    }
    let cn = || sorted_intersection(g.neighbors(u), g.neighbors(v));
    Ok(match kind {
        SfKind::CN => cn().count() as f64,
        // degree-1 common neighbours cannot occur in a simple graph; skip them
        // rather than divide by ln 1 = 0
        SfKind::AA => cn()
            .map(|w| g.degree(w))
            .filter(|&d| d > 1)
            .map(|d| 1.0 / (d as f64).ln())
            .sum(),
        SfKind::RA => cn().map(|w| 1.0 / g.degree(w) as f64).sum(),
        SfKind::SPD => {
            let d = g.bfs(u)[v];
            if d == UNREACHABLE {
                f64::INFINITY
            } else {
                d as f64
            }
        }
        SfKind::DRNL | SfKind::DE => {
            return Err(Error::arg(format!(
                "{} is a node labeling; use drnl_labels / node_pe",
                kind.name()
            )))
        }
    })
}

/// Shortest-path distance clamped for use as a learning target: unreachable
/// pairs map to `2k + 2`, beyond any k-hop subgraph diameter.
pub fn spd_target(g: &Graph, u: NodeId, v: NodeId, k: usize) -> Result<f64> {
    let d = pair_sf(g, SfKind::SPD, u, v)?;
    Ok(if d.is_finite() { d } else { (2 * k + 2) as f64 })
}

/// Double-radius node labels for the enclosing subgraph of `(u, v)`, indexed
/// by local id. Distances are measured inside the view; `du` ignores `v` and
/// `dv` ignores `u`. Unreachable nodes get label 0.
pub fn drnl_labels(view: &SubgraphView) -> Result<Vec<u32>> {
    if view.num_centers() != 2 {
        return Err(Error::arg("DRNL needs a link-centered view"));
    }
    let n = view.num_nodes();
    let local = Graph::from_edges(n, view.edges().iter().copied())?;
    let du = local.bfs_multi(&[0], None, Some(1));
    let dv = local.bfs_multi(&[1], None, Some(0));
    Ok((0..n)
        .map(|x| {
            if x < 2 {
                return 1;
            }
            let (a, b) = (du[x], dv[x]);
            if a == UNREACHABLE || b == UNREACHABLE {
                return 0;
            }
            let d = a + b;
            let half = d / 2;
            (1 + a.min(b) + half * (half + d % 2 - 1)) as u32
        })
        .collect())
}

/// Number of triangles (3-cliques) or 3-stars (`Σ_v C(deg v, 3)`).
pub fn count_substructure(g: &Graph, kind: Substructure) -> u64 {
    match kind {
        Substructure::Triangle => g
            .edges()
            .iter()
            .map(|&(u, v)| {
                sorted_intersection(g.neighbors(u), g.neighbors(v))
                    .filter(|&w| w > v)
                    .count() as u64
            })
            .sum(),
        Substructure::ThreeStar => (0..g.num_nodes())
            .map(|v| {
                let d = g.degree(v) as u64;
                if d < 3 {
                    0
                } else {
                    d * (d - 1) * (d - 2) / 6
                }
            })
            .sum(),
    }
}
