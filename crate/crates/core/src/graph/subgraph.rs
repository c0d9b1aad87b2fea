use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{canonical_pair, Graph, NodeId, UNREACHABLE};
use crate::error::{Error, Result};

/// Largest supported visual perception scope.
pub const MAX_HOPS: usize = 3;

/// What a subgraph is centered on (global ids).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Center {
    Link(NodeId, NodeId),
    Node(NodeId),
}

/// A k-hop subgraph in local coordinates.
///
/// Local node order: the center node(s) first (`u` then `v`), then the
/// remaining nodes in ascending global id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubgraphView {
    center: Center,
    k: usize,
    local_nodes: Vec<NodeId>,
    /// Hop distance of each local node from the center set.
    hops: Vec<usize>,
    local_edges: Vec<(usize, usize)>,
    mask_center_link: bool,
}

fn check_k(k: usize) -> Result<()> {
    if !(1..=MAX_HOPS).contains(&k) {
        return Err(Error::arg(format!("hop count k={k} outside 1..={MAX_HOPS}")));
    }
    Ok(())
}

fn extract(g: &Graph, center: Center, k: usize, mask: bool) -> SubgraphView {
    let centers: Vec<NodeId> = match center {
        Center::Link(u, v) => vec![u, v],
        Center::Node(v) => vec![v],
    };
    let dist = g.bfs_multi(&centers, Some(k), None);

    let mut local_nodes = centers.clone();
    local_nodes.extend((0..g.num_nodes()).filter(|&x| dist[x] != UNREACHABLE && !centers.contains(&x)));
    let index: HashMap<NodeId, usize> = local_nodes
        .iter()
        .enumerate()
        .map(|(i, &x)| (x, i))
        .collect();
    let hops = local_nodes.iter().map(|&x| dist[x]).collect();

    let masked = match center {
        Center::Link(u, v) if mask => Some(canonical_pair(u, v)),
        _ => None,
    };
    let mut local_edges = Vec::new();
    for &x in &local_nodes {
        if dist[x] + 1 > k {
            continue;
        }
        for &y in g.neighbors(x) {
            if masked == Some(canonical_pair(x, y)) {
                continue;
            }
            local_edges.push(canonical_pair(index[&x], index[&y]));
        }
    }
    local_edges.sort_unstable();
    local_edges.dedup();

    SubgraphView {
        center,
        k,
        local_nodes,
        hops,
        local_edges,
        mask_center_link: mask && matches!(center, Center::Link(..)),
    }
}

/// Link-centered k-hop enclosing subgraph of `(u, v)`.
///
/// Nodes are those within `k` hops of `u` or `v`; edges are those with an
/// endpoint within `k - 1` hops (i.e. reachable by a k-step walk from either
/// center). With `mask`, the edge `(u, v)` itself is dropped.
pub fn k_hop_link_subgraph(
    g: &Graph,
    u: NodeId,
    v: NodeId,
    k: usize,
    mask: bool,
) -> Result<SubgraphView> {
    g.check_node(u)?;
    g.check_node(v)?;
    if u == v {
        return Err(Error::arg(format!("link endpoints must differ (got {u},{v})")));
    }
    check_k(k)?;
    Ok(extract(g, Center::Link(u, v), k, mask))
}

/// Node-centered k-hop subgraph of `v`.
pub fn k_hop_node_subgraph(g: &Graph, v: NodeId, k: usize) -> Result<SubgraphView> {
    g.check_node(v)?;
    check_k(k)?;
    Ok(extract(g, Center::Node(v), k, false))
}

impl SubgraphView {
    pub fn center(&self) -> Center {
        self.center
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Global ids, indexed by local id.
    pub fn nodes(&self) -> &[NodeId] {
        &self.local_nodes
    }

    /// Edges as `(a, b)` local ids with `a < b`, sorted.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.local_edges
    }

    pub fn hops(&self) -> &[usize] {
        &self.hops
    }

    pub fn mask_center_link(&self) -> bool {
        self.mask_center_link
    }

    pub fn num_nodes(&self) -> usize {
        self.local_nodes.len()
    }

    pub fn num_centers(&self) -> usize {
        match self.center {
            Center::Link(..) => 2,
            Center::Node(_) => 1,
        }
    }

    pub fn is_center(&self, local: usize) -> bool {
        local < self.num_centers()
    }

    pub fn local_of(&self, global: NodeId) -> Option<usize> {
        self.local_nodes.iter().position(|&x| x == global)
    }

    /// Byte encoding of the local structure. Global ids are included only when
    /// `with_global_ids` is set (they matter once labels show them).
    pub fn canonical_encoding(&self, with_global_ids: bool) -> Vec<u8> {
        let mut out = Vec::with_capacity(32 + 16 * self.local_edges.len());
        out.extend_from_slice(b"subgraph/v1");
        out.push(match self.center {
            Center::Link(..) => 1,
            Center::Node(_) => 0,
        });
        out.push(self.k as u8);
        out.push(self.mask_center_link as u8);
        out.extend_from_slice(&(self.local_nodes.len() as u64).to_le_bytes());
        if with_global_ids {
            for &g in &self.local_nodes {
                out.extend_from_slice(&(g as u64).to_le_bytes());
            }
        }
        out.extend_from_slice(&(self.local_edges.len() as u64).to_le_bytes());
        for &(a, b) in &self.local_edges {
            out.extend_from_slice(&(a as u32).to_le_bytes());
            out.extend_from_slice(&(b as u32).to_le_bytes());
        }
        out
    }

    /// Layout seed derived from the structure alone, so identical local
    /// structures always lay out identically.
    pub fn layout_seed(&self) -> u64 {
        let digest = Sha256::digest(self.canonical_encoding(false));
        u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
    }

    /// Keeps at most `max_nodes` nodes in BFS order from the center
    /// (ties by global id); the centers always survive.
    pub fn truncated(&self, max_nodes: usize) -> SubgraphView {
        let max_nodes = max_nodes.max(self.num_centers());
        if self.local_nodes.len() <= max_nodes {
            return self.clone();
        }
        let c = self.num_centers();
        let mut rest: Vec<usize> = (c..self.local_nodes.len()).collect();
        rest.sort_by_key(|&i| (self.hops[i], self.local_nodes[i]));
        rest.truncate(max_nodes - c);
        rest.sort_by_key(|&i| self.local_nodes[i]);
        let keep: Vec<usize> = (0..c).chain(rest).collect();
        let mut remap = vec![usize::MAX; self.local_nodes.len()];
        for (new, &old) in keep.iter().enumerate() {
            remap[old] = new;
        }
        let local_edges = self
            .local_edges
            .iter()
            .filter_map(|&(a, b)| {
                let (na, nb) = (remap[a], remap[b]);
                (na != usize::MAX && nb != usize::MAX).then(|| canonical_pair(na, nb))
            })
            .collect::<Vec<_>>();
        let mut local_edges = local_edges;
        local_edges.sort_unstable();
        SubgraphView {
            center: self.center,
            k: self.k,
            local_nodes: keep.iter().map(|&i| self.local_nodes[i]).collect(),
            hops: keep.iter().map(|&i| self.hops[i]).collect(),
            local_edges,
            mask_center_link: self.mask_center_link,
        }
    }

    /// Global-id edge set, for comparisons against oracles.
    pub fn global_edges(&self) -> Vec<(NodeId, NodeId)> {
        let mut e: Vec<_> = self
            .local_edges
            .iter()
            .map(|&(a, b)| canonical_pair(self.local_nodes[a], self.local_nodes[b]))
            .collect();
        e.sort_unstable();
        e
    }
}
