//! Undirected simple graphs, edge-list ingestion, k-hop subgraph extraction
//! and train/valid/test link splits.

mod io;
mod split;
mod subgraph;

use std::collections::VecDeque;

use ndarray::Array2;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub use io::{load_edge_list, load_features, load_planetoid, parse_edge_list, write_edge_list};
pub use split::{make_splits, sample_negatives, SplitRatios, SplitSet};
pub use subgraph::{k_hop_link_subgraph, k_hop_node_subgraph, Center, SubgraphView, MAX_HOPS};

pub type NodeId = usize;

/// Distance sentinel for nodes not reachable from the BFS source(s).
pub const UNREACHABLE: usize = usize::MAX;

/// Immutable undirected simple graph with optional node feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    /// Canonical edges `(u, v)` with `u < v`, sorted and deduplicated.
    edges: Vec<(NodeId, NodeId)>,
    adj: Vec<Vec<NodeId>>,
    features: Option<Array2<f64>>,
}

/// Orders an unordered pair as `(min, max)`.
#[inline]
pub fn canonical_pair(u: NodeId, v: NodeId) -> (NodeId, NodeId) {
    if u <= v {
        (u, v)
    } else {
        (v, u)
    }
}

impl Graph {
    /// Builds a graph from arbitrary (possibly duplicated, either-orientation) pairs.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (NodeId, NodeId)>,
    {
        let mut canon = Vec::new();
        for (u, v) in edges {
            if u == v {
                return Err(Error::arg(format!("self-loop on node {u}")));
            }
            if u >= n || v >= n {
                return Err(Error::arg(format!(
                    "edge ({u},{v}) has an endpoint outside 0..{n}"
                )));
            }
            canon.push(canonical_pair(u, v));
        }
        canon.sort_unstable();
        canon.dedup();
        let mut adj = vec![Vec::new(); n];
        for &(u, v) in &canon {
            adj[u].push(v);
            adj[v].push(u);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        Ok(Graph {
            n,
            edges: canon,
            adj,
            features: None,
        })
    }

    pub fn empty(n: usize) -> Self {
        Graph {
            n,
            edges: Vec::new(),
            adj: vec![Vec::new(); n],
            features: None,
        }
    }

    /// Attaches an `n × F` feature matrix.
    pub fn with_features(mut self, features: Array2<f64>) -> Result<Self> {
        if features.nrows() != self.n {
            return Err(Error::arg(format!(
                "feature matrix has {} rows, graph has {} nodes",
                features.nrows(),
                self.n
            )));
        }
        self.features = Some(features);
        Ok(self)
    }

    /// Same node set and features, different edge set.
    pub fn with_edges<I>(&self, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (NodeId, NodeId)>,
    {
        let mut g = Graph::from_edges(self.n, edges)?;
        g.features = self.features.clone();
        Ok(g)
    }

    pub fn num_nodes(&self) -> usize {
        self.n
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(NodeId, NodeId)] {
        &self.edges
    }

    pub fn neighbors(&self, v: NodeId) -> &[NodeId] {
        &self.adj[v]
    }

    pub fn degree(&self, v: NodeId) -> usize {
        self.adj[v].len()
    }

    pub fn features(&self) -> Option<&Array2<f64>> {
        self.features.as_ref()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.as_ref().map_or(0, |x| x.ncols())
    }

    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        u < self.n && v < self.n && self.adj[u].binary_search(&v).is_ok()
    }

    /// Number of unordered node pairs that are not edges.
    pub fn num_non_edges(&self) -> usize {
        self.n * self.n.saturating_sub(1) / 2 - self.edges.len()
    }

    pub(crate) fn check_node(&self, v: NodeId) -> Result<()> {
        if v >= self.n {
            return Err(Error::arg(format!(
                "node {v} out of range (graph has {} nodes)",
                self.n
            )));
        }
        Ok(())
    }

    /// Unweighted BFS distances from `src`; unreachable nodes get [`UNREACHABLE`].
    pub fn bfs(&self, src: NodeId) -> Vec<usize> {
        self.bfs_multi(&[src], None, None)
    }

    /// Multi-source BFS, optionally stopping at `max_depth` and treating
    /// `blocked` as removed from the graph.
    pub fn bfs_multi(
        &self,
        sources: &[NodeId],
        max_depth: Option<usize>,
        blocked: Option<NodeId>,
    ) -> Vec<usize> {
        let mut dist = vec![UNREACHABLE; self.n];
        let mut queue = VecDeque::new();
        for &s in sources {
            if Some(s) != blocked && dist[s] == UNREACHABLE {
                dist[s] = 0;
                queue.push_back(s);
            }
        }
        while let Some(x) = queue.pop_front() {
            let d = dist[x];
            if max_depth.is_some_and(|m| d >= m) {
                continue;
            }
            for &y in &self.adj[x] {
                if Some(y) != blocked && dist[y] == UNREACHABLE {
                    dist[y] = d + 1;
                    queue.push_back(y);
                }
            }
        }
        dist
    }

    /// Lowercase hex SHA-256 over the node count and canonical edge list.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(b"graph/v1");
        h.update((self.n as u64).to_le_bytes());
        for &(u, v) in &self.edges {
            h.update((u as u64).to_le_bytes());
            h.update((v as u64).to_le_bytes());
        }
        hex::encode(h.finalize())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_dedup() {
        let g = Graph::from_edges(4, [(1, 0), (0, 1), (2, 3), (3, 2), (1, 2)]).unwrap();
        assert_eq!(g.edges(), &[(0, 1), (1, 2), (2, 3)]);
        assert_eq!(g.neighbors(1), &[0, 2]);
        assert!(g.has_edge(3, 2));
        assert!(!g.has_edge(0, 3));
        assert_eq!(g.num_non_edges(), 3);
    }

    #[test]
    fn rejects_self_loops_and_range() {
        assert!(Graph::from_edges(3, [(1, 1)]).is_err());
        assert!(Graph::from_edges(3, [(0, 3)]).is_err());
    }

    #[test]
    fn bfs_blocked_and_depth() {
        // path 0-1-2-3
        let g = Graph::from_edges(4, [(0, 1), (1, 2), (2, 3)]).unwrap();
        assert_eq!(g.bfs(0), vec![0, 1, 2, 3]);
        assert_eq!(g.bfs_multi(&[0], Some(1), None), vec![0, 1, UNREACHABLE, UNREACHABLE]);
        assert_eq!(g.bfs_multi(&[0], None, Some(2)), vec![0, 1, UNREACHABLE, UNREACHABLE]);
    }

    #[test]
    fn digest_ignores_input_order() {
        let a = Graph::from_edges(4, [(0, 1), (2, 3)]).unwrap();
        let b = Graph::from_edges(4, [(3, 2), (1, 0)]).unwrap();
        assert_eq!(a.digest(), b.digest());
        let c = Graph::from_edges(5, [(0, 1), (2, 3)]).unwrap();
        assert_ne!(a.digest(), c.digest());
    }
}
