use std::collections::HashSet;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{canonical_pair, io, Graph, NodeId};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng, rng_for};

/// Evaluation negatives per positive, before capping at the non-edge count.
pub const EVAL_NEGATIVES_PER_POSITIVE: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub valid: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios {
            train: 0.70,
            valid: 0.10,
            test: 0.20,
        }
    }
}

impl SplitRatios {
    pub fn new(train: f64, valid: f64, test: f64) -> Result<Self> {
        let r = SplitRatios { train, valid, test };
        r.validate()?;
        Ok(r)
    }

    fn validate(&self) -> Result<()> {
        let parts = [self.train, self.valid, self.test];
        if parts.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
            return Err(Error::Config(format!("split ratios {parts:?} must lie in [0,1]")));
        }
        if (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("split ratios {parts:?} must sum to 1")));
        }
        Ok(())
    }

    /// `(train, valid, test)` sizes: valid and test are floored, the
    /// remainder goes to train.
    pub fn counts(&self, total: usize) -> (usize, usize, usize) {
        let floor = |r: f64| ((r * total as f64) + 1e-9).floor() as usize;
        let valid = floor(self.valid);
        let test = floor(self.test);
        (total - valid - test, valid, test)
    }
}

/// Positive/negative link splits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSet {
    pub train_pos: Vec<(NodeId, NodeId)>,
    pub valid_pos: Vec<(NodeId, NodeId)>,
    pub test_pos: Vec<(NodeId, NodeId)>,
    pub valid_neg: Vec<(NodeId, NodeId)>,
    pub test_neg: Vec<(NodeId, NodeId)>,
    /// Valid edges also carry messages at test time.
    pub use_valid_as_message_paths: bool,
}

const SPLIT_FILES: [&str; 5] = [
    "train_pos.txt",
    "valid_pos.txt",
    "test_pos.txt",
    "valid_neg.txt",
    "test_neg.txt",
];

/// Randomly partitions the edges of `g` and samples fixed evaluation negatives.
pub fn make_splits(g: &Graph, ratios: SplitRatios, seed: u64) -> Result<SplitSet> {
    ratios.validate()?;
    let m = g.num_edges();
    if m < 10 {
        return Err(Error::Config(format!(
            "need at least 10 edges to split, graph has {m}"
        )));
    }
    let mut edges = g.edges().to_vec();
    edges.shuffle(&mut rng_for(seed, "splits/edges"));
    let (n_train, n_valid, _) = ratios.counts(m);
    let test_pos = edges.split_off(n_train + n_valid);
    let valid_pos = edges.split_off(n_train);
    let train_pos = edges;

    let none = HashSet::new();
    let capacity = g.num_non_edges();
    let valid_neg = sample_negatives(
        g,
        (EVAL_NEGATIVES_PER_POSITIVE * valid_pos.len()).min(capacity),
        &none,
        derive_seed(seed, "splits/valid_neg"),
    )?;
    let test_neg = sample_negatives(
        g,
        (EVAL_NEGATIVES_PER_POSITIVE * test_pos.len()).min(capacity),
        &none,
        derive_seed(seed, "splits/test_neg"),
    )?;
    Ok(SplitSet {
        train_pos,
        valid_pos,
        test_pos,
        valid_neg,
        test_neg,
        use_valid_as_message_paths: false,
    })
}

/// Samples `count` distinct unordered non-edges of `g` that avoid `exclude`.
pub fn sample_negatives(
    g: &Graph,
    count: usize,
    exclude: &HashSet<(NodeId, NodeId)>,
    seed: u64,
) -> Result<Vec<(NodeId, NodeId)>> {
    let n = g.num_nodes();
    let excluded_non_edges = exclude
        .iter()
        .map(|&(u, v)| canonical_pair(u, v))
        .filter(|&(u, v)| u != v && v < n && !g.has_edge(u, v))
        .collect::<HashSet<_>>()
        .len();
    let available = g.num_non_edges() - excluded_non_edges;
    if count > available {
        return Err(Error::Capacity {
            requested: count,
            available,
        });
    }
    let blocked = |p: (NodeId, NodeId)| {
        g.has_edge(p.0, p.1) || exclude.contains(&p) || exclude.contains(&(p.1, p.0))
    };
    let mut r = rng(seed);
    if count.saturating_mul(3) <= available {
        let mut seen = HashSet::with_capacity(count);
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let u = r.random_range(0..n);
            let v = r.random_range(0..n);
            if u == v {
                continue;
            }
            let p = canonical_pair(u, v);
            if !blocked(p) && seen.insert(p) {
                out.push(p);
            }
        }
        Ok(out)
    } else {
        let mut all: Vec<(NodeId, NodeId)> = (0..n)
            .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
            .filter(|&p| !blocked(p))
            .collect();
        let (picked, _) = all.partial_shuffle(&mut r, count);
        Ok(picked.to_vec())
    }
}

impl SplitSet {
    /// Graph that carries messages: train edges, plus valid edges when enabled.
    pub fn message_graph(&self, g: &Graph) -> Result<Graph> {
        let extra: &[(NodeId, NodeId)] = if self.use_valid_as_message_paths {
            &self.valid_pos
        } else {
            &[]
        };
        g.with_edges(self.train_pos.iter().chain(extra).copied())
    }

    /// Checks disjointness of positives and that negatives are non-edges.
    pub fn validate(&self, g: &Graph) -> Result<()> {
        let mut seen = HashSet::new();
        for (name, list) in [
            ("train_pos", &self.train_pos),
            ("valid_pos", &self.valid_pos),
            ("test_pos", &self.test_pos),
        ] {
            for &(u, v) in list.iter() {
                if !seen.insert(canonical_pair(u, v)) {
                    return Err(Error::Config(format!(
                        "edge ({u},{v}) appears twice across positive splits ({name})"
                    )));
                }
            }
        }
        for (name, list) in [("valid_neg", &self.valid_neg), ("test_neg", &self.test_neg)] {
            if let Some(&(u, v)) = list.iter().find(|&&(u, v)| g.has_edge(u, v)) {
                return Err(Error::Config(format!("{name} pair ({u},{v}) is an edge")));
            }
        }
        Ok(())
    }

    pub fn save_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (file, list) in SPLIT_FILES.iter().zip(self.lists()) {
            io::write_edge_list(dir.join(file), list)?;
        }
        Ok(())
    }

    /// Reads the five role files written by [`SplitSet::save_dir`].
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<SplitSet> {
        let dir = dir.as_ref();
        let mut lists = Vec::with_capacity(5);
        for file in SPLIT_FILES {
            let path = dir.join(file);
            let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            lists.push(io::parse_edge_list(&text, &path)?);
        }
        let mut it = lists.into_iter();
        let mut next = || it.next().expect("five lists");
        Ok(SplitSet {
            train_pos: next(),
            valid_pos: next(),
            test_pos: next(),
            valid_neg: next(),
            test_neg: next(),
            use_valid_as_message_paths: false,
        })
    }

    fn lists(&self) -> [&Vec<(NodeId, NodeId)>; 5] {
        [
            &self.train_pos,
            &self.valid_pos,
            &self.test_pos,
            &self.valid_neg,
            &self.test_neg,
        ]
    }
}
