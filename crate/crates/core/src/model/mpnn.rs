use std::sync::Arc;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::nn::{glorot, Csr, Init, LrGroup, ParamId, ParamStore, SpOp, Tape, Var};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Aggregator {
    /// `D̃^{-1/2}(A+I)D̃^{-1/2}`.
    GcnNormalizedSum,
    /// Self transform plus a separately weighted neighbour mean.
    MeanSage,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MpnnConfig {
    pub depth: usize,
    pub in_dim: usize,
    /// Width of every layer, including the output (F′).
    pub hidden_dim: usize,
    pub aggregator: Aggregator,
}

impl MpnnConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.depth) {
            return Err(Error::Config(format!("MPNN depth {} outside 1..=3", self.depth)));
        }
        if self.hidden_dim == 0 {
            return Err(Error::Config("MPNN width must be positive".into()));
        }
        Ok(())
    }
}

/// Constant propagation operator for `agg` over `g`.
pub fn propagation(g: &Graph, agg: Aggregator) -> Arc<SpOp> {
    let n = g.num_nodes();
    let mut t = Vec::with_capacity(2 * g.num_edges() + n);
    match agg {
        Aggregator::GcnNormalizedSum => {
            let inv: Vec<f64> = (0..n).map(|v| 1.0 / ((g.degree(v) + 1) as f64).sqrt()).collect();
            for v in 0..n {
                t.push((v, v, inv[v] * inv[v]));
                t.extend(g.neighbors(v).iter().map(|&u| (v, u, inv[v] * inv[u])));
            }
        }
        Aggregator::MeanSage => {
            for v in 0..n {
                let d = g.degree(v);
                t.extend(g.neighbors(v).iter().map(|&u| (v, u, 1.0 / d as f64)));
            }
        }
    }
    Arc::new(SpOp::new(Csr::from_triplets(n, n, t)))
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Layer {
    w: ParamId,
    w_vis: Option<ParamId>,
    w_neigh: Option<ParamId>,
    b: ParamId,
}

/// Stack of message-passing layers; rectifier between layers, none after
/// the last.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mpnn {
    pub cfg: MpnnConfig,
    layers: Vec<Layer>,
}

impl Mpnn {
    /// `vis_in > 0` appends zero-initialized input rows to the first layer
    /// for concatenated visual features.
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        cfg: &MpnnConfig,
        vis_in: usize,
        init: Init,
        rng: &mut Rng,
    ) -> Result<Self> {
        cfg.validate()?;
        let mut layers = Vec::with_capacity(cfg.depth);
        for i in 0..cfg.depth {
            let fan_in = if i == 0 { cfg.in_dim } else { cfg.hidden_dim };
            let weight = |rng: &mut Rng| match init {
                Init::Identity => {
                    if fan_in != cfg.hidden_dim {
                        return Err(Error::Config("identity MPNN init needs in_dim == hidden_dim".into()));
                    }
                    Ok(Array2::eye(fan_in))
                }
                Init::Zero => Ok(Array2::zeros((fan_in, cfg.hidden_dim))),
                Init::Glorot => Ok(glorot(fan_in, cfg.hidden_dim, rng)),
            };
            let w = store.add(&format!("{name}.{i}.w"), weight(rng)?, LrGroup::Main)?;
            let w_neigh = match cfg.aggregator {
                Aggregator::MeanSage => Some(store.add(&format!("{name}.{i}.w_neigh"), weight(rng)?, LrGroup::Main)?),
                Aggregator::GcnNormalizedSum => None,
            };
            let w_vis = if i == 0 && vis_in > 0 {
                Some(store.add(
                    &format!("{name}.{i}.w_vis"),
                    Array2::zeros((vis_in, cfg.hidden_dim)),
                    LrGroup::Main,
                )?)
            } else {
                None
            };
            let b = store.add(&format!("{name}.{i}.b"), Array2::zeros((1, cfg.hidden_dim)), LrGroup::Main)?;
            layers.push(Layer { w, w_vis, w_neigh, b });
        }
        Ok(Mpnn { cfg: cfg.clone(), layers })
    }

    /// Input width the first layer expects, visual rows included.
    pub fn input_width(&self, store: &ParamStore) -> usize {
        let l = &self.layers[0];
        store.get(l.w).nrows() + l.w_vis.map_or(0, |v| store.get(v).nrows())
    }

    /// Visual rows of the first layer are used only when `x` is wide enough
    /// to carry them.
    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, prop: &Arc<SpOp>, x: Var) -> Var {
        let with_vis = tape.shape(x).1 > store.get(self.layers[0].w).nrows();
        let mut h = x;
        let last = self.layers.len() - 1;
        for (i, l) in self.layers.iter().enumerate() {
            let mut w = tape.param(store, l.w);
            if let Some(v) = l.w_vis.filter(|_| with_vis) {
                let v = tape.param(store, v);
                w = tape.concat_rows(&[w, v]);
            }
            let b = tape.param(store, l.b);
            let z = match l.w_neigh {
                None => {
                    let z = tape.matmul(h, w);
                    tape.spmm(prop.clone(), z)
                }
                Some(wn) => {
                    let own = tape.matmul(h, w);
                    let mean = tape.spmm(prop.clone(), h);
                    let wn = tape.param(store, wn);
                    let nb = tape.matmul(mean, wn);
                    tape.add(own, nb)
                }
            };
            h = tape.add_row(z, b);
            if i < last {
                h = tape.relu(h);
            }
        }
        h
    }
}

/// Checks the feature matrix against the graph and configuration.
pub fn check_features(g: &Graph, x: &Array2<f64>, in_dim: usize) -> Result<()> {
    if x.nrows() != g.num_nodes() {
        return Err(Error::arg(format!(
            "feature matrix has {} rows for {} nodes",
            x.nrows(),
            g.num_nodes()
        )));
    }
    if x.ncols() != in_dim {
        return Err(Error::arg(format!(
            "feature matrix has {} columns, model expects {in_dim}",
            x.ncols()
        )));
    }
    Ok(())
}

/// Stored features, or a constant column for featureless graphs.
pub fn node_features(g: &Graph) -> Array2<f64> {
    g.features()
        .cloned()
        .unwrap_or_else(|| Array2::ones((g.num_nodes(), 1)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng;
    use ndarray::array;

    fn run(g: &Graph, x: Array2<f64>, cfg: MpnnConfig, init: Init) -> Array2<f64> {
        let mut s = ParamStore::new();
        let m = Mpnn::new(&mut s, "mpnn", &cfg, 0, init, &mut rng(0)).unwrap();
        let mut t = Tape::new();
        let xv = t.constant(x);
        let y = m.forward(&mut t, &s, &propagation(g, cfg.aggregator), xv);
        t.value(y).clone()
    }

    fn cfg(depth: usize, dim: usize, aggregator: Aggregator) -> MpnnConfig {
        MpnnConfig {
            depth,
            in_dim: dim,
            hidden_dim: dim,
            aggregator,
        }
    }

    #[test]
    fn isolated_node_keeps_its_row() {
        let g = Graph::empty(1);
        let x = array![[0.3, -1.2]];
        let y = run(&g, x.clone(), cfg(1, 2, Aggregator::GcnNormalizedSum), Init::Identity);
        assert_eq!(y, x);
    }

    #[test]
    fn two_node_gcn_averages() {
        let g = Graph::from_edges(2, [(0, 1)]).unwrap();
        let y = run(&g, Array2::eye(2), cfg(1, 2, Aggregator::GcnNormalizedSum), Init::Identity);
        for (a, b) in y.row(0).iter().zip([0.5, 0.5]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn vertex_transitive_rows_agree() {
        let g = Graph::from_edges(6, (0..6).map(|i| (i, (i + 1) % 6))).unwrap();
        for agg in [Aggregator::GcnNormalizedSum, Aggregator::MeanSage] {
            let c = MpnnConfig {
                depth: 3,
                in_dim: 1,
                hidden_dim: 8,
                aggregator: agg,
            };
            let y = run(&g, Array2::ones((6, 1)), c, Init::Glorot);
            for r in 1..6 {
                for j in 0..8 {
                    assert!((y[[r, j]] - y[[0, j]]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn sage_mean_ignores_degree_scale() {
        let g = Graph::from_edges(3, [(0, 1), (0, 2)]).unwrap();
        let op = propagation(&g, Aggregator::MeanSage);
        let y = op.fwd.matmul(&array![[0.0], [2.0], [4.0]]);
        assert_eq!(y, array![[3.0], [0.0], [0.0]]);
    }

    #[test]
    fn depth_bounds() {
        let mut s = ParamStore::new();
        assert!(Mpnn::new(&mut s, "m", &cfg(4, 2, Aggregator::MeanSage), 0, Init::Glorot, &mut rng(0)).is_err());
    }
}
