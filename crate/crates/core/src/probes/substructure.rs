use std::sync::Arc;

use ndarray::{Array2, Axis};
use rand::seq::{IndexedRandom, SliceRandom};
use serde::{Deserialize, Serialize};

use super::{ProbeReport, ProbeScore};
use crate::error::{Error, Result};
use crate::features::{count_substructure, gen_erdos_renyi, gen_random_regular, Substructure};
use crate::graph::{k_hop_node_subgraph, Graph};
use crate::model::{propagation, Aggregator, Mpnn, MpnnConfig};
use crate::nn::{Adam, AdamConfig, Init, LrGroup, Mlp, ParamStore, Tape};
use crate::par::Exec;
use crate::render::{render, RenderStyle};
use crate::rng::{derive_seed, rng};
use crate::vsf::{EncoderArch, EncoderHandle};

/// Test MSE divided by the variance of the test labels.
pub const NMSE_CRITERION: &str = "nmse-v1";

/// Graph sizes and degrees for the random regular set.
const REGULAR_SHAPES: [(usize, usize); 4] = [(10, 6), (15, 6), (20, 5), (30, 5)];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SynthDataset {
    /// n = 10, p = 0.3.
    ErdosRenyi,
    /// (m, d) drawn uniformly from a fixed list of four shapes.
    RandomRegular,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubstructureConfig {
    pub dataset: SynthDataset,
    pub n_graphs: usize,
    pub kind: Substructure,
    pub with_vsf: bool,
    pub seeds: Vec<u64>,
    /// Seeds graph generation; shared across training seeds.
    pub data_seed: u64,
    pub aggregator: Aggregator,
    pub depth: usize,
    pub hidden: usize,
    pub decoder_hidden: usize,
    pub epochs: usize,
    pub lr: f64,
    pub weight_decay: f64,
    /// Hop scope of the per-node images.
    pub k: usize,
    pub style: RenderStyle,
    pub encoder: EncoderArch,
    pub encoder_seed: u64,
    /// Train / valid fractions; the rest is test.
    pub split: (f64, f64),
}

impl Default for SubstructureConfig {
    fn default() -> Self {
        SubstructureConfig {
            dataset: SynthDataset::ErdosRenyi,
            n_graphs: 1000,
            kind: Substructure::Triangle,
            with_vsf: false,
            seeds: vec![0, 1, 2],
            data_seed: 0,
            aggregator: Aggregator::GcnNormalizedSum,
            depth: 3,
            hidden: 32,
            decoder_hidden: 64,
            epochs: 300,
            lr: 1e-2,
            weight_decay: 0.0,
            k: 2,
            style: RenderStyle::default().with_canvas(128, 128),
            encoder: EncoderArch::convstack((128, 128), 512),
            encoder_seed: 0,
            split: (0.3, 0.2),
        }
    }
}

/// `None` when the targets have zero variance.
pub fn normalized_mse(pred: &[f64], target: &[f64]) -> Option<f64> {
    let n = target.len() as f64;
    let mean = target.iter().sum::<f64>() / n;
    let var = target.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / n;
    if target.is_empty() || var == 0.0 {
        return None;
    }
    let mse = pred.iter().zip(target).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / n;
    Some(mse / var)
}

/// Generated graphs with their substructure counts.
pub fn substructure_dataset(
    dataset: SynthDataset,
    n_graphs: usize,
    kind: Substructure,
    seed: u64,
) -> Result<Vec<(Graph, f64)>> {
    let mut shape_rng = rng(derive_seed(seed, "substructure/shapes"));
    (0..n_graphs)
        .map(|i| {
            let s = derive_seed(seed, &format!("substructure/graph/{i}"));
            let g = match dataset {
                SynthDataset::ErdosRenyi => gen_erdos_renyi(10, 0.3, s)?,
                SynthDataset::RandomRegular => {
                    let &(m, d) = REGULAR_SHAPES.choose(&mut shape_rng).expect("non-empty");
                    gen_random_regular(m, d, s)?
                }
            };
            let c = count_substructure(&g, kind) as f64;
            Ok((g, c))
        })
        .collect()
}

/// Disjoint union plus the graph index of every node.
fn disjoint_union(graphs: &[(Graph, f64)]) -> Result<(Graph, Vec<usize>)> {
    let mut edges = Vec::new();
    let mut seg = Vec::new();
    for (i, (g, _)) in graphs.iter().enumerate() {
        let off = seg.len();
        edges.extend(g.edges().iter().map(|&(u, v)| (u + off, v + off)));
        seg.extend(std::iter::repeat_n(i, g.num_nodes()));
    }
    Ok((Graph::from_edges(seg.len(), edges)?, seg))
}

/// Encodes the node-centered view of every node of every graph.
fn node_vsfs(graphs: &[(Graph, f64)], cfg: &SubstructureConfig, exec: Exec) -> Result<Array2<f64>> {
    let enc = EncoderHandle::init(cfg.encoder.clone(), cfg.encoder_seed)?;
    let views = graphs
        .iter()
        .flat_map(|(g, _)| (0..g.num_nodes()).map(move |v| k_hop_node_subgraph(g, v, cfg.k)))
        .collect::<Result<Vec<_>>>()?;
    let rows = exec.try_map(&views, |v| Ok(enc.encode_image(&render(v, &cfg.style, v.layout_seed())?)))?;
    let s = enc.output_dim();
    Ok(Array2::from_shape_fn((rows.len(), s), |(i, j)| rows[i].0[j] as f64))
}

/// Trains MPNN, per-node concatenation with VSFs, a 3-layer MLP decoder and
/// a sum over each graph's nodes. Reports best and median test normalized
/// MSE over the seeds (median = the ⌈m/2⌉-th best).
pub fn substructure_experiment(cfg: &SubstructureConfig, exec: Exec) -> Result<ProbeReport> {
    if cfg.seeds.is_empty() || cfg.n_graphs < 10 {
        return Err(Error::Config("need seeds and at least 10 graphs".into()));
    }
    let (ftr, fva) = cfg.split;
    if !(ftr > 0.0 && fva > 0.0 && ftr + fva < 1.0) {
        return Err(Error::Config(format!("bad split {:?}", cfg.split)));
    }
    let data = substructure_dataset(cfg.dataset, cfg.n_graphs, cfg.kind, cfg.data_seed)?;
    let (union, seg) = disjoint_union(&data)?;
    let prop = propagation(&union, cfg.aggregator);
    let vsf = if cfg.with_vsf { Some(node_vsfs(&data, cfg, exec)?) } else { None };
    let labels: Vec<f64> = data.iter().map(|d| d.1).collect();

    let mut report = ProbeReport::new("substructure", cfg);
    let mut scores = Vec::new();
    for &seed in &cfg.seeds {
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.shuffle(&mut rng(derive_seed(seed, "substructure/split")));
        let n_tr = (ftr * data.len() as f64).floor() as usize;
        let n_va = (fva * data.len() as f64).floor() as usize;
        let (tr, rest) = order.split_at(n_tr);
        let (va, te) = rest.split_at(n_va);
        let nmse = fit_and_test(cfg, seed, &prop, &seg, vsf.as_ref(), &labels, tr, va, te)?;
        match nmse {
            Some(v) => {
                report.scores.insert(format!("seed/{seed}"), ProbeScore::defined(v, NMSE_CRITERION));
                scores.push(v);
            }
            None => {
                report.scores.insert(
                    format!("seed/{seed}"),
                    ProbeScore::undefined(NMSE_CRITERION, "zero-variance test labels"),
                );
            }
        }
    }
    if scores.is_empty() {
        for name in ["best", "median"] {
            report
                .scores
                .insert(name.into(), ProbeScore::undefined(NMSE_CRITERION, "zero-variance test labels"));
        }
    } else {
        scores.sort_by(f64::total_cmp);
        report.scores.insert("best".into(), ProbeScore::defined(scores[0], NMSE_CRITERION));
        report
            .scores
            .insert("median".into(), ProbeScore::defined(scores[(scores.len() - 1) / 2], NMSE_CRITERION));
    }
    report.notes.push(format!(
        "{} graphs, split {:.0}/{:.0}/{:.0}, model selected on validation MSE",
        cfg.n_graphs,
        100.0 * ftr,
        100.0 * fva,
        100.0 * (1.0 - ftr - fva)
    ));
    Ok(report)
}

#[allow(clippy::too_many_arguments)]
fn fit_and_test(
    cfg: &SubstructureConfig,
    seed: u64,
    prop: &Arc<crate::nn::SpOp>,
    seg: &[usize],
    vsf: Option<&Array2<f64>>,
    labels: &[f64],
    tr: &[usize],
    va: &[usize],
    te: &[usize],
) -> Result<Option<f64>> {
    let n_graphs = labels.len();
    let mut store = ParamStore::new();
    let mut r = rng(derive_seed(seed, "substructure/init"));
    let mpnn_cfg = MpnnConfig {
        depth: cfg.depth,
        in_dim: 1,
        hidden_dim: cfg.hidden,
        aggregator: cfg.aggregator,
    };
    let mpnn = Mpnn::new(&mut store, "mpnn", &mpnn_cfg, 0, Init::Glorot, &mut r)?;
    let vis_w = vsf.map_or(0, |v| v.ncols());
    let dec = Mlp::new(
        &mut store,
        "decoder",
        &[cfg.hidden + vis_w, cfg.decoder_hidden, cfg.decoder_hidden, 1],
        Init::Glorot,
        LrGroup::Main,
        &mut r,
    )?;

    // statistics from training graphs only
    let train_mask: Vec<bool> = {
        let mut m = vec![false; n_graphs];
        tr.iter().for_each(|&i| m[i] = true);
        m
    };
    let vis = vsf.map(|v| {
        let rows: Vec<usize> = (0..seg.len()).filter(|&i| train_mask[seg[i]]).collect();
        let sub = v.select(Axis(0), &rows);
        let mean = sub.mean_axis(Axis(0)).expect("non-empty");
        let std = sub.std_axis(Axis(0), 0.0).mapv(|s| if s > 1e-12 { s } else { 1.0 });
        Arc::new((v - &mean) / &std)
    });
    let tr_labels: Vec<f64> = tr.iter().map(|&i| labels[i]).collect();
    let mu = tr_labels.iter().sum::<f64>() / tr.len() as f64;
    let sd = (tr_labels.iter().map(|t| (t - mu).powi(2)).sum::<f64>() / tr.len() as f64)
        .sqrt()
        .max(1e-12);
    let nodes_per_graph = seg.len() as f64 / n_graphs as f64;
    let z_train = Arc::new(Array2::from_shape_fn((tr.len(), 1), |(i, _)| (tr_labels[i] - mu) / sd));
    let x = Arc::new(Array2::ones((seg.len(), 1)));
    let seg = Arc::new(seg.to_vec());
    let tr_idx = Arc::new(tr.to_vec());

    // per-graph standardized prediction: sum of node outputs, scaled by 1/|V̄|
    let forward = |tape: &mut Tape, store: &ParamStore| {
        let xv = tape.constant(x.as_ref().clone());
        let y = mpnn.forward(tape, store, prop, xv);
        let h = match &vis {
            Some(v) => {
                let vv = tape.constant(v.as_ref().clone());
                tape.concat_cols(&[y, vv])
            }
            None => y,
        };
        let node_out = dec.forward(tape, store, h);
        let pooled = tape.segment_sum(node_out, seg.clone(), n_graphs);
        tape.affine(pooled, 1.0 / nodes_per_graph, 0.0)
    };
    let decode = |z: &Array2<f64>, idx: &[usize]| idx.iter().map(|&i| z[[i, 0]] * sd + mu).collect::<Vec<_>>();
    let mse = |p: &[f64], idx: &[usize]| {
        p.iter().zip(idx).map(|(p, &i)| (p - labels[i]).powi(2)).sum::<f64>() / idx.len() as f64
    };

    let mut opt = Adam::new(AdamConfig {
        lr_main: cfg.lr,
        weight_decay: cfg.weight_decay,
        ..AdamConfig::default()
    });
    let mut best = (f64::INFINITY, Vec::new());
    for epoch in 0..=cfg.epochs {
        let mut tape = Tape::new();
        let z = forward(&mut tape, &store);
        let zv = tape.value(z).clone();
        let val = mse(&decode(&zv, va), va);
        if val < best.0 {
            best = (val, decode(&zv, te));
        }
        if epoch == cfg.epochs {
            break;
        }
        let zt = tape.gather_rows(z, tr_idx.clone());
        let loss = tape.mse(zt, z_train.clone());
        let lv = tape.scalar(loss);
        if !lv.is_finite() {
            return Err(Error::Divergence(format!("substructure seed {seed}: loss {lv} at epoch {epoch}")));
        }
        let grads = tape.backward(loss);
        opt.step(&mut store, &grads);
    }
    let te_labels: Vec<f64> = te.iter().map(|&i| labels[i]).collect();
    Ok(normalized_mse(&best.1, &te_labels))
}
