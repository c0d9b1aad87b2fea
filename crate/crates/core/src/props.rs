//! Randomized invariants against brute-force oracles.

use std::collections::BTreeSet;

use ndarray::Array2;
use proptest::prelude::*;

use crate::features::{count_substructure, node_pe, pair_sf, PeKind, SfKind, Substructure};
use crate::graph::{k_hop_link_subgraph, k_hop_node_subgraph, make_splits, Graph, SplitRatios, UNREACHABLE};
use crate::train::{hr_at_k, mrr, mrr_shared};

fn graph_strategy() -> impl Strategy<Value = Graph> {
    (2usize..14).prop_flat_map(|n| {
        proptest::collection::vec(any::<bool>(), n * (n - 1) / 2).prop_map(move |bits| {
            let mut edges = Vec::new();
            let mut i = 0;
            for u in 0..n {
                for v in u + 1..n {
                    if bits[i] {
                        edges.push((u, v));
                    }
                    i += 1;
                }
            }
            Graph::from_edges(n, edges).unwrap()
        })
    })
}

/// Distances by repeated relaxation over the edge list.
fn relax(g: &Graph, src: &[usize]) -> Vec<usize> {
    let mut d = vec![UNREACHABLE; g.num_nodes()];
    for &s in src {
        d[s] = 0;
    }
    loop {
        let mut changed = false;
        for &(a, b) in g.edges() {
            for (x, y) in [(a, b), (b, a)] {
                if d[x] != UNREACHABLE && d[x] + 1 < d[y] {
                    d[y] = d[x] + 1;
                    changed = true;
                }
            }
        }
        if !changed {
            return d;
        }
    }
}

fn scores() -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec((0u8..8).prop_map(|x| x as f64 / 8.0), 1..40)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn link_views_match_relaxation(g in graph_strategy(), k in 1usize..=3, a in 0usize..100, b in 0usize..100, mask: bool) {
        let n = g.num_nodes();
        let (u, v) = (a % n, b % n);
        prop_assume!(u != v);
        let view = k_hop_link_subgraph(&g, u, v, k, mask).unwrap();
        let d = relax(&g, &[u, v]);
        let mut expect = vec![u, v];
        expect.extend((0..n).filter(|&x| x != u && x != v && d[x] <= k));
        prop_assert_eq!(view.nodes(), expect.as_slice());
        for (i, &x) in view.nodes().iter().enumerate() {
            prop_assert_eq!(view.hops()[i], d[x]);
        }
        let has_center = view.edges().contains(&(0, 1));
        prop_assert_eq!(has_center, g.has_edge(u, v) && !mask);
        for &(x, y) in view.edges() {
            prop_assert!(x < y);
            prop_assert!(g.has_edge(view.nodes()[x], view.nodes()[y]));
        }
    }

    #[test]
    fn node_views_grow_with_k(g in graph_strategy(), a in 0usize..100) {
        let v = a % g.num_nodes();
        let mut prev: Option<BTreeSet<usize>> = None;
        for k in 1..=3 {
            let view = k_hop_node_subgraph(&g, v, k).unwrap();
            prop_assert_eq!(view.nodes()[0], v);
            let set: BTreeSet<usize> = view.nodes().iter().copied().collect();
            prop_assert_eq!(set.len(), view.nodes().len());
            if let Some(p) = &prev {
                prop_assert!(p.is_subset(&set));
            }
            prev = Some(set);
        }
    }

    #[test]
    fn pair_features_against_brute_force(g in graph_strategy(), a in 0usize..100, b in 0usize..100) {
        let n = g.num_nodes();
        let (u, v) = (a % n, b % n);
        prop_assume!(u != v);
        let common: Vec<usize> = (0..n).filter(|&w| g.has_edge(u, w) && g.has_edge(v, w)).collect();
        prop_assert_eq!(pair_sf(&g, SfKind::CN, u, v).unwrap(), common.len() as f64);
        let ra: f64 = common.iter().map(|&w| 1.0 / g.degree(w) as f64).sum();
        prop_assert!((pair_sf(&g, SfKind::RA, u, v).unwrap() - ra).abs() < 1e-12);
        prop_assert_eq!(pair_sf(&g, SfKind::CN, u, v).unwrap(), pair_sf(&g, SfKind::CN, v, u).unwrap());
        let d = relax(&g, &[u])[v];
        let spd = pair_sf(&g, SfKind::SPD, u, v).unwrap();
        if d == UNREACHABLE {
            prop_assert!(spd.is_infinite());
        } else {
            prop_assert_eq!(spd, d as f64);
        }
    }

    #[test]
    fn substructure_counts(g in graph_strategy()) {
        let n = g.num_nodes();
        let a = Array2::from_shape_fn((n, n), |(i, j)| g.has_edge(i, j) as u8 as f64);
        let trace = a.dot(&a).dot(&a).diag().sum();
        prop_assert_eq!(count_substructure(&g, Substructure::Triangle) as f64, trace / 6.0);
        let stars: u64 = (0..n)
            .map(|v| {
                let d = g.degree(v) as u64;
                if d < 3 { 0 } else { d * (d - 1) * (d - 2) / 6 }
            })
            .sum();
        prop_assert_eq!(count_substructure(&g, Substructure::ThreeStar), stars);
    }

    #[test]
    fn hr_is_monotone_in_k(pos in scores(), neg in scores()) {
        let mut last = -1.0;
        for k in 1..=neg.len() {
            let h = hr_at_k(&pos, &neg, k).unwrap();
            prop_assert!((0.0..=1.0).contains(&h));
            prop_assert!(h >= last);
            last = h;
        }
        prop_assert!(hr_at_k(&pos, &neg, neg.len() + 1).is_err());
    }

    #[test]
    fn shared_mrr_agrees_with_per_item(pos in scores(), neg in scores()) {
        let items: Vec<(f64, &[f64])> = pos.iter().map(|&p| (p, neg.as_slice())).collect();
        let a = mrr_shared(&pos, &neg).unwrap();
        prop_assert!((a - mrr(&items).unwrap()).abs() < 1e-12);
        prop_assert!(a > 0.0 && a <= 1.0);
    }

    #[test]
    fn splits_partition_edges(seed in 0u64..1000) {
        let g = crate::features::gen_erdos_renyi(30, 0.2, seed).unwrap();
        let s = make_splits(&g, SplitRatios::default(), seed).unwrap();
        let mut all: Vec<_> = s.train_pos.iter().chain(&s.valid_pos).chain(&s.test_pos).copied().collect();
        all.sort();
        prop_assert_eq!(all.as_slice(), g.edges());
        for &(u, v) in s.valid_neg.iter().chain(&s.test_neg) {
            prop_assert!(u != v && !g.has_edge(u, v));
        }
    }
}

/// Cyclic Jacobi rotations; eigenvalues of a small symmetric matrix.
fn jacobi_eigenvalues(mut a: Array2<f64>) -> Vec<f64> {
    let n = a.nrows();
    for _ in 0..100 {
        for p in 0..n {
            for q in p + 1..n {
                if a[[p, q]].abs() < 1e-15 {
                    continue;
                }
                let theta = (a[[q, q]] - a[[p, p]]) / (2.0 * a[[p, q]]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                let mut r = Array2::<f64>::eye(n);
                r[[p, p]] = c;
                r[[q, q]] = c;
                r[[p, q]] = s;
                r[[q, p]] = -s;
                a = r.t().dot(&a).dot(&r);
            }
        }
    }
    let mut ev: Vec<f64> = a.diag().to_vec();
    ev.sort_by(f64::total_cmp);
    ev
}

#[test]
fn laplacian_pe_on_c4_matches_jacobi() {
    let g = Graph::from_edges(4, [(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap();
    let lap = Array2::from_shape_fn((4, 4), |(i, j)| {
        if i == j {
            1.0
        } else if g.has_edge(i, j) {
            -0.5
        } else {
            0.0
        }
    });
    let ev = jacobi_eigenvalues(lap.clone());
    for (a, b) in ev.iter().zip([0.0, 1.0, 1.0, 2.0]) {
        assert!((a - b).abs() < 1e-10, "{ev:?}");
    }
    let pe = node_pe(&g, PeKind::LaplacianPE, 3, None).unwrap();
    // columns are unit eigenvectors for the nonzero eigenvalues in ascending order
    for (j, &lambda) in ev[1..].iter().enumerate() {
        let col = pe.column(j).to_owned();
        let lv = lap.dot(&col);
        for i in 0..4 {
            assert!((lv[i] - lambda * col[i]).abs() < 1e-10);
        }
        assert!((col.dot(&col) - 1.0).abs() < 1e-10);
        let first = col.iter().find(|x| x.abs() > 1e-12).unwrap();
        assert!(*first > 0.0);
    }
    for a in 0..3 {
        for b in a + 1..3 {
            assert!(pe.column(a).dot(&pe.column(b)).abs() < 1e-10);
        }
    }
}
