use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::graph::{canonical_pair, Graph};
use crate::rng::rng;

const REGULAR_MAX_ATTEMPTS: usize = 10_000;

/// G(n, p): each of the `n(n-1)/2` pairs is an edge independently with probability `p`.
pub fn gen_erdos_renyi(n: usize, p: f64, seed: u64) -> Result<Graph> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::arg(format!("edge probability {p} outside [0,1]")));
    }
    let mut r = rng(seed);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if r.random::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    Graph::from_edges(n, edges)
}

/// Random `d`-regular graph on `m` nodes via the pairing model, rejecting
/// pairings with loops or repeated edges. Dense degrees are drawn as the
/// complement of a sparse regular graph, where rejection rarely triggers.
pub fn gen_random_regular(m: usize, d: usize, seed: u64) -> Result<Graph> {
    if d >= m || (m * d) % 2 != 0 {
        return Err(Error::arg(format!(
            "no simple {d}-regular graph on {m} nodes (need d < m and m·d even)"
        )));
    }
    let dc = m - 1 - d;
    if dc < d {
        let sparse = pairing_model(m, dc, seed)?;
        let edges = (0..m)
            .flat_map(|u| (u + 1..m).map(move |v| (u, v)))
            .filter(|&(u, v)| !sparse.has_edge(u, v));
        return Graph::from_edges(m, edges);
    }
    pairing_model(m, d, seed)
}

fn pairing_model(m: usize, d: usize, seed: u64) -> Result<Graph> {
    let mut r = rng(seed);
    for _ in 0..REGULAR_MAX_ATTEMPTS {
        if let Some(edges) = try_pairing(m, d, &mut r) {
            return Graph::from_edges(m, edges);
        }
    }
    Err(Error::Config(format!(
        "pairing model found no simple {d}-regular graph on {m} nodes in {REGULAR_MAX_ATTEMPTS} attempts"
    )))
}

/// One pass of stub matching. Clashing pairs go back into the pool and are
/// reshuffled until the pool empties or no legal pair remains.
fn try_pairing(m: usize, d: usize, r: &mut crate::rng::Rng) -> Option<Vec<(usize, usize)>> {
    let mut edges = BTreeSet::new();
    let mut stubs: Vec<usize> = (0..m).flat_map(|v| std::iter::repeat_n(v, d)).collect();
    while !stubs.is_empty() {
        stubs.shuffle(r);
        let mut leftover: BTreeMap<usize, usize> = BTreeMap::new();
        for c in stubs.chunks_exact(2) {
            let (a, b) = canonical_pair(c[0], c[1]);
            if a == b || !edges.insert((a, b)) {
                *leftover.entry(a).or_default() += 1;
                *leftover.entry(b).or_default() += 1;
            }
        }
        let open: Vec<usize> = leftover.keys().copied().collect();
        let legal = open.is_empty()
            || open
                .iter()
                .enumerate()
                .any(|(i, &a)| open[i + 1..].iter().any(|&b| !edges.contains(&(a, b))));
        if !legal {
            return None;
        }
        stubs = leftover
            .into_iter()
            .flat_map(|(v, c)| std::iter::repeat_n(v, c))
            .collect();
    }
    Some(edges.into_iter().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn er_extremes() {
        assert_eq!(gen_erdos_renyi(7, 0.0, 1).unwrap().num_edges(), 0);
        assert_eq!(gen_erdos_renyi(7, 1.0, 1).unwrap().num_edges(), 21);
        assert!(gen_erdos_renyi(7, 1.5, 1).is_err());
    }

    #[test]
    fn er_deterministic() {
        assert_eq!(
            gen_erdos_renyi(10, 0.3, 42).unwrap(),
            gen_erdos_renyi(10, 0.3, 42).unwrap()
        );
    }

    #[test]
    fn regular_degrees() {
        for &(m, d) in &[(10, 6), (15, 6), (20, 5), (30, 5)] {
            let g = gen_random_regular(m, d, 3).unwrap();
            assert!((0..m).all(|v| g.degree(v) == d), "({m},{d})");
        }
        assert!(gen_random_regular(5, 3, 0).is_err());
        assert!(gen_random_regular(4, 4, 0).is_err());
    }
}
