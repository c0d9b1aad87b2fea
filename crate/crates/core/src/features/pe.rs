use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::Array2;

use super::PeKind;
use crate::error::{Error, Result};
use crate::graph::{Graph, UNREACHABLE};

/// Anchor distances are clamped to this value (also used for unreachable).
pub const DISTANCE_CAP: usize = 10;

const ZERO_EIGENVALUE_TOL: f64 = 1e-8;

/// Per-node positional encoding, `n × dim`.
///
/// `coords` is required for [`PeKind::ImageCoords2D`]: one normalized
/// `(x, y)` per node, as produced by the renderer's layout.
pub fn node_pe(
    g: &Graph,
    kind: PeKind,
    dim: usize,
    coords: Option<&[(f64, f64)]>,
) -> Result<Array2<f64>> {
    let n = g.num_nodes();
    if dim == 0 {
        return Err(Error::arg("encoding dimension must be positive"));
    }
    match kind {
        PeKind::DegreeCentrality => Ok(Array2::from_shape_fn((n, dim), |(v, _)| g.degree(v) as f64)),
        PeKind::DistanceVector => distance_vector(g, dim),
        PeKind::LaplacianPE => laplacian_pe(g, dim),
        PeKind::ImageCoords2D => {
            let coords = coords.ok_or_else(|| Error::arg("ImageCoords2D needs a layout"))?;
            if coords.len() != n || dim != 2 {
                return Err(Error::arg(format!(
                    "ImageCoords2D needs {n} coordinates and dim = 2 (got {}, {dim})",
                    coords.len()
                )));
            }
            Ok(Array2::from_shape_fn((n, 2), |(v, c)| {
                let (x, y) = coords[v];
                if c == 0 { x } else { y }.clamp(0.0, 1.0)
            }))
        }
    }
}

/// Anchors are the `dim` highest-degree nodes, ties broken by id.
fn distance_vector(g: &Graph, dim: usize) -> Result<Array2<f64>> {
    let n = g.num_nodes();
    if dim > n {
        return Err(Error::arg(format!("{dim} anchors requested from {n} nodes")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&v| (std::cmp::Reverse(g.degree(v)), v));
    let mut out = Array2::zeros((n, dim));
    for (j, &anchor) in order[..dim].iter().enumerate() {
        for (v, d) in g.bfs(anchor).into_iter().enumerate() {
            let d = if d == UNREACHABLE { DISTANCE_CAP } else { d.min(DISTANCE_CAP) };
            out[[v, j]] = d as f64;
        }
    }
    Ok(out)
}

/// Eigenvectors of `I - D^{-1/2} A D^{-1/2}` for the `dim` smallest nonzero
/// eigenvalues. Each vector's sign is fixed so its first nonzero entry is
/// positive; missing columns (too few nonzero eigenvalues) are zero.
fn laplacian_pe(g: &Graph, dim: usize) -> Result<Array2<f64>> {
    let n = g.num_nodes();
    if dim >= n {
        return Err(Error::arg(format!(
            "Laplacian encoding needs dim < n (dim = {dim}, n = {n})"
        )));
    }
    let inv_sqrt: Vec<f64> = (0..n)
        .map(|v| match g.degree(v) {
            0 => 0.0,
            d => 1.0 / (d as f64).sqrt(),
        })
        .collect();
    let mut lap = DMatrix::<f64>::zeros(n, n);
    for v in 0..n {
        if g.degree(v) > 0 {
            lap[(v, v)] = 1.0;
        }
    }
    for &(u, v) in g.edges() {
        let w = -inv_sqrt[u] * inv_sqrt[v];
        lap[(u, v)] = w;
        lap[(v, u)] = w;
    }
    let eig = SymmetricEigen::new(lap);
    let mut idx: Vec<usize> = (0..n)
        .filter(|&i| eig.eigenvalues[i] > ZERO_EIGENVALUE_TOL)
        .collect();
    idx.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .total_cmp(&eig.eigenvalues[b])
            .then(a.cmp(&b))
    });
    let mut out = Array2::zeros((n, dim));
    for (j, &i) in idx.iter().take(dim).enumerate() {
        let col = eig.eigenvectors.column(i);
        let sign = col
            .iter()
            .find(|x| x.abs() > 1e-12)
            .map_or(1.0, |x| x.signum());
        for v in 0..n {
            out[[v, j]] = sign * col[v];
        }
    }
    Ok(out)
}
