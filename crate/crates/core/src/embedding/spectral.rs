//! Laplacian eigenmap embedding.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::Array2;

use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::graph::Graph;

/// Largest graph the dense eigensolver is run on.
pub const SPECTRAL_NODE_LIMIT: usize = 6000;

/// Eigenvalues at or below this are treated as zero.
const ZERO_EIGENVALUE: f64 = 1e-9;

/// `I − D^{-1/2} A D^{-1/2}`, with a zero diagonal entry for isolated nodes.
pub fn normalized_laplacian(g: &Graph) -> DMatrix<f64> {
    let n = g.n_nodes();
    let scale: Vec<f64> = (0..n)
        .map(|v| match g.degree(v) {
            0 => 0.0,
            d => 1.0 / (d as f64).sqrt(),
        })
        .collect();
    let mut l = DMatrix::zeros(n, n);
    for u in 0..n {
        if g.degree(u) > 0 {
            l[(u, u)] = 1.0;
        }
        for &v in g.neighbors(u) {
            l[(u, v)] = -scale[u] * scale[v];
        }
    }
    l
}

/// Rows of the `d` eigenvectors of the normalized Laplacian with the
/// smallest nonzero eigenvalues. Each eigenvector is signed so its first
/// nonzero entry is positive.
pub fn spectral_embedding(g: &Graph, d: usize) -> Result<EmbeddingMatrix> {
    let n = g.n_nodes();
    if d == 0 || d >= n {
        return Err(Error::Config(format!("spectral dimension {d} must lie in 1..{n}")));
    }
    if n > SPECTRAL_NODE_LIMIT {
        return Err(Error::Config(format!(
            "spectral embedding supports at most {SPECTRAL_NODE_LIMIT} nodes, graph has {n}"
        )));
    }
    let eig = SymmetricEigen::new(normalized_laplacian(g));
    let mut order: Vec<usize> = (0..n).filter(|&i| eig.eigenvalues[i] > ZERO_EIGENVALUE).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));
    if order.len() < d {
        return Err(Error::Config(format!(
            "graph has only {} nontrivial eigenpairs, {d} requested",
            order.len()
        )));
    }
    let mut out = Array2::zeros((n, d));
    for (c, &k) in order.iter().take(d).enumerate() {
        let col = eig.eigenvectors.column(k);
        let sign = col
            .iter()
            .find(|x| x.abs() > 1e-12)
            .map_or(1.0, |&x| x.signum());
        for i in 0..n {
            out[[i, c]] = sign * col[i];
        }
    }
    EmbeddingMatrix::new(out)
}
