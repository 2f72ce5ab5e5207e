#![allow(dead_code)]

pub mod dice;
pub mod linkpred;
pub mod pipeline;
pub mod wilcoxon;

use std::collections::BTreeSet;
use std::path::PathBuf;

use gcnshield_core::dataset::{load_dataset, read_bundle, Dataset};
use gcnshield_core::{FeatureMatrix, Graph, LabelVector};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Erdős–Rényi graph with edge probability `p`.
pub fn random_graph(n: usize, p: f64, rng: &mut impl Rng) -> Graph {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            if rng.random_bool(p) {
                edges.push((u, v));
            }
        }
    }
    Graph::from_edges(n, &edges).unwrap().0
}

pub fn random_labels(n: usize, c: usize, rng: &mut impl Rng) -> LabelVector {
    LabelVector::new((0..n).map(|_| rng.random_range(0..c)).collect(), c).unwrap()
}

/// Sparse non-negative features, about a third of entries nonzero.
pub fn random_features(n: usize, f: usize, rng: &mut impl Rng) -> FeatureMatrix {
    let dense = Array2::from_shape_fn((n, f), |_| {
        if rng.random_bool(0.35) {
            rng.random_range(0.1..1.0)
        } else {
            0.0
        }
    });
    FeatureMatrix::from_dense(dense.view()).unwrap()
}

pub fn dense_adjacency(g: &Graph) -> Array2<f64> {
    let n = g.n_nodes();
    let mut a = Array2::zeros((n, n));
    for (u, v) in g.edges() {
        a[[u, v]] = 1.0;
        a[[v, u]] = 1.0;
    }
    a
}

/// `D̃^{-1/2} (A + I) D̃^{-1/2}` computed densely.
pub fn dense_normalized(g: &Graph) -> Array2<f64> {
    let n = g.n_nodes();
    let mut a = dense_adjacency(g);
    for i in 0..n {
        a[[i, i]] += 1.0;
    }
    let d: Vec<f64> = (0..n).map(|i| a.row(i).sum()).collect();
    Array2::from_shape_fn((n, n), |(i, j)| a[[i, j]] / (d[i] * d[j]).sqrt())
}

pub fn dense_softmax_rows(mut z: Array2<f64>) -> Array2<f64> {
    for mut row in z.rows_mut() {
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - m).exp());
        let s = row.sum();
        row.mapv_inplace(|v| v / s);
    }
    z
}

/// Dense two-layer forward pass.
pub fn dense_forward(a: &Array2<f64>, x: &Array2<f64>, w0: &Array2<f64>, w1: &Array2<f64>) -> Array2<f64> {
    let h = a.dot(&x.dot(w0)).mapv(|v| v.max(0.0));
    dense_softmax_rows(a.dot(&h.dot(w1)))
}

pub fn edge_set(g: &Graph) -> BTreeSet<(usize, usize)> {
    g.edges().collect()
}

/// Directory holding `<name>` data, from `GCNSHIELD_DATA`.
pub fn data_root() -> Option<PathBuf> {
    std::env::var_os("GCNSHIELD_DATA").map(PathBuf::from)
}

/// Loads a dataset from `$GCNSHIELD_DATA/<name>`, which may be a prepared
/// bundle or hold the raw `<name>.content` / `<name>.cites` files.
pub fn load_named(name: &str) -> Result<Dataset, String> {
    let root = data_root().ok_or_else(|| "GCNSHIELD_DATA is not set".to_string())?;
    let dir = root.join(name);
    if dir.join("meta.json").exists() {
        return read_bundle(&dir).map_err(|e| e.to_string());
    }
    let content = dir.join(format!("{name}.content"));
    let cites = dir.join(format!("{name}.cites"));
    if content.exists() && cites.exists() {
        return load_dataset(&content, &cites).map_err(|e| e.to_string());
    }
    Err(format!("no bundle or raw files for `{name}` under {}", root.display()))
}
