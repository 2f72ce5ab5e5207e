//! Node embeddings, pairwise embedding distances and nearest-node selection.

mod gvae;
mod spectral;

pub use gvae::{GvaeConfig, GvaeEpoch, GvaeGradients, GvaeLog, GvaeModel, GvaeObjective, GvaeProblem};
pub use spectral::{normalized_laplacian, spectral_embedding};

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::NodeId;

/// Which embedder produced an [`EmbeddingMatrix`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Embedder {
    Gvae,
    Spectral,
}

impl fmt::Display for Embedder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Embedder::Gvae => "gvae",
            Embedder::Spectral => "spectral",
        })
    }
}

impl FromStr for Embedder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gvae" => Ok(Embedder::Gvae),
            "spectral" => Ok(Embedder::Spectral),
            other => Err(Error::Config(format!("unknown embedder `{other}`"))),
        }
    }
}

/// `N × d` matrix whose row `i` is the embedding of node `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    values: Array2<f64>,
}

impl EmbeddingMatrix {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if values.iter().any(|x| !x.is_finite()) {
            return Err(Error::Input("embedding has non-finite entries".into()));
        }
        Ok(Self { values })
    }

    pub fn n_nodes(&self) -> usize {
        self.values.nrows()
    }

    pub fn dim(&self) -> (usize, usize) {
        self.values.dim()
    }

    pub fn row(&self, i: NodeId) -> ArrayView1<'_, f64> {
        self.values.row(i)
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn distance(&self, i: NodeId, j: NodeId) -> f64 {
        euclidean(self.row(i), self.row(j))
    }
}

/// `‖a − b‖₂`. Exactly symmetric in its arguments.
pub fn euclidean(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Graphs up to this size get a fully materialized distance matrix.
pub const DENSE_DISTANCE_LIMIT: usize = 8192;

/// Pairwise Euclidean distances between embeddings. Small graphs store the
/// full matrix; larger ones compute rows on demand with the same formula.
#[derive(Debug, Clone)]
pub enum DistanceMatrix {
    Dense { n: usize, values: Vec<f64> },
    OnDemand(EmbeddingMatrix),
}

impl DistanceMatrix {
    pub fn new(emb: &EmbeddingMatrix) -> Self {
        if emb.n_nodes() <= DENSE_DISTANCE_LIMIT {
            Self::dense(emb)
        } else {
            Self::OnDemand(emb.clone())
        }
    }

    pub fn dense(emb: &EmbeddingMatrix) -> Self {
        let n = emb.n_nodes();
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = emb.distance(i, j);
                values[i * n + j] = d;
                values[j * n + i] = d;
            }
        }
        Self::Dense { n, values }
    }

    pub fn on_demand(emb: &EmbeddingMatrix) -> Self {
        Self::OnDemand(emb.clone())
    }

    pub fn n_nodes(&self) -> usize {
        match self {
            Self::Dense { n, .. } => *n,
            Self::OnDemand(e) => e.n_nodes(),
        }
    }

    pub fn get(&self, i: NodeId, j: NodeId) -> f64 {
        match self {
            Self::Dense { n, values } => values[i * n + j],
            Self::OnDemand(e) => {
                if i == j {
                    0.0
                } else {
                    e.distance(i, j)
                }
            }
        }
    }

    pub fn row(&self, i: NodeId) -> Vec<f64> {
        match self {
            Self::Dense { n, values } => values[i * n..(i + 1) * n].to_vec(),
            Self::OnDemand(_) => (0..self.n_nodes()).map(|j| self.get(i, j)).collect(),
        }
    }
}

/// The `p` nodes closest to `v`, nearest first, ties broken by ascending
/// node index. `v` itself is never returned.
pub fn top_p_similar(d: &DistanceMatrix, v: NodeId, p: usize) -> Result<Vec<NodeId>> {
    top_p_similar_filtered(d, v, p, |_| true)
}

/// As [`top_p_similar`], restricted to nodes accepted by `keep`.
pub fn top_p_similar_filtered(
    d: &DistanceMatrix,
    v: NodeId,
    p: usize,
    keep: impl Fn(NodeId) -> bool,
) -> Result<Vec<NodeId>> {
    let n = d.n_nodes();
    if v >= n {
        return Err(Error::Input(format!("node {v} out of range")));
    }
    let row = d.row(v);
    let mut cand: Vec<(f64, NodeId)> = (0..n)
        .filter(|&k| k != v && keep(k))
        .map(|k| (row[k], k))
        .collect();
    if p > cand.len() || p >= n {
        return Err(Error::Config(format!(
            "p = {p} exceeds the {} available nodes",
            cand.len()
        )));
    }
    let order = |a: &(f64, NodeId), b: &(f64, NodeId)| -> Ordering { a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)) };
    if p < cand.len() && p > 0 {
        cand.select_nth_unstable_by(p - 1, order);
    }
    cand.truncate(p);
    cand.sort_unstable_by(order);
    Ok(cand.into_iter().map(|(_, k)| k).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn dense_from(rows: Vec<Vec<f64>>) -> DistanceMatrix {
        let n = rows.len();
        DistanceMatrix::Dense {
            n,
            values: rows.into_iter().flatten().collect(),
        }
    }

    #[test]
    fn three_four_five() {
        let e = EmbeddingMatrix::new(array![[0.0, 0.0], [3.0, 4.0]]).unwrap();
        let d = DistanceMatrix::new(&e);
        assert_eq!(d.get(0, 1), 5.0);
        assert_eq!(d.get(1, 0), 5.0);
        assert_eq!(d.get(0, 0), 0.0);
    }

    #[test]
    fn identical_rows_give_zero_matrix() {
        let e = EmbeddingMatrix::new(array![[1.5, -2.0], [1.5, -2.0], [1.5, -2.0]]).unwrap();
        let d = DistanceMatrix::new(&e);
        for i in 0..3 {
            assert!(d.row(i).iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn top_p_examples() {
        let d = dense_from(vec![
            vec![0.0, 0.2, 0.1, 0.5],
            vec![0.2, 0.0, 0.3, 0.3],
            vec![0.1, 0.3, 0.0, 0.4],
            vec![0.5, 0.3, 0.4, 0.0],
        ]);
        assert_eq!(top_p_similar(&d, 0, 2).unwrap(), vec![2, 1]);
        assert_eq!(top_p_similar(&d, 0, 3).unwrap(), vec![2, 1, 3]);
        assert!(matches!(top_p_similar(&d, 0, 4), Err(Error::Config(_))));

        let flat = dense_from(vec![vec![0.0; 5]; 5]);
        assert_eq!(top_p_similar(&flat, 2, 3).unwrap(), vec![0, 1, 3]);
        assert_eq!(
            top_p_similar_filtered(&flat, 2, 2, |k| k != 0).unwrap(),
            vec![1, 3]
        );
    }

    #[test]
    fn embedder_names() {
        assert_eq!("gvae".parse::<Embedder>().unwrap(), Embedder::Gvae);
        assert_eq!(Embedder::Spectral.to_string(), "spectral");
        assert!("node2vec".parse::<Embedder>().is_err());
    }
}
