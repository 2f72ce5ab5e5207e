//! Node features, labels and train/test/attacked splits.

use ndarray::{Array2, ArrayView2};
use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::NodeId;
use crate::sparse::CsrMatrix;

/// Per-node attribute rows. Stored sparsely since bag-of-words rows are
/// mostly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: CsrMatrix,
}

impl FeatureMatrix {
    pub fn from_dense(dense: ArrayView2<'_, f64>) -> Result<Self> {
        if dense.iter().any(|x| !x.is_finite()) {
            return Err(Error::Input("feature matrix has non-finite values".into()));
        }
        Ok(Self {
            rows: CsrMatrix::from_dense(dense),
        })
    }

    /// `entries` are `(row, col, value)`; later duplicates overwrite earlier ones.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        entries: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let mut per_row: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_rows];
        for (i, j, x) in entries {
            if i >= n_rows || j >= n_cols {
                return Err(Error::Input(format!(
                    "feature entry ({i}, {j}) outside {n_rows}x{n_cols}"
                )));
            }
            if !x.is_finite() {
                return Err(Error::Input(format!("feature entry ({i}, {j}) is not finite")));
            }
            per_row[i].push((j, x));
        }
        let mut indptr = vec![0];
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for mut row in per_row {
            row.sort_by_key(|&(j, _)| j);
            let mut last: Option<usize> = None;
            for (j, x) in row {
                if last == Some(j) {
                    *values.last_mut().unwrap() = x;
                    continue;
                }
                last = Some(j);
                indices.push(j);
                values.push(x);
            }
            // explicit zeros are not stored
            let start = *indptr.last().unwrap();
            let mut k = start;
            for r in start..indices.len() {
                if values[r] != 0.0 {
                    indices[k] = indices[r];
                    values[k] = values[r];
                    k += 1;
                }
            }
            indices.truncate(k);
            values.truncate(k);
            indptr.push(indices.len());
        }
        Ok(Self {
            rows: CsrMatrix::from_raw(n_rows, n_cols, indptr, indices, values),
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.rows.n_rows()
    }

    pub fn n_features(&self) -> usize {
        self.rows.n_cols()
    }

    pub fn as_csr(&self) -> &CsrMatrix {
        &self.rows
    }

    /// Nonzero columns and values of node `v`'s row.
    pub fn row(&self, v: NodeId) -> (&[usize], &[f64]) {
        self.rows.row(v)
    }

    pub fn to_dense(&self) -> Array2<f64> {
        self.rows.to_dense()
    }

    /// Applies a node relabeling: row `i` moves to `perm[i]`.
    pub fn permute_rows(&self, perm: &[NodeId]) -> Self {
        let mut entries = Vec::with_capacity(self.rows.nnz());
        for i in 0..self.n_nodes() {
            let (cols, vals) = self.row(i);
            entries.extend(cols.iter().zip(vals).map(|(&j, &x)| (perm[i], j, x)));
        }
        Self::from_triplets(self.n_nodes(), self.n_features(), entries)
            .expect("permuted entries stay in range")
    }
}

/// Integer class labels in `0..n_classes`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelVector {
    labels: Vec<usize>,
    n_classes: usize,
}

impl LabelVector {
    pub fn new(labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        if let Some((v, &c)) = labels.iter().enumerate().find(|(_, &c)| c >= n_classes) {
            return Err(Error::Input(format!(
                "label {c} at node {v} is outside 0..{n_classes}"
            )));
        }
        Ok(Self { labels, n_classes })
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn get(&self, v: NodeId) -> usize {
        self.labels[v]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.labels
    }

    /// Nodes of class `c`, ascending.
    pub fn members(&self, c: usize) -> Vec<NodeId> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == c)
            .map(|(v, _)| v)
            .collect()
    }
}

/// Partition of the nodes into labelled training nodes and test nodes, plus
/// the attacked subset of the test nodes. All sets are sorted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeSplit {
    pub train: Vec<NodeId>,
    pub test: Vec<NodeId>,
    pub attacked: Vec<NodeId>,
}

/// Samples `per_class` training nodes from every class, then `n_attacked`
/// targets uniformly from the remaining nodes.
pub fn sample_split<R: Rng + ?Sized>(
    labels: &LabelVector,
    per_class: usize,
    n_attacked: usize,
    rng: &mut R,
) -> Result<NodeSplit> {
    let n = labels.len();
    let mut in_train = vec![false; n];
    for c in 0..labels.n_classes() {
        let members = labels.members(c);
        if members.len() < per_class {
            return Err(Error::Config(format!(
                "class {c} has {} nodes, fewer than {per_class} per class",
                members.len()
            )));
        }
        for i in index::sample(rng, members.len(), per_class) {
            in_train[members[i]] = true;
        }
    }
    let train: Vec<_> = (0..n).filter(|&v| in_train[v]).collect();
    let test: Vec<_> = (0..n).filter(|&v| !in_train[v]).collect();
    if n_attacked > test.len() {
        return Err(Error::Config(format!(
            "cannot attack {n_attacked} nodes with only {} test nodes",
            test.len()
        )));
    }
    let mut attacked: Vec<_> = index::sample(rng, test.len(), n_attacked)
        .into_iter()
        .map(|i| test[i])
        .collect();
    attacked.sort_unstable();
    Ok(NodeSplit {
        train,
        test,
        attacked,
    })
}
