//! Undirected simple graphs in CSR form, the renormalized propagation
//! operator, and neighborhood queries.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

pub type NodeId = usize;

/// Undirected, unweighted simple graph. Every edge is stored in both
/// endpoint rows; neighbor lists are sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n_nodes: usize,
    indptr: Vec<usize>,
    indices: Vec<NodeId>,
}

/// Input edges that were discarded while building a graph.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildStats {
    pub duplicates_dropped: usize,
    pub self_loops_dropped: usize,
}

impl Graph {
    /// Graph with `n_nodes` isolated nodes.
    pub fn empty(n_nodes: usize) -> Self {
        Self {
            n_nodes,
            indptr: vec![0; n_nodes + 1],
            indices: Vec::new(),
        }
    }

    /// Builds a simple graph from an edge list. Direction is ignored,
    /// duplicates and self-loops are dropped and counted.
    pub fn from_edges(n_nodes: usize, edges: &[(NodeId, NodeId)]) -> Result<(Self, BuildStats)> {
        let mut stats = BuildStats::default();
        let mut pairs = Vec::with_capacity(edges.len());
        for &(u, v) in edges {
            if u >= n_nodes || v >= n_nodes {
                return Err(Error::Input(format!(
                    "edge ({u}, {v}) has an endpoint outside 0..{n_nodes}"
                )));
            }
            if u == v {
                stats.self_loops_dropped += 1;
                continue;
            }
            pairs.push((u.min(v), u.max(v)));
        }
        pairs.sort_unstable();
        let before = pairs.len();
        pairs.dedup();
        stats.duplicates_dropped = before - pairs.len();
        Ok((Self::from_unique_pairs(n_nodes, &pairs), stats))
    }

    /// `pairs` must be unique, loop-free and in range.
    fn from_unique_pairs(n_nodes: usize, pairs: &[(NodeId, NodeId)]) -> Self {
        let mut degree = vec![0usize; n_nodes];
        for &(u, v) in pairs {
            degree[u] += 1;
            degree[v] += 1;
        }
        let mut indptr = Vec::with_capacity(n_nodes + 1);
        indptr.push(0);
        for d in &degree {
            indptr.push(indptr.last().unwrap() + d);
        }
        let mut fill = indptr[..n_nodes].to_vec();
        let mut indices = vec![0; indptr[n_nodes]];
        for &(u, v) in pairs {
            indices[fill[u]] = v;
            fill[u] += 1;
            indices[fill[v]] = u;
            fill[v] += 1;
        }
        for i in 0..n_nodes {
            indices[indptr[i]..indptr[i + 1]].sort_unstable();
        }
        Self {
            n_nodes,
            indptr,
            indices,
        }
    }

    /// Builds a graph from per-node sorted neighbor lists that are already
    /// symmetric and loop-free.
    pub(crate) fn from_adjacency_lists(lists: &[Vec<NodeId>]) -> Self {
        let mut indptr = Vec::with_capacity(lists.len() + 1);
        indptr.push(0);
        let mut indices = Vec::with_capacity(lists.iter().map(Vec::len).sum());
        for row in lists {
            indices.extend_from_slice(row);
            indptr.push(indices.len());
        }
        Self {
            n_nodes: lists.len(),
            indptr,
            indices,
        }
    }

    pub(crate) fn to_adjacency_lists(&self) -> Vec<Vec<NodeId>> {
        (0..self.n_nodes).map(|v| self.neighbors(v).to_vec()).collect()
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    /// Number of undirected edges.
    pub fn n_edges(&self) -> usize {
        self.indices.len() / 2
    }

    pub fn degree(&self, v: NodeId) -> usize {
        self.indptr[v + 1] - self.indptr[v]
    }

    pub fn neighbors(&self, v: NodeId) -> &[NodeId] {
        &self.indices[self.indptr[v]..self.indptr[v + 1]]
    }

    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        self.neighbors(u).binary_search(&v).is_ok()
    }

    /// Each undirected edge once, as `(u, v)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        (0..self.n_nodes).flat_map(move |u| {
            self.neighbors(u)
                .iter()
                .copied()
                .filter(move |&v| v > u)
                .map(move |v| (u, v))
        })
    }

    /// Checks symmetry, absence of loops and parallel edges, and index range.
    pub fn validate(&self) -> Result<()> {
        for u in 0..self.n_nodes {
            let row = self.neighbors(u);
            for w in row.windows(2) {
                if w[0] >= w[1] {
                    return Err(Error::Input(format!(
                        "row {u} is unsorted or has a parallel edge"
                    )));
                }
            }
            for &v in row {
                if v >= self.n_nodes {
                    return Err(Error::Input(format!("edge ({u}, {v}) out of range")));
                }
                if v == u {
                    return Err(Error::Input(format!("self-loop at {u}")));
                }
                if !self.has_edge(v, u) {
                    return Err(Error::Input(format!("edge ({u}, {v}) is not mirrored")));
                }
            }
        }
        Ok(())
    }

    /// Applies a node relabeling: node `i` becomes `perm[i]`.
    pub fn permute(&self, perm: &[NodeId]) -> Self {
        assert_eq!(perm.len(), self.n_nodes);
        let pairs: Vec<_> = self
            .edges()
            .map(|(u, v)| (perm[u].min(perm[v]), perm[u].max(perm[v])))
            .collect();
        Self::from_unique_pairs(self.n_nodes, &pairs)
    }

    /// All nodes within `hops` shortest-path steps of `v`, including `v`, sorted.
    pub fn l_hop_neighborhood(&self, v: NodeId, hops: usize) -> Vec<NodeId> {
        let mut dist = vec![usize::MAX; self.n_nodes];
        let mut queue = VecDeque::new();
        let mut reached = vec![v];
        dist[v] = 0;
        queue.push_back(v);
        while let Some(u) = queue.pop_front() {
            if dist[u] == hops {
                continue;
            }
            for &w in self.neighbors(u) {
                if dist[w] == usize::MAX {
                    dist[w] = dist[u] + 1;
                    reached.push(w);
                    queue.push_back(w);
                }
            }
        }
        reached.sort_unstable();
        reached
    }
}

/// `D̃^{-1/2} (A + I) D̃^{-1/2}` where `D̃` is the degree matrix of `A + I`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedAdjacency {
    matrix: CsrMatrix,
}

impl NormalizedAdjacency {
    pub fn new(g: &Graph) -> Self {
        let n = g.n_nodes();
        let inv_sqrt: Vec<f64> = (0..n).map(|v| renormalized_scale(g.degree(v))).collect();
        let mut indptr = Vec::with_capacity(n + 1);
        let mut indices = Vec::with_capacity(2 * g.n_edges() + n);
        let mut values = Vec::with_capacity(indices.capacity());
        indptr.push(0);
        for u in 0..n {
            let mut self_done = false;
            for &v in g.neighbors(u) {
                if !self_done && v > u {
                    indices.push(u);
                    values.push(inv_sqrt[u] * inv_sqrt[u]);
                    self_done = true;
                }
                indices.push(v);
                values.push(inv_sqrt[u] * inv_sqrt[v]);
            }
            if !self_done {
                indices.push(u);
                values.push(inv_sqrt[u] * inv_sqrt[u]);
            }
            indptr.push(indices.len());
        }
        Self {
            matrix: CsrMatrix::from_raw(n, n, indptr, indices, values),
        }
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn get(&self, i: NodeId, j: NodeId) -> f64 {
        self.matrix.get(i, j)
    }

    pub fn n_nodes(&self) -> usize {
        self.matrix.n_rows()
    }
}

/// `1 / sqrt(d + 1)`, the per-node scale of the renormalized operator.
pub fn renormalized_scale(degree: usize) -> f64 {
    1.0 / ((degree + 1) as f64).sqrt()
}

/// Entry `(u, w)` of the normalized operator for an edge or diagonal entry,
/// using full-graph degrees.
#[inline]
pub fn normalized_entry(g: &Graph, u: NodeId, w: NodeId) -> f64 {
    renormalized_scale(g.degree(u)) * renormalized_scale(g.degree(w))
}
