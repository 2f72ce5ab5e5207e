//! Node-copying correction for attacked nodes, and the two ablations.
//!
//! For an attacked node `v`, its features are placed at each of the `p`
//! nodes nearest to it in embedding space and the trained classifier is
//! evaluated there; the softmax outputs are averaged. The copy is virtual:
//! node `k` reads row `v` of `X` during a 2-hop local forward pass around `k`.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::FeatureMatrix;
use crate::embedding::{top_p_similar_filtered, DistanceMatrix};
use crate::error::{Error, Result};
use crate::gcn::{argmax, mean_rows, GcnModel, SoftmaxOutput};
use crate::graph::{Graph, NodeId, NormalizedAdjacency};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DefenseConfig {
    /// Number of donor positions per attacked node.
    pub p: usize,
    /// Skip donors that are themselves attacked.
    pub exclude_attacked_donors: bool,
    /// Weight donors by inverse embedding distance instead of a plain mean.
    pub distance_weighted: bool,
}

impl Default for DefenseConfig {
    fn default() -> Self {
        Self {
            p: 10,
            exclude_attacked_donors: false,
            distance_weighted: false,
        }
    }
}

/// Softmax at node `k` after replacing the features of `k` with those of `v`.
pub fn copy_and_predict(m: &GcnModel, g: &Graph, x: &FeatureMatrix, v: NodeId, k: NodeId) -> Vec<f64> {
    m.predict_node_with_rows(g, x, k, |u| if u == k { v } else { u })
}

/// Plurality vote over class indices; ties are settled uniformly at random.
pub fn majority_vote<R: Rng + ?Sized>(votes: &[usize], n_classes: usize, rng: &mut R) -> usize {
    let mut counts = vec![0usize; n_classes];
    for &c in votes {
        counts[c] += 1;
    }
    let top = counts.iter().copied().max().unwrap_or(0);
    let leaders: Vec<usize> = (0..n_classes).filter(|&c| counts[c] == top).collect();
    if leaders.len() == 1 {
        leaders[0]
    } else {
        leaders[rng.random_range(0..leaders.len())]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CopyPrediction {
    pub node: NodeId,
    pub donors: Vec<NodeId>,
    pub distances: Vec<f64>,
    /// `ŷ_{v→k}` for each donor `k`, in donor order.
    pub donor_outputs: Vec<Vec<f64>>,
    pub aggregate: Vec<f64>,
    pub predicted: usize,
}

impl CopyPrediction {
    pub fn donor_votes(&self) -> Vec<usize> {
        self.donor_outputs
            .iter()
            .map(|o| argmax(o.iter().copied()))
            .collect()
    }

    pub fn audit(&self) -> CorrectionAudit {
        let votes = self.donor_votes();
        CorrectionAudit {
            node: self.node,
            donors: self
                .donors
                .iter()
                .zip(&self.distances)
                .zip(votes)
                .map(|((&node, &distance), argmax)| DonorAudit {
                    node,
                    distance,
                    argmax,
                })
                .collect(),
            aggregate: self.aggregate.clone(),
            label: self.predicted,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DonorAudit {
    pub node: NodeId,
    pub distance: f64,
    pub argmax: usize,
}

/// Per-node record written for the report command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectionAudit {
    pub node: NodeId,
    pub donors: Vec<DonorAudit>,
    pub aggregate: Vec<f64>,
    pub label: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    Average,
    Vote,
}

#[derive(Debug, Clone, PartialEq)]
pub enum NoCopyOutput {
    Probabilities(Vec<f64>),
    Class(usize),
}

impl NoCopyOutput {
    pub fn class(&self) -> usize {
        match self {
            NoCopyOutput::Probabilities(p) => argmax(p.iter().copied()),
            NoCopyOutput::Class(c) => *c,
        }
    }
}

/// Everything the correction needs, borrowed from a finished training run.
pub struct NodeCopying<'a> {
    model: &'a GcnModel,
    graph: &'a Graph,
    features: &'a FeatureMatrix,
    distances: &'a DistanceMatrix,
    base: SoftmaxOutput,
    config: DefenseConfig,
    attacked: Vec<NodeId>,
}

impl<'a> NodeCopying<'a> {
    pub fn new(
        model: &'a GcnModel,
        graph: &'a Graph,
        features: &'a FeatureMatrix,
        distances: &'a DistanceMatrix,
        config: DefenseConfig,
    ) -> Result<Self> {
        let base = model.forward(&NormalizedAdjacency::new(graph), features)?;
        Self::with_base(model, graph, features, distances, base, config)
    }

    /// Reuses an already computed full-graph prediction.
    pub fn with_base(
        model: &'a GcnModel,
        graph: &'a Graph,
        features: &'a FeatureMatrix,
        distances: &'a DistanceMatrix,
        base: SoftmaxOutput,
        config: DefenseConfig,
    ) -> Result<Self> {
        if distances.n_nodes() != graph.n_nodes() || base.n_nodes() != graph.n_nodes() {
            return Err(Error::Dimension("distance matrix and graph disagree on node count".into()));
        }
        Ok(Self {
            model,
            graph,
            features,
            distances,
            base,
            config,
            attacked: Vec::new(),
        })
    }

    /// Records which nodes are attacked, used by `exclude_attacked_donors`.
    pub fn with_attacked(mut self, attacked: &[NodeId]) -> Self {
        self.attacked = attacked.to_vec();
        self.attacked.sort_unstable();
        self
    }

    pub fn config(&self) -> &DefenseConfig {
        &self.config
    }

    pub fn base(&self) -> &SoftmaxOutput {
        &self.base
    }

    pub fn donors(&self, v: NodeId) -> Result<Vec<NodeId>> {
        if self.config.p == 0 {
            return Err(Error::Config("p must be at least 1".into()));
        }
        let exclude = self.config.exclude_attacked_donors;
        top_p_similar_filtered(self.distances, v, self.config.p, |k| {
            !exclude || self.attacked.binary_search(&k).is_err()
        })
    }

    fn weights(&self, distances: &[f64]) -> Option<Vec<f64>> {
        self.config.distance_weighted.then(|| {
            let raw: Vec<f64> = distances.iter().map(|d| 1.0 / (d + 1e-12)).collect();
            let total: f64 = raw.iter().sum();
            raw.into_iter().map(|w| w / total).collect()
        })
    }

    fn aggregate(&self, outputs: &[Vec<f64>], distances: &[f64]) -> Vec<f64> {
        match self.weights(distances) {
            None => mean_rows(outputs),
            Some(w) => {
                let mut acc = vec![0.0; outputs[0].len()];
                for (row, wk) in outputs.iter().zip(w) {
                    for (a, p) in acc.iter_mut().zip(row) {
                        *a += wk * p;
                    }
                }
                acc
            }
        }
    }

    pub fn correct_node(&self, v: NodeId) -> Result<CopyPrediction> {
        let donors = self.donors(v)?;
        let distances: Vec<f64> = donors.iter().map(|&k| self.distances.get(v, k)).collect();
        let donor_outputs: Vec<Vec<f64>> = donors
            .iter()
            .map(|&k| copy_and_predict(self.model, self.graph, self.features, v, k))
            .collect();
        let aggregate = self.aggregate(&donor_outputs, &distances);
        let predicted = argmax(aggregate.iter().copied());
        Ok(CopyPrediction {
            node: v,
            donors,
            distances,
            donor_outputs,
            aggregate,
            predicted,
        })
    }

    /// Majority vote over the donors of an existing correction.
    pub fn vote<R: Rng + ?Sized>(&self, prediction: &CopyPrediction, rng: &mut R) -> usize {
        majority_vote(&prediction.donor_votes(), self.model.n_classes(), rng)
    }

    pub fn majority_vote_correct<R: Rng + ?Sized>(&self, v: NodeId, rng: &mut R) -> Result<usize> {
        let prediction = self.correct_node(v)?;
        Ok(self.vote(&prediction, rng))
    }

    /// Aggregates the donors' own predictions, without copying `v`.
    pub fn no_copying_predict<R: Rng + ?Sized>(
        &self,
        v: NodeId,
        mode: Aggregation,
        rng: &mut R,
    ) -> Result<NoCopyOutput> {
        let donors = self.donors(v)?;
        Ok(match mode {
            Aggregation::Average => {
                let rows: Vec<Vec<f64>> = donors.iter().map(|&k| self.base.row(k).to_vec()).collect();
                let distances: Vec<f64> = donors.iter().map(|&k| self.distances.get(v, k)).collect();
                NoCopyOutput::Probabilities(self.aggregate(&rows, &distances))
            }
            Aggregation::Vote => {
                let votes: Vec<usize> = donors.iter().map(|&k| self.base.predicted(k)).collect();
                NoCopyOutput::Class(majority_vote(&votes, self.model.n_classes(), rng))
            }
        })
    }

    /// Corrects every node in `attacked` independently, in parallel.
    pub fn correct_all(&self, attacked: &[NodeId]) -> Result<BTreeMap<NodeId, CopyPrediction>> {
        attacked
            .par_iter()
            .map(|&v| {
                self.correct_node(v)
                    .map(|p| (v, p))
                    .map_err(|e| Error::at_node(v, e))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::EmbeddingMatrix;
    use ndarray::{array, Array2};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup() -> (GcnModel, Graph, FeatureMatrix, DistanceMatrix) {
        let (g, _) = Graph::from_edges(6, &[(0, 1), (1, 2), (3, 4), (4, 5), (2, 3)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = FeatureMatrix::from_dense(
            Array2::from_shape_fn((6, 3), |_| rng.random_range(0.0..1.0)).view(),
        )
        .unwrap();
        let model = GcnModel::init(3, 4, 3, &mut rng);
        let e = EmbeddingMatrix::new(array![[0.0], [1.0], [2.0], [10.0], [11.0], [12.5]]).unwrap();
        (model, g, x, DistanceMatrix::new(&e))
    }

    #[test]
    fn self_copy_is_identity() {
        let (m, g, x, _) = setup();
        let base = m.forward(&NormalizedAdjacency::new(&g), &x).unwrap();
        for v in 0..6 {
            let out = copy_and_predict(&m, &g, &x, v, v);
            for c in 0..3 {
                assert!((out[c] - base.row(v)[c]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_donor_is_verbatim() {
        let (m, g, x, d) = setup();
        let cfg = DefenseConfig {
            p: 1,
            ..DefenseConfig::default()
        };
        let nc = NodeCopying::new(&m, &g, &x, &d, cfg).unwrap();
        let pred = nc.correct_node(0).unwrap();
        assert_eq!(pred.donors, vec![1]);
        assert_eq!(pred.aggregate, pred.donor_outputs[0]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        match nc.no_copying_predict(0, Aggregation::Average, &mut rng).unwrap() {
            NoCopyOutput::Probabilities(p) => assert_eq!(p, nc.base().row(1).to_vec()),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn p_errors() {
        let (m, g, x, d) = setup();
        let nc = NodeCopying::new(&m, &g, &x, &d, DefenseConfig { p: 0, ..Default::default() }).unwrap();
        assert!(matches!(nc.correct_node(0), Err(Error::Config(_))));
        let nc = NodeCopying::new(&m, &g, &x, &d, DefenseConfig { p: 6, ..Default::default() }).unwrap();
        assert!(matches!(
            nc.correct_all(&[2]),
            Err(Error::AtNode { node: 2, .. })
        ));
    }

    #[test]
    fn exclusion_flag_skips_attacked_donors() {
        let (m, g, x, d) = setup();
        let cfg = DefenseConfig {
            p: 2,
            exclude_attacked_donors: true,
            ..Default::default()
        };
        let nc = NodeCopying::new(&m, &g, &x, &d, cfg).unwrap().with_attacked(&[0, 1]);
        assert_eq!(nc.donors(0).unwrap(), vec![2, 3]);
    }

    #[test]
    fn weighted_aggregate_is_a_distribution() {
        let (m, g, x, d) = setup();
        let cfg = DefenseConfig {
            p: 3,
            distance_weighted: true,
            ..Default::default()
        };
        let nc = NodeCopying::new(&m, &g, &x, &d, cfg).unwrap();
        let pred = nc.correct_node(4).unwrap();
        assert!((pred.aggregate.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn votes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(majority_vote(&[0, 0, 1], 2, &mut rng), 0);
        assert_eq!(majority_vote(&[2, 2, 2], 3, &mut rng), 2);
    }
}
