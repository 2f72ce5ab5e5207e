//! Planted-partition graphs with bag-of-words features, shaped loosely like
//! a small citation network. Used by tests and benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{FeatureMatrix, LabelVector};
use crate::dataset::{Dataset, IdMap, LoadStats};
use crate::error::{Error, Result};
use crate::graph::Graph;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub n_nodes: usize,
    pub n_classes: usize,
    pub n_features: usize,
    /// Edges drawn per node; the mean degree is about twice this.
    pub edges_per_node: usize,
    /// Probability that a drawn edge stays inside the class.
    pub homophily: f64,
    pub words_per_node: usize,
    /// Probability that a word is drawn from the node's own class vocabulary.
    pub feature_signal: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n_nodes: 300,
            n_classes: 3,
            n_features: 60,
            edges_per_node: 2,
            homophily: 0.85,
            words_per_node: 6,
            feature_signal: 0.6,
            seed: 0,
        }
    }
}

pub fn planted_partition(cfg: &SyntheticConfig) -> Result<Dataset> {
    let (n, c, f) = (cfg.n_nodes, cfg.n_classes, cfg.n_features);
    if c < 2 || n < 2 * c || f < c || cfg.words_per_node == 0 {
        return Err(Error::Config(format!(
            "need n_classes ≥ 2, n_nodes ≥ 2·n_classes, n_features ≥ n_classes and words; got {cfg:?}"
        )));
    }
    if !(0.0..=1.0).contains(&cfg.homophily) || !(0.0..=1.0).contains(&cfg.feature_signal) {
        return Err(Error::Config("probabilities must lie in [0, 1]".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let labels: Vec<usize> = (0..n).map(|v| v % c).collect();
    let members: Vec<Vec<usize>> = (0..c).map(|k| (k..n).step_by(c).collect()).collect();

    let mut edges = Vec::with_capacity(n * cfg.edges_per_node);
    for u in 0..n {
        for _ in 0..cfg.edges_per_node {
            let class = if rng.random_bool(cfg.homophily) {
                labels[u]
            } else {
                (labels[u] + rng.random_range(1..c)) % c
            };
            let pool = &members[class];
            let v = loop {
                let v = pool[rng.random_range(0..pool.len())];
                if v != u {
                    break v;
                }
            };
            edges.push((u, v));
        }
    }
    let (graph, stats) = Graph::from_edges(n, &edges)?;

    let block = f / c;
    let mut triplets = Vec::with_capacity(n * cfg.words_per_node);
    for (v, &y) in labels.iter().enumerate() {
        for _ in 0..cfg.words_per_node {
            let word = if rng.random_bool(cfg.feature_signal) {
                y * block + rng.random_range(0..block)
            } else {
                rng.random_range(0..f)
            };
            triplets.push((v, word, 1.0));
        }
    }
    let features = FeatureMatrix::from_triplets(n, f, triplets)?;

    Ok(Dataset {
        graph,
        features,
        labels: LabelVector::new(labels, c)?,
        id_map: IdMap {
            node_ids: (0..n).map(|v| format!("n{v}")).collect(),
            label_names: (0..c).map(|k| format!("class_{k}")).collect(),
        },
        stats: LoadStats {
            dangling_citations: 0,
            duplicate_edges: stats.duplicates_dropped,
            self_loops: stats.self_loops_dropped,
        },
    })
}
