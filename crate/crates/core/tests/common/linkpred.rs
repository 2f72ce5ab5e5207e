//! Held-out link prediction used to sanity-check GVAE training.

use gcnshield_core::embedding::{GvaeConfig, GvaeModel};
use gcnshield_core::{FeatureMatrix, Graph, NormalizedAdjacency};
use ndarray::Array1;
use rand::seq::SliceRandom;
use rand::Rng;

use super::rng;

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Fraction of (positive, negative) pairs ranked correctly, ties counted half.
fn auc(pos: &[f64], neg: &[f64]) -> f64 {
    let mut wins = 0.0;
    for &p in pos {
        for &q in neg {
            wins += if p > q {
                1.0
            } else if p == q {
                0.5
            } else {
                0.0
            };
        }
    }
    wins / (pos.len() * neg.len()) as f64
}

/// Trains on the graph minus 10% of its edges and scores the held-out edges
/// against as many sampled non-edges. Returns (first loss, last loss, AUC).
pub fn holdout_link_prediction(g: &Graph, x: &FeatureMatrix, seed: u64) -> (f64, f64, f64) {
    let mut r = rng(seed);
    let mut edges: Vec<_> = g.edges().collect();
    edges.shuffle(&mut r);
    let held = edges.len() / 10;
    let (test, train) = edges.split_at(held);
    let (train_g, _) = Graph::from_edges(g.n_nodes(), train).unwrap();
    let cfg = GvaeConfig {
        seed,
        ..GvaeConfig::default()
    };
    let model = GvaeModel::init(x.n_features(), &cfg, &mut r);
    let (model, log) = model.train(&train_g, x, &cfg, &mut r).unwrap();
    let emb = model.embed(&NormalizedAdjacency::new(&train_g), x).unwrap();
    let score = |u: usize, v: usize| {
        let a: Array1<f64> = emb.row(u).to_owned();
        sigmoid(a.dot(&emb.row(v)))
    };
    let pos: Vec<f64> = test.iter().map(|&(u, v)| score(u, v)).collect();
    let mut neg = Vec::with_capacity(held);
    while neg.len() < held {
        let u = r.random_range(0..g.n_nodes());
        let v = r.random_range(0..g.n_nodes());
        if u != v && !g.has_edge(u, v) {
            neg.push(score(u, v));
        }
    }
    let first = log.epochs.first().unwrap();
    let last = log.epochs.last().unwrap();
    assert!(log.epochs.iter().all(|e| e.kl >= 0.0));
    (first.loss, last.loss, auc(&pos, &neg))
}

