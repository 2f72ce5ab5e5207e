//! DICE ("delete internally, connect externally") poisoning attack.
//!
//! Every target `v` loses `⌈β·d_v⌉` randomly chosen incident edges and gains
//! the same number of edges to nodes whose true label differs from its own,
//! so its degree is unchanged. Targets are processed one after another in
//! ascending node order; a later target sees the edits made for earlier ones.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::LabelVector;
use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};

/// Attack strength `β ∈ (0, 1]` held as a rational so `⌈β·d⌉` is computed
/// in integer arithmetic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Severity {
    num: u64,
    den: u64,
}

impl Severity {
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(Error::Config(format!("beta must lie in (0, 1], got {beta}")));
        }
        let (num, den) = rational_approximation(beta);
        Ok(Self { num, den })
    }

    pub fn as_fraction(&self) -> (u64, u64) {
        (self.num, self.den)
    }

    /// `⌈β·d⌉`, the number of edges replaced at a node of degree `d`.
    pub fn replacements(&self, degree: usize) -> usize {
        let p = self.num as u128 * degree as u128;
        p.div_ceil(self.den as u128) as usize
    }

    /// `⌊(1−β)·d⌋`, the most same-label neighbors a target keeps.
    pub fn same_label_bound(&self, degree: usize) -> usize {
        ((self.den - self.num) as u128 * degree as u128 / self.den as u128) as usize
    }
}

/// Closest convergent of the continued-fraction expansion of `x` that agrees
/// with it to 1e-12, so decimal inputs such as 0.1 map to 1/10 rather than
/// to their binary expansion.
fn rational_approximation(x: f64) -> (u64, u64) {
    const MAX_DEN: u64 = 1 << 32;
    let (mut h_prev, mut h) = (0u64, 1u64);
    let (mut k_prev, mut k) = (1u64, 0u64);
    let mut rest = x;
    let mut best = (1u64, 1u64);
    for _ in 0..64 {
        let a = rest.floor();
        let a_int = a as u64;
        let h_next = a_int.saturating_mul(h).saturating_add(h_prev);
        let k_next = a_int.saturating_mul(k).saturating_add(k_prev);
        if k_next == 0 || k_next > MAX_DEN {
            break;
        }
        (h_prev, h, k_prev, k) = (h, h_next, k, k_next);
        best = (h, k);
        if (x - h as f64 / k as f64).abs() <= 1e-12 {
            break;
        }
        let frac = rest - a;
        if frac == 0.0 {
            break;
        }
        rest = 1.0 / frac;
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackConfig {
    pub beta: f64,
    pub targets: Vec<NodeId>,
    pub seed: u64,
    /// Restrict removals to same-label neighbors (the literal reading of
    /// the acronym). Off by default.
    #[serde(default)]
    pub internal_only: bool,
}

/// What happened to one target. Edges are written `[target, other]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetEdit {
    pub node: NodeId,
    /// Degree of the target when its turn came.
    pub degree: usize,
    pub removed: Vec<[NodeId; 2]>,
    pub added: Vec<[NodeId; 2]>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttackReport {
    pub edits: Vec<TargetEdit>,
    /// Targets with no edges when their turn came.
    pub skipped: Vec<NodeId>,
}

impl AttackReport {
    /// Re-applies the recorded edits, in order, to `g`.
    pub fn replay(&self, g: &Graph) -> Result<Graph> {
        let mut adj = g.to_adjacency_lists();
        for edit in &self.edits {
            for &[v, u] in &edit.removed {
                if !remove_edge(&mut adj, v, u) {
                    return Err(Error::Input(format!("replay: edge ({v}, {u}) is absent")));
                }
            }
            for &[v, u] in &edit.added {
                if u == v || u >= adj.len() || !insert_edge(&mut adj, v, u) {
                    return Err(Error::Input(format!("replay: cannot add edge ({v}, {u})")));
                }
            }
        }
        Ok(Graph::from_adjacency_lists(&adj))
    }

    pub fn n_removed(&self) -> usize {
        self.edits.iter().map(|e| e.removed.len()).sum()
    }
}

fn insert_edge(adj: &mut [Vec<NodeId>], u: NodeId, v: NodeId) -> bool {
    match adj[u].binary_search(&v) {
        Ok(_) => false,
        Err(pos) => {
            adj[u].insert(pos, v);
            let pos = adj[v].binary_search(&u).unwrap_err();
            adj[v].insert(pos, u);
            true
        }
    }
}

fn remove_edge(adj: &mut [Vec<NodeId>], u: NodeId, v: NodeId) -> bool {
    match adj[u].binary_search(&v) {
        Err(_) => false,
        Ok(pos) => {
            adj[u].remove(pos);
            let pos = adj[v].binary_search(&u).expect("symmetric adjacency");
            adj[v].remove(pos);
            true
        }
    }
}

/// Runs the attack. The caller keeps training nodes out of `cfg.targets`.
pub fn dice_attack(g: &Graph, labels: &LabelVector, cfg: &AttackConfig) -> Result<(Graph, AttackReport)> {
    let severity = Severity::new(cfg.beta)?;
    let n = g.n_nodes();
    if labels.len() != n {
        return Err(Error::Dimension(format!("{} labels for {n} nodes", labels.len())));
    }
    let mut targets = cfg.targets.clone();
    targets.sort_unstable();
    targets.dedup();
    if let Some(&v) = targets.iter().find(|&&v| v >= n) {
        return Err(Error::Input(format!("attack target {v} out of range")));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adj = g.to_adjacency_lists();
    let mut report = AttackReport::default();
    for v in targets {
        let degree = adj[v].len();
        if degree == 0 {
            report.skipped.push(v);
            continue;
        }
        let own = labels.get(v);
        let pool: Vec<NodeId> = if cfg.internal_only {
            adj[v].iter().copied().filter(|&u| labels.get(u) == own).collect()
        } else {
            adj[v].clone()
        };
        let count = severity.replacements(degree).min(pool.len());
        let candidates: Vec<NodeId> = (0..n)
            .filter(|&u| u != v && labels.get(u) != own && adj[v].binary_search(&u).is_err())
            .collect();
        if candidates.len() < count {
            return Err(Error::AttackInfeasible {
                node: v,
                needed: count,
                available: candidates.len(),
            });
        }

        let mut removed: Vec<NodeId> = index::sample(&mut rng, pool.len(), count)
            .into_iter()
            .map(|i| pool[i])
            .collect();
        removed.sort_unstable();
        let mut added: Vec<NodeId> = index::sample(&mut rng, candidates.len(), count)
            .into_iter()
            .map(|i| candidates[i])
            .collect();
        added.sort_unstable();

        for &u in &removed {
            remove_edge(&mut adj, v, u);
        }
        for &u in &added {
            insert_edge(&mut adj, v, u);
        }
        report.edits.push(TargetEdit {
            node: v,
            degree,
            removed: removed.into_iter().map(|u| [v, u]).collect(),
            added: added.into_iter().map(|u| [v, u]).collect(),
        });
    }
    Ok((Graph::from_adjacency_lists(&adj), report))
}
