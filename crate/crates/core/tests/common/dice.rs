//! DICE invariant checker shared by the property and acceptance suites.

use std::collections::BTreeSet;

use gcnshield_core::attack::{dice_attack, AttackConfig, AttackReport, Severity};
use gcnshield_core::{Error, Graph, LabelVector};
use rand::seq::index;
use rand::Rng;

use super::{edge_set, random_graph, random_labels, rng};

pub struct Violations {
    pub instances: usize,
    pub failures: Vec<String>,
}

/// Checks every per-step and global DICE invariant on one instance.
fn check_instance(g: &Graph, labels: &LabelVector, cfg: &AttackConfig) -> Result<Vec<String>, Error> {
    let (attacked, report) = dice_attack(g, labels, cfg)?;
    let severity = Severity::new(cfg.beta).unwrap();
    let mut bad = Vec::new();
    let same_label = |g: &Graph, v: usize| g.neighbors(v).iter().filter(|&&u| labels.get(u) == labels.get(v)).count();

    let mut state = g.clone();
    for (i, edit) in report.edits.iter().enumerate() {
        let v = edit.node;
        if state.degree(v) != edit.degree {
            bad.push(format!("recorded degree of {v} is stale"));
        }
        let k = severity.replacements(edit.degree);
        if edit.removed.len() != k || edit.added.len() != k {
            bad.push(format!("node {v}: {} removed, {} added, expected {k}", edit.removed.len(), edit.added.len()));
        }
        for &[_, u] in &edit.added {
            if labels.get(u) == labels.get(v) || state.has_edge(v, u) {
                bad.push(format!("node {v}: illegal insertion {u}"));
            }
        }
        let prefix = AttackReport {
            edits: report.edits[..=i].to_vec(),
            skipped: Vec::new(),
        };
        state = prefix.replay(g).map_err(|e| Error::Input(e.to_string()))?;
        if state.degree(v) != edit.degree {
            bad.push(format!("node {v}: degree {} → {}", edit.degree, state.degree(v)));
        }
        if same_label(&state, v) > severity.same_label_bound(edit.degree) {
            bad.push(format!("node {v}: same-label bound violated"));
        }
    }
    if state != attacked {
        bad.push("replay differs from attacked graph".into());
    }
    if attacked.validate().is_err() {
        bad.push("attacked graph is not simple and symmetric".into());
    }
    let targets: BTreeSet<_> = cfg.targets.iter().copied().collect();
    let before = edge_set(g);
    let after = edge_set(&attacked);
    for &(u, w) in before.symmetric_difference(&after) {
        if !targets.contains(&u) && !targets.contains(&w) {
            bad.push(format!("edge ({u}, {w}) changed without touching a target"));
        }
    }
    Ok(bad)
}

/// Runs `count` feasible random instances (N ≤ 60) for each β, returning
/// all invariant violations found.
pub fn property_suite(count: usize, seed: u64) -> Violations {
    let mut r = rng(seed);
    let betas = [0.25, 0.5, 0.75, 1.0];
    let mut failures = Vec::new();
    let mut instances = 0;
    while instances < count {
        let n = r.random_range(8..=60);
        let c = r.random_range(2..=5);
        let g = random_graph(n, r.random_range(0.03..0.25), &mut r);
        let labels = random_labels(n, c, &mut r);
        let n_targets = r.random_range(1..=n / 3);
        let mut targets = index::sample(&mut r, n, n_targets).into_vec();
        targets.sort_unstable();
        let cfg = AttackConfig {
            beta: betas[instances % betas.len()],
            targets,
            seed: r.random(),
            internal_only: false,
        };
        match check_instance(&g, &labels, &cfg) {
            Ok(bad) => {
                failures.extend(bad.into_iter().map(|b| format!("instance {instances}: {b}")));
                instances += 1;
            }
            Err(Error::AttackInfeasible { .. }) => continue,
            Err(e) => {
                failures.push(format!("instance {instances}: {e}"));
                instances += 1;
            }
        }
    }
    Violations { instances, failures }
}

