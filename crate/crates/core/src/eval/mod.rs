//! Experimental protocol: repeated randomized trials comparing the
//! classifier at attacked nodes before and after correction, plus the
//! ablations and the graph-agnostic baseline.

mod report;
mod results;
pub mod stats;

pub use report::{render_csv, render_markdown};
pub use results::{read_trials, write_summary, write_trial, SUMMARY_JSON, SUMMARY_MD, TRIAL_PREFIX};
pub use stats::{accuracy, mean, population_std, wilcoxon_signed_rank, WilcoxonMethod, WilcoxonResult};

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attack::{dice_attack, AttackConfig};
use crate::dataset::Dataset;
use crate::defense::{Aggregation, CorrectionAudit, DefenseConfig, NodeCopying};
use crate::checkpoint::{graph_fingerprint, load_embedding, save_embedding, EmbeddingKey};
use crate::embedding::{spectral_embedding, DistanceMatrix, Embedder, EmbeddingMatrix, GvaeConfig, GvaeModel};
use crate::error::{Error, Result};
use crate::gcn::{GcnModel, MlpModel, TrainConfig};
use crate::data::{sample_split, FeatureMatrix};
use crate::graph::{Graph, NodeId, NormalizedAdjacency};
use crate::rng::{stream_rng, trial_seed, Stream};

/// Significance level for the asterisk convention.
pub const SIGNIFICANCE_LEVEL: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: String,
    pub per_class: usize,
    pub n_attacked: usize,
    pub beta: f64,
    pub p: usize,
    pub n_trials: usize,
    pub embedder: Embedder,
    pub seed: u64,
    pub spectral_dim: usize,
    pub exclude_attacked_donors: bool,
    pub distance_weighted: bool,
    pub internal_only: bool,
    pub gcn: TrainConfig,
    pub gvae: GvaeConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: String::new(),
            per_class: 10,
            n_attacked: 50,
            beta: 0.5,
            p: 10,
            n_trials: 50,
            embedder: Embedder::Gvae,
            seed: 0,
            spectral_dim: 16,
            exclude_attacked_donors: false,
            distance_weighted: false,
            internal_only: false,
            gcn: TrainConfig::default(),
            gvae: GvaeConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.per_class == 0 || self.n_attacked == 0 || self.p == 0 || self.n_trials == 0 {
            return Err(Error::Config(
                "per_class, n_attacked, p and n_trials must be positive".into(),
            ));
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::Config(format!("beta must lie in (0, 1], got {}", self.beta)));
        }
        if self.spectral_dim == 0 {
            return Err(Error::Config("spectral_dim must be positive".into()));
        }
        self.gcn.validate()?;
        self.gvae.validate()
    }

    fn defense(&self) -> DefenseConfig {
        DefenseConfig {
            p: self.p,
            exclude_attacked_donors: self.exclude_attacked_donors,
            distance_weighted: self.distance_weighted,
        }
    }
}

/// The six predictors compared at the attacked nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    BeforeCopying,
    CopyingAverage,
    CopyingVote,
    NoCopyAverage,
    NoCopyVote,
    MlpBaseline,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::BeforeCopying,
        Method::CopyingAverage,
        Method::CopyingVote,
        Method::NoCopyAverage,
        Method::NoCopyVote,
        Method::MlpBaseline,
    ];

    pub fn key(self) -> &'static str {
        match self {
            Method::BeforeCopying => "before_copying",
            Method::CopyingAverage => "copying_avg",
            Method::CopyingVote => "copying_vote",
            Method::NoCopyAverage => "nocopy_avg",
            Method::NoCopyVote => "nocopy_vote",
            Method::MlpBaseline => "mlp_baseline",
        }
    }

    /// Column title used in rendered tables.
    pub fn title(self) -> &'static str {
        match self {
            Method::BeforeCopying => "Before Copying",
            Method::CopyingAverage => "Copying Average Softmax",
            Method::CopyingVote => "Copying Majority Voting",
            Method::NoCopyAverage => "No Copying Average Softmax",
            Method::NoCopyVote => "No Copying Majority Voting",
            Method::MlpBaseline => "Neural Network",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.key() == s)
            .ok_or_else(|| Error::Config(format!("unknown method `{s}`")))
    }
}

/// Accuracy on the attacked nodes, as a fraction, for each method.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MethodAccuracies {
    pub before_copying: f64,
    pub copying_avg: f64,
    pub copying_vote: f64,
    pub nocopy_avg: f64,
    pub nocopy_vote: f64,
    pub mlp_baseline: f64,
}

impl MethodAccuracies {
    pub fn get(&self, m: Method) -> f64 {
        match m {
            Method::BeforeCopying => self.before_copying,
            Method::CopyingAverage => self.copying_avg,
            Method::CopyingVote => self.copying_vote,
            Method::NoCopyAverage => self.nocopy_avg,
            Method::NoCopyVote => self.nocopy_vote,
            Method::MlpBaseline => self.mlp_baseline,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: usize,
    pub seed: u64,
    pub setting: Setting,
    pub attacked: Vec<NodeId>,
    pub accuracy: MethodAccuracies,
    pub edges_replaced: usize,
    pub targets_skipped: Vec<NodeId>,
    pub gcn_final_loss: f64,
    pub corrections: Vec<CorrectionAudit>,
}

/// The experimental setting a trial belongs to, kept in each trial file so
/// a results directory can be summarized on its own.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Setting {
    pub dataset: String,
    pub per_class: usize,
    pub beta: f64,
    pub p: usize,
    pub embedder: Embedder,
}

impl Setting {
    pub fn of(cfg: &ExperimentConfig) -> Self {
        Self {
            dataset: cfg.dataset.clone(),
            per_class: cfg.per_class,
            beta: cfg.beta,
            p: cfg.p,
            embedder: cfg.embedder,
        }
    }
}

/// What the harness keeps for a trial that aborted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialFailure {
    pub trial: usize,
    pub seed: u64,
    pub error: String,
}

fn stage<T>(name: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::stage(name, e))
}

/// Runs one complete trial. The result depends only on `(dataset, cfg, seed)`.
pub fn run_trial(ds: &Dataset, cfg: &ExperimentConfig, trial: usize, seed: u64) -> Result<TrialResult> {
    run_trial_with(ds, cfg, trial, seed, None)
}

/// [`run_trial`] that reads and writes embeddings in `embedding_cache`.
/// A cached embedding is used only when its key matches exactly.
pub fn run_trial_with(
    ds: &Dataset,
    cfg: &ExperimentConfig,
    trial: usize,
    seed: u64,
    embedding_cache: Option<&Path>,
) -> Result<TrialResult> {
    let labels = &ds.labels;
    let x = &ds.features;
    let n_classes = labels.n_classes();

    let split = stage(
        "split",
        sample_split(labels, cfg.per_class, cfg.n_attacked, &mut stream_rng(seed, Stream::Split)),
    )?;
    let attacked = &split.attacked;

    let attack_cfg = AttackConfig {
        beta: cfg.beta,
        targets: attacked.clone(),
        seed: stream_rng(seed, Stream::Attack).next_u64(),
        internal_only: cfg.internal_only,
    };
    let (graph, report) = stage("attack", dice_attack(&ds.graph, labels, &attack_cfg))?;
    let a_hat = NormalizedAdjacency::new(&graph);

    let mut gcn_rng = stream_rng(seed, Stream::Gcn);
    let gcn_cfg = TrainConfig {
        seed,
        ..cfg.gcn.clone()
    };
    let model = GcnModel::init(x.n_features(), gcn_cfg.hidden_dim, n_classes, &mut gcn_rng);
    let (model, gcn_log) = stage(
        "gcn",
        model.train(&a_hat, x, labels, &split.train, &gcn_cfg, &mut gcn_rng),
    )?;
    let base = stage("gcn", model.forward(&a_hat, x))?;
    let before: Vec<usize> = attacked.iter().map(|&v| base.predicted(v)).collect();

    let embedding = stage("embedding", embed_cached(&graph, &a_hat, x, cfg, seed, embedding_cache))?;
    let distances = DistanceMatrix::new(&embedding);

    let copying = stage(
        "defense",
        NodeCopying::with_base(&model, &graph, x, &distances, base, cfg.defense()),
    )?
    .with_attacked(attacked);
    let corrected = stage("defense", copying.correct_all(attacked))?;
    let mut tie_rng = stream_rng(seed, Stream::Ties);
    let mut copy_avg = Vec::with_capacity(attacked.len());
    let mut copy_vote = Vec::with_capacity(attacked.len());
    let mut nocopy_avg = Vec::with_capacity(attacked.len());
    let mut nocopy_vote = Vec::with_capacity(attacked.len());
    for v in attacked {
        let pred = &corrected[v];
        copy_avg.push(pred.predicted);
        copy_vote.push(copying.vote(pred, &mut tie_rng));
        let avg = stage("defense", copying.no_copying_predict(*v, Aggregation::Average, &mut tie_rng))?;
        nocopy_avg.push(avg.class());
        let vote = stage("defense", copying.no_copying_predict(*v, Aggregation::Vote, &mut tie_rng))?;
        nocopy_vote.push(vote.class());
    }

    let mut mlp_rng = stream_rng(seed, Stream::Mlp);
    let mlp = MlpModel::init(x.n_features(), gcn_cfg.hidden_dim, n_classes, &mut mlp_rng);
    let (mlp, _) = stage("mlp", mlp.train(x, labels, &split.train, &gcn_cfg, &mut mlp_rng))?;
    let mlp_out = stage("mlp", mlp.predict(x))?;
    let mlp_pred: Vec<usize> = attacked.iter().map(|&v| mlp_out.predicted(v)).collect();

    let acc = |p: &[usize]| stage("evaluate", accuracy(p, labels, attacked));
    Ok(TrialResult {
        trial,
        seed,
        setting: Setting::of(cfg),
        attacked: attacked.clone(),
        accuracy: MethodAccuracies {
            before_copying: acc(&before)?,
            copying_avg: acc(&copy_avg)?,
            copying_vote: acc(&copy_vote)?,
            nocopy_avg: acc(&nocopy_avg)?,
            nocopy_vote: acc(&nocopy_vote)?,
            mlp_baseline: acc(&mlp_pred)?,
        },
        edges_replaced: report.n_removed(),
        targets_skipped: report.skipped,
        gcn_final_loss: gcn_log.losses.last().copied().unwrap_or(f64::NAN),
        corrections: corrected.values().map(|p| p.audit()).collect(),
    })
}

fn embedding_key(graph: &Graph, cfg: &ExperimentConfig, seed: u64) -> EmbeddingKey {
    let (dim, config) = match cfg.embedder {
        Embedder::Gvae => (
            cfg.gvae.latent_dim,
            serde_json::to_value(GvaeConfig { seed, ..cfg.gvae.clone() }).unwrap_or_default(),
        ),
        Embedder::Spectral => (cfg.spectral_dim, serde_json::Value::Null),
    };
    EmbeddingKey {
        n_nodes: graph.n_nodes(),
        dim,
        embedder: cfg.embedder,
        seed,
        config,
        graph: graph_fingerprint(graph),
    }
}

fn embed(
    graph: &Graph,
    a_hat: &NormalizedAdjacency,
    x: &FeatureMatrix,
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<EmbeddingMatrix> {
    match cfg.embedder {
        Embedder::Gvae => {
            let mut rng = stream_rng(seed, Stream::Embedder);
            let gvae_cfg = GvaeConfig {
                seed,
                ..cfg.gvae.clone()
            };
            let gvae = GvaeModel::init(x.n_features(), &gvae_cfg, &mut rng);
            let (gvae, _) = gvae.train(graph, x, &gvae_cfg, &mut rng)?;
            gvae.embed(a_hat, x)
        }
        Embedder::Spectral => spectral_embedding(graph, cfg.spectral_dim),
    }
}

fn embed_cached(
    graph: &Graph,
    a_hat: &NormalizedAdjacency,
    x: &FeatureMatrix,
    cfg: &ExperimentConfig,
    seed: u64,
    cache: Option<&Path>,
) -> Result<EmbeddingMatrix> {
    let Some(dir) = cache else {
        return embed(graph, a_hat, x, cfg, seed);
    };
    let key = embedding_key(graph, cfg, seed);
    let path = dir.join(format!("{}_{seed}_{}.bin", cfg.embedder, key.graph));
    if path.exists() {
        match load_embedding(&path) {
            Ok((found, emb)) if found == key => return Ok(emb),
            Ok(_) => log::warn!("{}: cache key mismatch, recomputing", path.display()),
            Err(e) => log::warn!("{e}; recomputing"),
        }
    }
    let emb = embed(graph, a_hat, x, cfg, seed)?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    save_embedding(&path, &key, &emb)?;
    Ok(emb)
}

/// Outcome of one trial slot.
pub type TrialOutcome = std::result::Result<TrialResult, TrialFailure>;

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub trials: Vec<TrialResult>,
    pub failures: Vec<TrialFailure>,
    pub summary: SummaryTable,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Worker threads; all cores when `None`.
    pub jobs: Option<usize>,
    pub embedding_cache: Option<PathBuf>,
}

/// Runs `cfg.n_trials` trials in parallel. `on_trial` is called as each
/// trial finishes, in completion order; the returned results are in trial
/// order.
pub fn run_experiment(
    ds: &Dataset,
    cfg: &ExperimentConfig,
    opts: &RunOptions,
    on_trial: impl Fn(&TrialOutcome) + Sync,
) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = opts.jobs {
        builder = builder.num_threads(j.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let outcomes: Vec<TrialOutcome> = pool.install(|| {
        (0..cfg.n_trials)
            .into_par_iter()
            .map(|i| {
                let seed = trial_seed(cfg.seed, i);
                let out = run_trial_with(ds, cfg, i, seed, opts.embedding_cache.as_deref()).map_err(|e| TrialFailure {
                    trial: i,
                    seed,
                    error: e.to_string(),
                });
                on_trial(&out);
                out
            })
            .collect()
    });
    let mut trials = Vec::new();
    let mut failures = Vec::new();
    for o in outcomes {
        match o {
            Ok(t) => trials.push(t),
            Err(f) => failures.push(f),
        }
    }
    if trials.is_empty() {
        return Err(Error::Experiment(format!(
            "all {} trials failed; first error: {}",
            failures.len(),
            failures.first().map_or("none", |f| f.error.as_str())
        )));
    }
    let summary = summarize(&trials, failures.len());
    Ok(ExperimentOutcome {
        trials,
        failures,
        summary,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    /// Percent.
    pub mean: f64,
    /// Percent, population convention.
    pub std: f64,
    /// Two-sided Wilcoxon p-value against `before_copying`.
    pub p_value: Option<f64>,
    /// Why no p-value was computed.
    pub test_note: Option<String>,
    /// True when the difference is not significant at 5% (rendered as `*`).
    pub asterisk: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryTable {
    pub setting: Option<Setting>,
    pub n_trials: usize,
    pub n_failed: usize,
    pub std_convention: String,
    pub rows: Vec<MethodSummary>,
}

impl SummaryTable {
    pub fn row(&self, m: Method) -> Option<&MethodSummary> {
        self.rows.iter().find(|r| r.method == m)
    }
}

/// The asterisk convention: not significant at the 5% level.
pub fn not_significant(p_value: Option<f64>) -> bool {
    p_value.is_none_or(|p| p >= SIGNIFICANCE_LEVEL)
}

/// Aggregates trial results in the order given.
pub fn summarize(trials: &[TrialResult], n_failed: usize) -> SummaryTable {
    let series = |m: Method| -> Vec<f64> { trials.iter().map(|t| t.accuracy.get(m)).collect() };
    let before = series(Method::BeforeCopying);
    let rows = Method::ALL
        .into_iter()
        .map(|m| {
            let xs = series(m);
            let pct: Vec<f64> = xs.iter().map(|a| 100.0 * a).collect();
            let (p_value, test_note) = if m == Method::BeforeCopying {
                (None, None)
            } else {
                match wilcoxon_signed_rank(&xs, &before) {
                    Ok(r) => (Some(r.p_value), None),
                    Err(e) => (None, Some(e.to_string())),
                }
            };
            MethodSummary {
                method: m,
                mean: mean(&pct),
                std: population_std(&pct),
                p_value,
                asterisk: m != Method::BeforeCopying && not_significant(p_value),
                test_note,
            }
        })
        .collect();
    SummaryTable {
        setting: trials.first().map(|t| t.setting.clone()),
        n_trials: trials.len(),
        n_failed,
        std_convention: "population".into(),
        rows,
    }
}
