//! `gcnshield`: prepare citation datasets, run attack/correction experiments
//! and render result tables.
//!
//! Exit codes: 0 on success, 1 when any trial failed, 2 on usage or input
//! errors.

mod manifest;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use gcnshield_core::dataset::{read_bundle, META_FILE};
use gcnshield_core::embedding::Embedder;
use gcnshield_core::eval::{
    read_trials, render_csv, render_markdown, write_summary, write_trial, TrialFailure, SUMMARY_JSON, SUMMARY_MD,
    TRIAL_PREFIX,
};
use gcnshield_core::{load_dataset, run_experiment, summarize, write_bundle, Error, ExperimentConfig, RunOptions};

use crate::manifest::{DatasetRef, RunManifest, MANIFEST_FILE};

const FAILURES_FILE: &str = "failures.json";

#[derive(Parser)]
#[command(name = "gcnshield", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert raw `.content` / `.cites` files into a canonical bundle.
    PrepareData {
        content: PathBuf,
        cites: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run repeated attack and correction trials.
    Run(RunArgs),
    /// Recompute and print the summary table of a results directory.
    Report {
        dir: PathBuf,
        /// Print CSV instead of markdown.
        #[arg(long)]
        csv: bool,
    },
}

#[derive(Args)]
struct RunArgs {
    /// JSON file with flat `ExperimentConfig` keys; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Repeat a previous run exactly, taking config and dataset from its manifest.
    #[arg(long, conflicts_with_all = ["config", "dataset", "per_class", "beta", "p", "trials", "embedder", "seed"])]
    from_manifest: Option<PathBuf>,
    /// Bundle directory, or a dataset name looked up under the data root.
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long, env = "GCNSHIELD_DATA")]
    data_root: Option<PathBuf>,
    #[arg(long)]
    per_class: Option<usize>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    embedder: Option<Embedder>,
    #[arg(long)]
    seed: Option<u64>,
    /// Parallel trials; defaults to all cores.
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    out: PathBuf,
    /// Reuse embeddings across runs from this directory.
    #[arg(long)]
    embedding_cache: Option<PathBuf>,
    /// Replace the results of an earlier run in `--out`.
    #[arg(long)]
    force: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::PrepareData { content, cites, out } => prepare_data(&content, &cites, &out),
        Command::Run(args) => run(&args),
        Command::Report { dir, csv } => report(&dir, csv),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn prepare_data(content: &Path, cites: &Path, out: &Path) -> Result<ExitCode> {
    let ds = load_dataset(content, cites)?;
    write_bundle(&ds, out)?;
    let s = ds.stats;
    println!(
        "N={} C={} F={} edges={} dropped: dangling={} duplicate={} self_loops={}",
        ds.n_nodes(),
        ds.labels.n_classes(),
        ds.features.n_features(),
        ds.graph.n_edges(),
        s.dangling_citations,
        s.duplicate_edges,
        s.self_loops
    );
    Ok(ExitCode::SUCCESS)
}

fn resolve_bundle(name: &str, data_root: Option<&Path>) -> Result<PathBuf> {
    let direct = PathBuf::from(name);
    if direct.join(META_FILE).is_file() {
        return Ok(direct);
    }
    if let Some(root) = data_root {
        let under = root.join(name);
        if under.join(META_FILE).is_file() {
            return Ok(under);
        }
        bail!("no dataset bundle at `{name}` or {}", under.display());
    }
    bail!("no dataset bundle at `{name}` (set --data-root or GCNSHIELD_DATA to look up names)")
}

fn resolve_config(args: &RunArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(d) = &args.dataset {
        cfg.dataset.clone_from(d);
    }
    macro_rules! apply {
        ($($flag:ident => $field:ident),*) => {
            $(if let Some(v) = args.$flag { cfg.$field = v; })*
        };
    }
    apply!(per_class => per_class, beta => beta, p => p, trials => n_trials, embedder => embedder, seed => seed);
    if cfg.dataset.is_empty() {
        bail!("no dataset given (use --dataset or a config file)");
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Prepares `out` for a fresh run, clearing old results only with `force`.
fn prepare_output(out: &Path, force: bool) -> Result<()> {
    if out.join(MANIFEST_FILE).exists() {
        if !force {
            bail!("{} already holds a run (pass --force to replace it)", out.display());
        }
        for entry in fs::read_dir(out)? {
            let path = entry?.path();
            let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
            let ours = name.starts_with(TRIAL_PREFIX)
                || [MANIFEST_FILE, SUMMARY_JSON, SUMMARY_MD, FAILURES_FILE].contains(&name);
            if ours {
                fs::remove_file(&path).with_context(|| format!("removing {}", path.display()))?;
            }
        }
    }
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))
}

fn run(args: &RunArgs) -> Result<ExitCode> {
    let (cfg, dataset) = match &args.from_manifest {
        Some(path) => {
            let m = RunManifest::read(path)?;
            m.dataset.verify()?;
            (m.config, m.dataset)
        }
        None => {
            let cfg = resolve_config(args)?;
            let dir = resolve_bundle(&cfg.dataset, args.data_root.as_deref())?;
            (cfg, DatasetRef::from_bundle(&dir)?)
        }
    };
    let ds = read_bundle(&dataset.path)?;
    prepare_output(&args.out, args.force)?;
    RunManifest::new(cfg.clone(), dataset, &args.out).write(&args.out)?;

    let total = cfg.n_trials;
    log::info!(
        "{}: {total} trials, beta {}, {} labels per class, p {}, {} embedder",
        cfg.dataset,
        cfg.beta,
        cfg.per_class,
        cfg.p,
        cfg.embedder
    );
    let opts = RunOptions {
        jobs: args.jobs,
        embedding_cache: args.embedding_cache.clone(),
    };
    let done = std::sync::atomic::AtomicUsize::new(0);
    let result = run_experiment(&ds, &cfg, &opts, |o| {
        let k = done.fetch_add(1, std::sync::atomic::Ordering::Relaxed) + 1;
        match o {
            Ok(t) => log::info!(
                "trial {} done ({k}/{total}): before {:.1}, copying {:.1}",
                t.trial,
                100.0 * t.accuracy.before_copying,
                100.0 * t.accuracy.copying_avg
            ),
            Err(f) => log::warn!("trial {} failed ({k}/{total}): {}", f.trial, f.error),
        }
    });
    let outcome = match result {
        Ok(o) => o,
        Err(Error::Experiment(msg)) => {
            eprintln!("error: {msg}");
            return Ok(ExitCode::from(1));
        }
        Err(e) => return Err(e.into()),
    };
    for t in &outcome.trials {
        write_trial(&args.out, t)?;
    }
    if !outcome.failures.is_empty() {
        write_failures(&args.out, &outcome.failures)?;
    }
    write_summary(&args.out, &outcome.summary)?;
    print!("{}", render_markdown(&outcome.summary));
    if outcome.failures.is_empty() {
        Ok(ExitCode::SUCCESS)
    } else {
        log::warn!("{} of {total} trials failed", outcome.failures.len());
        Ok(ExitCode::from(1))
    }
}

fn write_failures(dir: &Path, failures: &[TrialFailure]) -> Result<()> {
    let path = dir.join(FAILURES_FILE);
    let mut text = serde_json::to_string_pretty(failures)?;
    text.push('\n');
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
}

fn report(dir: &Path, csv: bool) -> Result<ExitCode> {
    let trials = read_trials(dir)?;
    if trials.is_empty() {
        bail!("{} holds no trial files", dir.display());
    }
    let failures_path = dir.join(FAILURES_FILE);
    let n_failed = if failures_path.exists() {
        let text = fs::read_to_string(&failures_path)?;
        let f: Vec<TrialFailure> =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", failures_path.display()))?;
        f.len()
    } else {
        0
    };
    let summary = summarize(&trials, n_failed);
    if csv {
        print!("{}", render_csv(&summary));
    } else {
        print!("{}", render_markdown(&summary));
    }
    Ok(ExitCode::SUCCESS)
}
