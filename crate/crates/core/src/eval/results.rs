//! On-disk layout of an experiment's results directory.
//!
//! ```text
//! <dir>/trial_000.json ... one file per completed trial
//! <dir>/summary.json
//! <dir>/summary.md
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::report::render_markdown;
use super::{SummaryTable, TrialResult};
use crate::error::{Error, Result};

pub const TRIAL_PREFIX: &str = "trial_";
pub const SUMMARY_JSON: &str = "summary.json";
pub const SUMMARY_MD: &str = "summary.md";

pub fn trial_path(dir: &Path, trial: usize) -> PathBuf {
    dir.join(format!("{TRIAL_PREFIX}{trial:03}.json"))
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::json(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_trial(dir: &Path, trial: &TrialResult) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = trial_path(dir, trial.trial);
    write_json(&path, trial)?;
    Ok(path)
}

pub fn write_summary(dir: &Path, summary: &SummaryTable) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_json(&dir.join(SUMMARY_JSON), summary)?;
    let md = dir.join(SUMMARY_MD);
    fs::write(&md, render_markdown(summary)).map_err(|e| Error::io(&md, e))
}

/// Reads every `trial_*.json` in `dir`, sorted by trial index.
pub fn read_trials(dir: &Path) -> Result<Vec<TrialResult>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut trials = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let is_trial = path
            .file_name()
            .and_then(|n| n.to_str())
            .is_some_and(|n| n.starts_with(TRIAL_PREFIX) && n.ends_with(".json"));
        if !is_trial {
            continue;
        }
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let t: TrialResult = serde_json::from_str(&text).map_err(|e| Error::json(&path, e))?;
        trials.push(t);
    }
    trials.sort_by_key(|t| t.trial);
    Ok(trials)
}
