//! Small end-to-end fixtures shared by the trial and acceptance suites.

use gcnshield_core::embedding::GvaeConfig;
use gcnshield_core::synthetic::{planted_partition, SyntheticConfig};
use gcnshield_core::{Dataset, ExperimentConfig, TrainConfig};

pub fn synthetic_dataset(seed: u64) -> Dataset {
    planted_partition(&SyntheticConfig {
        n_nodes: 240,
        seed,
        ..SyntheticConfig::default()
    })
    .unwrap()
}

/// Full pipeline with fewer epochs so each trial runs in well under a second.
pub fn quick_config(n_trials: usize) -> ExperimentConfig {
    ExperimentConfig {
        dataset: "synthetic".into(),
        n_trials,
        seed: 11,
        gcn: TrainConfig {
            epochs: 60,
            ..TrainConfig::default()
        },
        gvae: GvaeConfig {
            epochs: 30,
            ..GvaeConfig::default()
        },
        ..ExperimentConfig::default()
    }
}
