//! Shared fixtures for the benchmarks.

use gcnshield_core::synthetic::{planted_partition, SyntheticConfig};
use gcnshield_core::Dataset;

/// A planted-partition graph shaped like the smaller citation networks:
/// 2708 nodes, 7 classes and 1433 binary features.
pub fn citation_sized(seed: u64) -> Dataset {
    planted_partition(&SyntheticConfig {
        n_nodes: 2708,
        n_classes: 7,
        n_features: 1433,
        edges_per_node: 2,
        words_per_node: 18,
        seed,
        ..SyntheticConfig::default()
    })
    .expect("valid synthetic config")
}
