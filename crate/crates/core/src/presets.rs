//! Desk-scale settings for a single-CPU machine. The `Default` impls of
//! each config carry the full-scale values.

use crate::reference::DatasetSettings;
use crate::sac::SacConfig;
use crate::transformer::TransformerConfig;

/// Full architecture; larger learning rate and smaller batches make up for
/// a 64-trajectory dataset (one optimizer step per epoch at batch 64).
pub fn desk_transformer() -> TransformerConfig {
    TransformerConfig { lr: 1e-3, batch: 16, ..TransformerConfig::default() }
}

/// 2×64 networks, batch 64 and a 3e5-step horizon.
pub fn desk_sac() -> SacConfig {
    SacConfig {
        hidden: vec![64, 64],
        batch: 64,
        total_steps: 300_000,
        capacity: 300_000,
        ..SacConfig::default()
    }
}

/// Toy double-integrator runs: 5e4 steps with evaluations every 2,500.
pub fn desk_sac_toy() -> SacConfig {
    SacConfig { total_steps: 50_000, eval_interval: 2_500, capacity: 100_000, ..desk_sac() }
}

pub fn desk_dataset() -> DatasetSettings {
    DatasetSettings::default()
}

/// 1,000 trajectories for the full-scale protocol.
pub fn full_dataset() -> DatasetSettings {
    DatasetSettings { n: 1000, ..DatasetSettings::default() }
}
