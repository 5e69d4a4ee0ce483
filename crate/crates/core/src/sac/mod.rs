//! Soft actor-critic with a squashed-Gaussian actor and twin critics.

mod agent;
mod buffer;
mod mlp;
mod toy;
mod train;

pub use agent::{squashed_log_prob, Losses, SacAgent, SacConfig, LOG_STD_MAX, LOG_STD_MIN};
pub use buffer::{Batch, ReplayBuffer, Transition};
pub use mlp::Mlp;
pub use toy::DoubleIntegrator;
pub use train::{
    action_to_control, evaluate, metrics_csv, train, EnvStep, Environment, MetricsRow, TrainOptions, TrainOutcome,
    VanillaTakeoff,
};

use crate::checkpoint::Checkpoint;
use crate::error::{Error, Result};

pub const CHECKPOINT_KIND: &str = "sac";

impl SacAgent {
    pub fn to_checkpoint(&self, seed: u64, meta: serde_json::Value) -> Result<Checkpoint> {
        let config = serde_json::json!({
            "sac": self.config,
            "obs_dim": self.obs_dim,
            "act_dim": self.act_dim,
        });
        Ok(Checkpoint::new(CHECKPOINT_KIND, config, seed, meta, self.all_params()))
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        ckpt.expect_kind(CHECKPOINT_KIND)?;
        let c = &ckpt.header.config;
        let config: SacConfig = serde_json::from_value(c["sac"].clone())?;
        let dim = |k: &str| {
            c[k].as_u64().map(|v| v as usize).ok_or_else(|| Error::Format(format!("checkpoint config lacks {k}")))
        };
        let mut agent = SacAgent::new(dim("obs_dim")?, dim("act_dim")?, config, 0)?;
        agent.load_params(&ckpt.params)?;
        Ok(agent)
    }
}
