//! Causal trajectory transformer producing next-action proposals.

mod infer;
mod model;
mod train;

pub use infer::{InferenceState, KvCache};
pub use model::{
    causal_mask, positional_encoding, DropoutSource, ForwardOutput, ProposalDistribution, Transformer,
    TransformerConfig, LOGVAR_MAX, LOGVAR_MIN,
};
pub use train::{evaluate_nll, generate, loss_and_grads, nll_loss, train, GenerationMode, SequenceBatch, TrainReport};

use crate::checkpoint::Checkpoint;
use crate::error::Result;

pub const CHECKPOINT_KIND: &str = "transformer";

impl Transformer {
    pub fn to_checkpoint(&self, seed: u64, meta: serde_json::Value) -> Result<Checkpoint> {
        Ok(Checkpoint::new(CHECKPOINT_KIND, serde_json::to_value(&self.config)?, seed, meta, self.params.clone()))
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        ckpt.expect_kind(CHECKPOINT_KIND)?;
        let config: TransformerConfig = serde_json::from_value(ckpt.header.config.clone())?;
        Transformer::from_params(config, ckpt.params.clone())
    }
}

#[cfg(test)]
mod tests;
