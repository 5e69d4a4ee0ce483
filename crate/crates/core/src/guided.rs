//! Transformer-guided control: the agent picks z-scores inside the frozen
//! transformer's next-action proposals.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::env::{ObsMode, ProposalRecord, StepResult, TakeoffEnv, TerminationCause, START_TOKEN};
use crate::error::{Error, Result};
use crate::sac::{self, EnvStep, Environment, MetricsRow, SacConfig, TrainOptions, TrainOutcome};
use crate::transformer::{KvCache, ProposalDistribution, Transformer};
use crate::vehicle::ControlInput;

/// Normalized action selected by z-scores. Without a proposal (step 0) z
/// maps affinely onto [0, 1]; afterwards the action is μ + z·σ clamped to
/// [0, 1].
pub fn map_z_to_action(z: [f64; 2], proposal: Option<&ProposalDistribution>) -> Result<[f64; 2]> {
    if !z.iter().all(|v| (-1.0..=1.0).contains(v)) {
        return Err(Error::contract(format!("z-scores {z:?} outside [-1, 1]")));
    }
    Ok(match proposal {
        None => [(z[0] + 1.0) / 2.0, (z[1] + 1.0) / 2.0],
        Some(p) => {
            let pick = |d: usize| (p.mean[d] + z[d] * p.var[d].sqrt()).clamp(0.0, 1.0);
            [pick(0), pick(1)]
        }
    })
}

/// Whether a normalized action lies in the μ ± σ interval with both ends
/// clamped to [0, 1].
pub fn within_envelope(action: [f64; 2], p: &ProposalDistribution) -> bool {
    (0..2).all(|d| {
        let s = p.var[d].sqrt();
        action[d] >= (p.mean[d] - s).clamp(0.0, 1.0) && action[d] <= (p.mean[d] + s).clamp(0.0, 1.0)
    })
}

/// Shared tally of executed actions checked against the proposal envelope.
/// Clones of a [`GuidedTakeoff`] report into the same counters.
#[derive(Debug, Default)]
pub struct EnvelopeAudit {
    pub checked: AtomicU64,
    pub violations: AtomicU64,
}

impl EnvelopeAudit {
    pub fn checked(&self) -> u64 {
        self.checked.load(Ordering::Relaxed)
    }

    pub fn violations(&self) -> u64 {
        self.violations.load(Ordering::Relaxed)
    }
}

/// One executed step of a guided episode.
#[derive(Debug, Clone, PartialEq)]
pub struct GuidedStep {
    pub control: ControlInput,
    pub normalized: [f64; 2],
    pub result: StepResult,
    pub proposal: Option<ProposalRecord>,
}

/// Guided takeoff episode: action history, running proposal and the
/// environment in seven-slot observation mode.
#[derive(Debug, Clone)]
pub struct GuidedTakeoff {
    env: TakeoffEnv,
    model: Arc<Transformer>,
    cache: KvCache,
    history: Vec<[f64; 2]>,
    proposal: Option<ProposalDistribution>,
    audit: Arc<EnvelopeAudit>,
}

impl GuidedTakeoff {
    pub fn new(env: TakeoffEnv, model: Arc<Transformer>) -> Result<Self> {
        if env.mode() != ObsMode::Guided {
            return Err(Error::contract("guided control needs a guided-mode environment"));
        }
        if env.config().max_steps() > model.config.max_len {
            return Err(Error::contract(format!(
                "episodes of {} steps exceed the transformer context of {}",
                env.config().max_steps(),
                model.config.max_len
            )));
        }
        let cache = KvCache::new(&model);
        Ok(GuidedTakeoff { env, model, cache, history: Vec::new(), proposal: None, audit: Arc::default() })
    }

    pub fn env(&self) -> &TakeoffEnv {
        &self.env
    }

    pub fn model(&self) -> &Arc<Transformer> {
        &self.model
    }

    pub fn history(&self) -> &[[f64; 2]] {
        &self.history
    }

    pub fn proposal(&self) -> Option<&ProposalDistribution> {
        self.proposal.as_ref()
    }

    pub fn audit(&self) -> &Arc<EnvelopeAudit> {
        &self.audit
    }

    /// Resets the environment; proposal slots hold the start token.
    pub fn initial_observation(&mut self, seed: u64) -> Vec<f64> {
        self.history.clear();
        self.cache.clear();
        self.proposal = None;
        let obs = self.env.reset(seed);
        debug_assert!(obs[3..].iter().all(|v| *v == START_TOKEN));
        obs
    }

    /// Executes the action chosen by `z`, appends it to the history and
    /// writes the next proposal into the observation.
    pub fn guided_step(&mut self, z: [f64; 2]) -> Result<GuidedStep> {
        let normalized = map_z_to_action(z, self.proposal.as_ref())?;
        if let Some(p) = &self.proposal {
            self.audit.checked.fetch_add(1, Ordering::Relaxed);
            if !within_envelope(normalized, p) {
                self.audit.violations.fetch_add(1, Ordering::Relaxed);
            }
        }
        let control = ControlInput::from_normalized(normalized);
        let record = self.proposal.map(|p| ProposalRecord { mean: p.mean, var: p.var, z });
        let mut result = self.env.step(control)?;
        self.history.push(control.normalized());
        if !result.terminated() {
            let p = self.cache.push(&self.model, control.normalized())?;
            result.observation = self.env.set_proposal(p.mean, p.var)?;
            self.proposal = Some(p);
        }
        Ok(GuidedStep { control, normalized, result, proposal: record })
    }
}

impl Environment for GuidedTakeoff {
    fn obs_dim(&self) -> usize {
        ObsMode::Guided.dim()
    }

    fn action_dim(&self) -> usize {
        2
    }

    fn reset(&mut self, seed: u64) -> Result<Vec<f64>> {
        Ok(self.initial_observation(seed))
    }

    fn step(&mut self, action: &[f64]) -> Result<EnvStep> {
        let z: [f64; 2] =
            action.try_into().map_err(|_| Error::contract(format!("z action needs 2 entries, got {}", action.len())))?;
        let s = self.guided_step(z)?;
        let r = &s.result;
        Ok(EnvStep {
            observation: r.observation.clone(),
            reward: r.reward,
            terminal: r.terminated() && r.cause != TerminationCause::Timeout,
            truncated: r.cause == TerminationCause::Timeout,
            success: r.cause == TerminationCause::TookOff,
        })
    }
}

/// SAC over z-actions with the transformer frozen behind a shared handle.
pub fn train_guided(
    env: TakeoffEnv,
    model: Arc<Transformer>,
    config: &SacConfig,
    seed: u64,
    options: &TrainOptions,
    on_eval: impl FnMut(&MetricsRow),
) -> Result<(TrainOutcome, Arc<EnvelopeAudit>)> {
    let guided = GuidedTakeoff::new(env, model)?;
    let audit = guided.audit.clone();
    let outcome = sac::train(&guided, config, seed, options, on_eval)?;
    Ok((outcome, audit))
}
