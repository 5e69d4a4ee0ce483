//! Episode runners and evaluation helpers shared by the CLI and the
//! acceptance runs.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::{EnvConfig, EpisodeRow, TakeoffEnv};
use crate::error::Result;
use crate::guided::GuidedTakeoff;
use crate::metrics::accuracy;
use crate::reference::rollout::sample_controls;
use crate::reference::{rollout_controls, BSplineControl, DatasetEntry, FlightCondition, OptimizeResult, Residuals};
use crate::sac::{action_to_control, SacAgent};
use crate::transformer::{generate, GenerationMode, Transformer};
use crate::vehicle::{ControlInput, VehicleConfig};

/// Steps `controls` through the environment until it terminates or the
/// sequence runs out.
pub fn simulate(env: &mut TakeoffEnv, controls: &[ControlInput]) -> Result<Vec<EpisodeRow>> {
    env.reset(0);
    let mut rows = Vec::new();
    for u in controls {
        let r = env.step(*u)?;
        let done = r.terminated();
        rows.push(EpisodeRow::from_step(*u, &r, None));
        if done {
            break;
        }
    }
    Ok(rows)
}

/// One deterministic episode of a vanilla agent.
pub fn vanilla_episode(agent: &SacAgent, env: &mut TakeoffEnv) -> Result<Vec<EpisodeRow>> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut obs = env.reset(0);
    let mut rows = Vec::new();
    loop {
        let u = action_to_control(&agent.select_action(&obs, false, &mut rng)?)?;
        let r = env.step(u)?;
        obs = r.observation.clone();
        let done = r.terminated();
        rows.push(EpisodeRow::from_step(u, &r, None));
        if done {
            return Ok(rows);
        }
    }
}

/// One deterministic episode of a guided agent, with proposal columns.
pub fn guided_episode(agent: &SacAgent, guided: &mut GuidedTakeoff) -> Result<Vec<EpisodeRow>> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut obs = guided.initial_observation(0);
    let mut rows = Vec::new();
    loop {
        let a = agent.select_action(&obs, false, &mut rng)?;
        let s = guided.guided_step([a[0], a[1]])?;
        obs = s.result.observation.clone();
        let done = s.result.terminated();
        rows.push(EpisodeRow::from_step(s.control, &s.result, s.proposal));
        if done {
            return Ok(rows);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationCheck {
    pub e_reference: f64,
    pub e_generated: f64,
    pub ra: f64,
    /// Whether the generated controls also meet the reference constraints.
    pub feasible: bool,
}

/// Generates from each entry's first action for as many steps as its
/// reference and compares rollout energies under the entry's condition.
pub fn generation_accuracy(
    model: &Transformer,
    entries: &[&DatasetEntry],
    vehicle: &VehicleConfig,
    env: &EnvConfig,
    mode: GenerationMode,
    seed: u64,
) -> Result<Vec<GenerationCheck>> {
    entries
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let seq = generate(model, e.controls[0], e.controls.len() - 1, mode, seed.wrapping_add(i as u64))?;
            let controls: Vec<ControlInput> = seq.iter().map(|n| ControlInput::from_normalized(*n)).collect();
            let r = rollout_controls(&controls, &e.condition, &e.condition.apply(vehicle), env);
            Ok(GenerationCheck {
                e_reference: e.energy_wh,
                e_generated: r.energy_wh,
                ra: accuracy(r.energy_wh, e.energy_wh)?,
                feasible: r.feasible(),
            })
        })
        .collect()
}

/// Serialized output of a reference optimization. Control samples are
/// normalized, one per environment step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceRecord {
    pub v: u32,
    pub condition: FlightCondition,
    pub energy_wh: f64,
    pub duration: f64,
    pub feasible: bool,
    pub residuals: Residuals,
    pub evaluations: usize,
    /// Best feasible energy after each outer iteration.
    pub history: Vec<Option<f64>>,
    pub control: BSplineControl,
    pub controls: Vec<[f64; 2]>,
}

impl ReferenceRecord {
    pub fn new(condition: FlightCondition, result: &OptimizeResult, dt: f64) -> Result<Self> {
        let controls = sample_controls(&result.control, dt)?.iter().map(|u| u.normalized()).collect();
        Ok(ReferenceRecord {
            v: 1,
            condition,
            energy_wh: result.energy_wh,
            duration: result.duration,
            feasible: result.feasible,
            residuals: result.residuals,
            evaluations: result.evaluations,
            history: result.history.iter().map(|h| h.is_finite().then_some(*h)).collect(),
            control: result.control.clone(),
            controls,
        })
    }

    pub fn physical_controls(&self) -> Vec<ControlInput> {
        self.controls.iter().map(|n| ControlInput::from_normalized(*n)).collect()
    }
}

/// Energy at the end of an episode, zero for an empty one.
pub fn episode_energy(rows: &[EpisodeRow]) -> f64 {
    rows.last().map_or(0.0, |r| r.energy_wh)
}
