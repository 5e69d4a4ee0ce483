use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::{fmt17, ObsMode, TakeoffEnv, TerminationCause};
use crate::error::{Error, Result};
use crate::vehicle::ControlInput;

use super::agent::{Losses, SacAgent, SacConfig};
use super::buffer::{ReplayBuffer, Transition};

#[derive(Debug, Clone, PartialEq)]
pub struct EnvStep {
    pub observation: Vec<f64>,
    pub reward: f64,
    /// True terminal state: no bootstrapping past it.
    pub terminal: bool,
    /// Episode cut short by a time limit; the next state still bootstraps.
    pub truncated: bool,
    pub success: bool,
}

/// Episodic environment with actions in [−1, 1]ᵈ.
pub trait Environment {
    fn obs_dim(&self) -> usize;
    fn action_dim(&self) -> usize;
    fn reset(&mut self, seed: u64) -> Result<Vec<f64>>;
    fn step(&mut self, action: &[f64]) -> Result<EnvStep>;
}

/// Maps agent actions affinely onto the physical control box.
pub fn action_to_control(action: &[f64]) -> Result<ControlInput> {
    if action.len() != 2 || !action.iter().all(|a| (-1.0..=1.0).contains(a)) {
        return Err(Error::contract(format!("agent action {action:?} outside [-1, 1]²")));
    }
    Ok(ControlInput::from_normalized([(action[0] + 1.0) / 2.0, (action[1] + 1.0) / 2.0]))
}

/// The takeoff environment with three-slot observations.
#[derive(Debug, Clone)]
pub struct VanillaTakeoff {
    pub env: TakeoffEnv,
}

impl VanillaTakeoff {
    pub fn new(env: TakeoffEnv) -> Result<Self> {
        if env.mode() != ObsMode::Vanilla {
            return Err(Error::contract("vanilla training needs a vanilla-mode environment"));
        }
        Ok(VanillaTakeoff { env })
    }
}

pub(crate) fn env_step_from(r: &crate::env::StepResult) -> EnvStep {
    EnvStep {
        observation: r.observation.clone(),
        reward: r.reward,
        terminal: r.terminated() && r.cause != TerminationCause::Timeout,
        truncated: r.cause == TerminationCause::Timeout,
        success: r.cause == TerminationCause::TookOff,
    }
}

impl Environment for VanillaTakeoff {
    fn obs_dim(&self) -> usize {
        ObsMode::Vanilla.dim()
    }

    fn action_dim(&self) -> usize {
        2
    }

    fn reset(&mut self, seed: u64) -> Result<Vec<f64>> {
        Ok(self.env.reset(seed))
    }

    fn step(&mut self, action: &[f64]) -> Result<EnvStep> {
        let r = self.env.step(action_to_control(action)?)?;
        Ok(env_step_from(&r))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub step: u64,
    pub eval_return: f64,
    pub eval_successes: usize,
    pub losses: Option<Losses>,
    pub lr: f64,
}

pub fn metrics_csv(rows: &[MetricsRow]) -> String {
    let mut out = String::from("step,eval_return,eval_successes,actor_loss,critic1_loss,critic2_loss,lr\n");
    for r in rows {
        let (a, c1, c2) = match r.losses {
            Some(l) => (fmt17(l.actor), fmt17(l.critic1), fmt17(l.critic2)),
            None => (String::new(), String::new(), String::new()),
        };
        out.push_str(&format!(
            "{},{},{},{a},{c1},{c2},{}\n",
            r.step,
            fmt17(r.eval_return),
            r.eval_successes,
            fmt17(r.lr)
        ));
    }
    out
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    /// Stop as soon as any training or evaluation episode succeeds.
    pub stop_on_success: bool,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Agent restored to the best evaluation.
    pub best: SacAgent,
    pub best_return: f64,
    pub best_step: u64,
    /// Environment steps taken, warmup included.
    pub total_steps: u64,
    pub episodes: u64,
    pub training_successes: u64,
    pub first_success_step: Option<u64>,
    pub metrics: Vec<MetricsRow>,
}

/// Mean return and success count over deterministic episodes.
pub fn evaluate<E: Environment>(agent: &SacAgent, env: &mut E, episodes: usize, seed: u64) -> Result<(f64, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut total, mut successes) = (0.0, 0);
    for ep in 0..episodes {
        let mut obs = env.reset(seed.wrapping_add(ep as u64))?;
        loop {
            let a = agent.select_action(&obs, false, &mut rng)?;
            let s = env.step(&a)?;
            total += s.reward;
            obs = s.observation;
            if s.terminal || s.truncated {
                successes += usize::from(s.success);
                break;
            }
        }
    }
    Ok((total / episodes as f64, successes))
}

/// Off-policy loop: uniform-random warmup, then one stochastic action and
/// `updates_per_step` gradient updates per environment step. Evaluates at
/// step 0, every `eval_interval` steps and at the end, keeping the agent
/// with the highest mean evaluation return.
pub fn train<E: Environment + Clone>(
    env: &E,
    config: &SacConfig,
    seed: u64,
    options: &TrainOptions,
    mut on_eval: impl FnMut(&MetricsRow),
) -> Result<TrainOutcome> {
    config.validate()?;
    let mut train_env = env.clone();
    let mut eval_env = env.clone();
    let mut agent = SacAgent::new(env.obs_dim(), env.action_dim(), config.clone(), seed)?;
    let mut buffer = ReplayBuffer::new(config.capacity)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5ac0_5eed);
    let eval_seed = seed.wrapping_mul(0x9e37_79b9_7f4a_7c15);

    let (ret, succ) = evaluate(&agent, &mut eval_env, config.eval_episodes, eval_seed)?;
    let mut metrics = vec![MetricsRow { step: 0, eval_return: ret, eval_successes: succ, losses: None, lr: config.lr_at(0) }];
    on_eval(&metrics[0]);
    let mut best = (agent.clone(), ret, 0u64);
    let mut first_success = (succ > 0).then_some(0);

    let mut episodes = 0u64;
    let mut training_successes = 0u64;
    let mut obs = train_env.reset(rng.gen())?;
    let mut last_losses = None;
    let mut step = 0u64;
    while step < config.total_steps {
        let action = if step < config.warmup {
            (0..env.action_dim()).map(|_| rng.gen_range(-1.0..1.0)).collect()
        } else {
            agent.select_action(&obs, true, &mut rng)?
        };
        let s = train_env.step(&action)?;
        step += 1;
        buffer.push(Transition {
            observation: obs,
            action,
            reward: s.reward,
            next_observation: s.observation.clone(),
            terminal: s.terminal,
        });
        if s.terminal || s.truncated {
            episodes += 1;
            if s.success {
                training_successes += 1;
                first_success.get_or_insert(step);
            }
            obs = train_env.reset(rng.gen())?;
        } else {
            obs = s.observation;
        }

        if step > config.warmup && buffer.len() >= config.batch {
            agent.set_lr(config.lr_at(step - 1));
            for _ in 0..config.updates_per_step {
                let batch = buffer.sample(config.batch, &mut rng)?;
                last_losses = Some(agent.update(&batch, &mut rng)?);
            }
        }

        let stop = options.stop_on_success && first_success.is_some();
        if step % config.eval_interval == 0 || step == config.total_steps || stop {
            let (ret, succ) = evaluate(&agent, &mut eval_env, config.eval_episodes, eval_seed)?;
            let row = MetricsRow { step, eval_return: ret, eval_successes: succ, losses: last_losses, lr: config.lr_at(step) };
            on_eval(&row);
            metrics.push(row);
            if succ > 0 {
                first_success.get_or_insert(step);
            }
            if ret > best.1 {
                best = (agent.clone(), ret, step);
            }
            if stop {
                break;
            }
        }
    }
    Ok(TrainOutcome {
        best: best.0,
        best_return: best.1,
        best_step: best.2,
        total_steps: step,
        episodes,
        training_successes,
        first_success_step: first_success,
        metrics,
    })
}
