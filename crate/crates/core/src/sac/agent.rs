use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::autodiff::{softplus, Adam, ParamSet, Tape, Tensor, Var};
use crate::error::{Error, Result};

use super::buffer::Batch;
use super::mlp::Mlp;

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;
const HALF_LN_2PI: f64 = 0.9189385332046727;
const LN_2: f64 = std::f64::consts::LN_2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SacConfig {
    pub hidden: Vec<usize>,
    pub lr: f64,
    /// Anneal the learning rate linearly to zero over `total_steps`.
    pub anneal: bool,
    pub batch: usize,
    pub tau: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub capacity: usize,
    pub total_steps: u64,
    pub eval_interval: u64,
    pub eval_episodes: usize,
    pub warmup: u64,
    pub updates_per_step: usize,
}

impl Default for SacConfig {
    fn default() -> Self {
        SacConfig {
            hidden: vec![512, 512, 512],
            lr: 4e-4,
            anneal: true,
            batch: 256,
            tau: 5e-3,
            gamma: 0.98,
            alpha: 0.01,
            capacity: 5_000_000,
            total_steps: 5_000_000,
            eval_interval: 10_000,
            eval_episodes: 5,
            warmup: 1000,
            updates_per_step: 1,
        }
    }
}

impl SacConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::contract(format!("tau {} outside (0, 1]", self.tau)));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::contract(format!("gamma {} outside (0, 1)", self.gamma)));
        }
        if self.capacity < self.batch || self.batch == 0 {
            return Err(Error::contract(format!("capacity {} below batch {}", self.capacity, self.batch)));
        }
        if !(self.lr > 0.0) || !(self.alpha >= 0.0) || self.hidden.contains(&0) {
            return Err(Error::contract("lr must be positive, alpha non-negative, hidden widths positive"));
        }
        if self.total_steps == 0 || self.eval_interval == 0 || self.eval_episodes == 0 {
            return Err(Error::contract("total_steps, eval_interval and eval_episodes must be positive"));
        }
        Ok(())
    }

    /// Learning rate in effect after `step` environment steps.
    pub fn lr_at(&self, step: u64) -> f64 {
        if self.anneal {
            self.lr * (1.0 - step as f64 / self.total_steps as f64).max(0.0)
        } else {
            self.lr
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Losses {
    pub actor: f64,
    pub critic1: f64,
    pub critic2: f64,
}

#[derive(Debug, Clone)]
pub struct SacAgent {
    pub config: SacConfig,
    pub obs_dim: usize,
    pub act_dim: usize,
    pub actor: Mlp,
    pub critic1: Mlp,
    pub critic2: Mlp,
    pub target1: Mlp,
    pub target2: Mlp,
    actor_opt: Adam,
    critic1_opt: Adam,
    critic2_opt: Adam,
}

/// Tape nodes of a reparameterized squashed-Gaussian draw.
struct Sampled {
    action: Var,
    log_prob: Var,
}

/// Log-density of tanh(u) for u ~ N(μ, σ²) in one dimension, evaluated at
/// the pre-squash value u.
pub fn squashed_log_prob(u: f64, mean: f64, log_std: f64) -> f64 {
    let eps = (u - mean) / log_std.exp();
    -0.5 * eps * eps - HALF_LN_2PI - log_std - 2.0 * (LN_2 - u - softplus(-2.0 * u))
}

impl SacAgent {
    pub fn new(obs_dim: usize, act_dim: usize, config: SacConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let sizes = |input: usize, output: usize| {
            let mut s = vec![input];
            s.extend(&config.hidden);
            s.push(output);
            s
        };
        let actor = Mlp::new("actor", &sizes(obs_dim, 2 * act_dim), seed)?;
        let critic1 = Mlp::new("critic1", &sizes(obs_dim + act_dim, 1), seed.wrapping_add(1))?;
        let critic2 = Mlp::new("critic2", &sizes(obs_dim + act_dim, 1), seed.wrapping_add(2))?;
        let lr = config.lr;
        Ok(SacAgent {
            actor_opt: Adam::new(&actor.params, lr),
            critic1_opt: Adam::new(&critic1.params, lr),
            critic2_opt: Adam::new(&critic2.params, lr),
            target1: critic1.clone(),
            target2: critic2.clone(),
            actor,
            critic1,
            critic2,
            config,
            obs_dim,
            act_dim,
        })
    }

    pub fn set_lr(&mut self, lr: f64) {
        self.actor_opt.lr = lr;
        self.critic1_opt.lr = lr;
        self.critic2_opt.lr = lr;
    }

    /// Gaussian parameters (mean, clamped log σ) of the actor for one observation.
    pub fn policy(&self, obs: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        if obs.len() != self.obs_dim {
            return Err(Error::contract(format!("observation has {} entries, expected {}", obs.len(), self.obs_dim)));
        }
        let out = self.actor.infer(obs, 1)?;
        let mean = out[..self.act_dim].to_vec();
        let log_std = out[self.act_dim..].iter().map(|v| v.clamp(LOG_STD_MIN, LOG_STD_MAX)).collect();
        Ok((mean, log_std))
    }

    /// Stochastic mode samples u ~ N(μ, σ²) then squashes; deterministic mode
    /// returns tanh(μ).
    pub fn select_action(&self, obs: &[f64], stochastic: bool, rng: &mut impl Rng) -> Result<Vec<f64>> {
        let (mean, log_std) = self.policy(obs)?;
        let action: Vec<f64> = mean
            .iter()
            .zip(&log_std)
            .map(|(m, ls)| {
                let u = if stochastic { m + ls.exp() * rng.sample::<f64, _>(StandardNormal) } else { *m };
                // tanh rounds to ±1 beyond |u| ≈ 19; keep the result strictly inside
                u.tanh().clamp(-1.0 + f64::EPSILON, 1.0 - f64::EPSILON)
            })
            .collect();
        if !action.iter().all(|a| a.is_finite()) {
            return Err(Error::NonFinite("policy output".into()));
        }
        Ok(action)
    }

    fn sample_on_tape(&self, tape: &mut Tape, w: &[Var], obs: Var, eps: &Tensor) -> Result<Sampled> {
        let a = self.act_dim;
        let out = self.actor.forward(tape, w, obs)?;
        let mean = tape.slice_cols(out, 0, a)?;
        let raw = tape.slice_cols(out, a, a)?;
        let log_std = tape.clamp(raw, LOG_STD_MIN, LOG_STD_MAX);
        let std = tape.exp(log_std);
        let e = tape.leaf(eps.clone())?;
        let noise = tape.mul(std, e)?;
        let u = tape.add(mean, noise)?;
        let action = tape.tanh(u);
        // log(1 − tanh²u) = 2(ln 2 − u − softplus(−2u))
        let m2u = tape.scale(u, -2.0);
        let sp = tape.softplus(m2u);
        let u_sp = tape.add(u, sp)?;
        let base: Vec<f64> = eps.data().iter().map(|x| -0.5 * x * x - HALF_LN_2PI - 2.0 * LN_2).collect();
        let base = Tensor::new(eps.shape().to_vec(), base)?;
        let twice = tape.scale(u_sp, 2.0);
        let lp = tape.sub(twice, log_std)?;
        let lp = tape.add_const(lp, &base)?;
        let log_prob = tape.sum_cols(lp)?;
        Ok(Sampled { action, log_prob })
    }

    fn noise(&self, rows: usize, rng: &mut impl Rng) -> Tensor {
        let data = (0..rows * self.act_dim).map(|_| rng.sample(StandardNormal)).collect();
        Tensor::new(vec![rows, self.act_dim], data).expect("shape")
    }

    /// Soft Bellman targets r + γ(1 − d)(min Q' − α log π) with fresh next actions.
    pub fn critic_targets(&self, batch: &Batch, rng: &mut impl Rng) -> Result<Vec<f64>> {
        let n = batch.len();
        let mut tape = Tape::new();
        let wa = self.actor.attach_frozen(&mut tape)?;
        let next = tape.leaf(batch.next_observations.clone())?;
        let eps = self.noise(n, rng);
        let s = self.sample_on_tape(&mut tape, &wa, next, &eps)?;
        let sa = tape.concat_cols(&[next, s.action])?;
        let w1 = self.target1.attach_frozen(&mut tape)?;
        let w2 = self.target2.attach_frozen(&mut tape)?;
        let q1 = self.target1.forward(&mut tape, &w1, sa)?;
        let q2 = self.target2.forward(&mut tape, &w2, sa)?;
        let (q1, q2, lp) = (tape.value(q1).data(), tape.value(q2).data(), tape.value(s.log_prob).data());
        Ok((0..n)
            .map(|i| {
                let cont = if batch.terminals[i] { 0.0 } else { 1.0 };
                batch.rewards[i] + self.config.gamma * cont * (q1[i].min(q2[i]) - self.config.alpha * lp[i])
            })
            .collect())
    }

    /// Mean squared error of a critic against fixed targets, with gradients.
    pub fn critic_loss_and_grads(critic: &Mlp, batch: &Batch, targets: &Tensor) -> Result<(f64, Vec<Tensor>)> {
        let mut tape = Tape::new();
        let w = critic.attach(&mut tape)?;
        let obs = tape.leaf(batch.observations.clone())?;
        let act = tape.leaf(batch.actions.clone())?;
        let sa = tape.concat_cols(&[obs, act])?;
        let q = critic.forward(&mut tape, &w, sa)?;
        let y = tape.leaf(targets.clone())?;
        let d = tape.sub(q, y)?;
        let sq = tape.square(d);
        let loss = tape.mean(sq);
        let mut grads = critic.params.zero_grads();
        tape.backward(loss)?.accumulate_params(&mut grads);
        Ok((tape.value(loss).item(), grads))
    }

    fn critic_step(critic: &mut Mlp, opt: &mut Adam, batch: &Batch, targets: &Tensor) -> Result<f64> {
        let (value, grads) = Self::critic_loss_and_grads(critic, batch, targets)?;
        if !value.is_finite() {
            return Err(Error::NonFinite("critic loss".into()));
        }
        opt.step(&mut critic.params, &grads)?;
        Ok(value)
    }

    /// Actor loss mean(α log π(ã|s) − min Q(s, ã)) and its gradient.
    pub fn actor_loss_and_grads(&self, observations: &Tensor, eps: &Tensor) -> Result<(f64, Vec<Tensor>)> {
        let mut tape = Tape::new();
        let wa = self.actor.attach(&mut tape)?;
        let obs = tape.leaf(observations.clone())?;
        let s = self.sample_on_tape(&mut tape, &wa, obs, eps)?;
        let sa = tape.concat_cols(&[obs, s.action])?;
        let w1 = self.critic1.attach_frozen(&mut tape)?;
        let w2 = self.critic2.attach_frozen(&mut tape)?;
        let q1 = self.critic1.forward(&mut tape, &w1, sa)?;
        let q2 = self.critic2.forward(&mut tape, &w2, sa)?;
        let q = tape.minimum(q1, q2)?;
        let ent = tape.scale(s.log_prob, self.config.alpha);
        let per = tape.sub(ent, q)?;
        let loss = tape.mean(per);
        let mut grads = self.actor.params.zero_grads();
        tape.backward(loss)?.accumulate_params(&mut grads);
        Ok((tape.value(loss).item(), grads))
    }

    /// One update of both critics, the actor and the target networks.
    pub fn update(&mut self, batch: &Batch, rng: &mut impl Rng) -> Result<Losses> {
        if batch.is_empty() {
            return Err(Error::contract("update needs a non-empty batch"));
        }
        let y = self.critic_targets(batch, rng)?;
        let y = Tensor::new(vec![batch.len(), 1], y)?;
        let critic1 = Self::critic_step(&mut self.critic1, &mut self.critic1_opt, batch, &y)?;
        let critic2 = Self::critic_step(&mut self.critic2, &mut self.critic2_opt, batch, &y)?;
        let eps = self.noise(batch.len(), rng);
        let (actor, grads) = self.actor_loss_and_grads(&batch.observations, &eps)?;
        if !actor.is_finite() {
            return Err(Error::NonFinite("actor loss".into()));
        }
        self.actor_opt.step(&mut self.actor.params, &grads)?;
        self.soft_update(self.config.tau)?;
        Ok(Losses { actor, critic1, critic2 })
    }

    pub fn soft_update(&mut self, tau: f64) -> Result<()> {
        self.critic1.params.soft_update_into(&mut self.target1.params, tau)?;
        self.critic2.params.soft_update_into(&mut self.target2.params, tau)
    }

    /// Every network's weights in one set (actor, critics, targets).
    pub fn all_params(&self) -> ParamSet {
        let mut out = ParamSet::new();
        for (prefix, net) in [
            ("", &self.actor),
            ("", &self.critic1),
            ("", &self.critic2),
            ("target.", &self.target1),
            ("target.", &self.target2),
        ] {
            for (name, t) in net.params.names().iter().zip(net.params.tensors()) {
                out.push(format!("{prefix}{name}"), t.clone());
            }
        }
        out
    }

    /// Restores weights written by [`SacAgent::all_params`]; optimizer
    /// state starts fresh.
    pub fn load_params(&mut self, params: &ParamSet) -> Result<()> {
        if params.names() != self.all_params().names() {
            return Err(Error::Format("agent parameter names do not match the configuration".into()));
        }
        let mut k = 0;
        for net in [&mut self.actor, &mut self.critic1, &mut self.critic2, &mut self.target1, &mut self.target2] {
            for i in 0..net.params.len() {
                let src = params.get(k);
                if src.shape() != net.params.get(i).shape() {
                    return Err(Error::Format(format!("shape mismatch for {}", params.names()[k])));
                }
                *net.params.get_mut(i) = src.clone();
                k += 1;
            }
        }
        Ok(())
    }
}
