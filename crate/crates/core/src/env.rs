//! Episodic takeoff environment: reset/step over the vehicle model with the
//! shaped penalties, termination rules and electrical energy accounting.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vehicle::{advance, chordwise_velocity, ControlInput, ForceBreakdown, KinematicState, VehicleConfig};

/// Sentinel filling the proposal slots before the transformer has spoken.
pub const START_TOKEN: f64 = 7.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvConfig {
    pub dt: f64,
    pub t_max: f64,
    pub target_altitude: f64,
    pub target_speed: f64,
    /// Relative weight ρ of the energy penalty.
    pub weight: f64,
    /// Concavity coefficient cc.
    pub concavity: f64,
    /// Global reward scale k.
    pub scale: f64,
    pub power_norm: f64,
    /// Initial (y, V_x, V_y).
    pub initial: [f64; 3],
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            dt: 0.1,
            t_max: 40.0,
            target_altitude: 305.0,
            target_speed: 67.0,
            weight: 2.0,
            concavity: 0.5,
            scale: 0.05,
            power_norm: 310_000.0,
            initial: [0.1, 0.1, 0.1],
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.dt,
            self.t_max,
            self.target_altitude,
            self.target_speed,
            self.weight,
            self.concavity,
            self.scale,
            self.power_norm,
        ];
        if all.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::contract("environment parameters must be positive"));
        }
        if !(self.initial[0] >= 0.0 && self.initial.iter().all(|v| v.is_finite())) {
            return Err(Error::contract("initial state must be finite with y ≥ 0"));
        }
        let n = self.t_max / self.dt;
        if (n - n.round()).abs() > 1e-9 {
            return Err(Error::contract("t_max must be an integral number of time steps"));
        }
        Ok(())
    }

    pub fn max_steps(&self) -> usize {
        (self.t_max / self.dt).round() as usize
    }

    fn shaped(&self, value: f64, target: f64) -> f64 {
        let cc = self.concavity;
        let ecc = cc.exp();
        self.scale * ecc * ((-cc * (1.0 - value / target).abs()).exp() - 1.0)
            / (3.0 * (ecc - 1.0) * (self.weight + 1.0))
    }

    pub fn altitude_reward(&self, y: f64) -> f64 {
        self.shaped(y, self.target_altitude)
    }

    pub fn speed_reward(&self, vx: f64) -> f64 {
        self.shaped(vx, self.target_speed)
    }

    pub fn power_reward(&self, power: f64) -> f64 {
        -self.weight * self.scale * power / (self.power_norm * (self.weight + 1.0))
    }

    /// Penalty for ending the episode on a violated constraint at time `t`.
    pub fn violation_penalty(&self, t: f64) -> f64 {
        -10.0 * self.scale * (self.t_max - t)
    }

    /// Most negative per-step reward for powers up to `p_max`, terminal
    /// penalty excluded.
    pub fn step_reward_floor(&self, p_max: f64) -> f64 {
        let ecc = self.concavity.exp();
        let shaped_floor = -self.scale * ecc / (3.0 * (ecc - 1.0) * (self.weight + 1.0));
        2.0 * shaped_floor + self.power_reward(p_max)
    }
}

/// Electrical energy integrator shared by the environment and the
/// reference rollout. Accumulates joules; Wh only on read.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EnergyMeter {
    joules: f64,
}

impl EnergyMeter {
    pub fn add(&mut self, power: f64, dt: f64) {
        self.joules += power * dt;
    }

    pub fn joules(&self) -> f64 {
        self.joules
    }

    pub fn wh(&self) -> f64 {
        self.joules / 3600.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationCause {
    None,
    TookOff,
    Ground,
    NegativeFreestream,
    Timeout,
}

impl TerminationCause {
    pub fn as_str(&self) -> &'static str {
        match self {
            TerminationCause::None => "none",
            TerminationCause::TookOff => "took_off",
            TerminationCause::Ground => "ground",
            TerminationCause::NegativeFreestream => "negative_freestream",
            TerminationCause::Timeout => "timeout",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RewardParts {
    pub altitude: f64,
    pub speed: f64,
    pub power: f64,
    pub terminal: f64,
}

impl RewardParts {
    pub fn total(&self) -> f64 {
        self.altitude + self.speed + self.power + self.terminal
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObsMode {
    /// (y, V_x, V_y)
    Vanilla,
    /// (y, V_x, V_y, μ_P, μ_θ, σ²_P, σ²_θ)
    Guided,
}

impl ObsMode {
    pub fn dim(&self) -> usize {
        match self {
            ObsMode::Vanilla => 3,
            ObsMode::Guided => 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: Vec<f64>,
    pub reward: f64,
    pub parts: RewardParts,
    pub cause: TerminationCause,
    pub energy_wh: f64,
    pub state: KinematicState,
    pub forces: ForceBreakdown,
}

impl StepResult {
    pub fn terminated(&self) -> bool {
        self.cause != TerminationCause::None
    }
}

#[derive(Debug, Clone)]
pub struct TakeoffEnv {
    vehicle: VehicleConfig,
    config: EnvConfig,
    mode: ObsMode,
    state: KinematicState,
    meter: EnergyMeter,
    proposal: [f64; 4],
    steps: usize,
    done: bool,
}

impl TakeoffEnv {
    pub fn new(vehicle: VehicleConfig, config: EnvConfig, mode: ObsMode) -> Result<Self> {
        vehicle.validate()?;
        config.validate()?;
        let [y, vx, vy] = config.initial;
        Ok(TakeoffEnv {
            vehicle,
            config,
            mode,
            state: KinematicState::new(y, vx, vy),
            meter: EnergyMeter::default(),
            proposal: [START_TOKEN; 4],
            steps: 0,
            done: false,
        })
    }

    pub fn vehicle(&self) -> &VehicleConfig {
        &self.vehicle
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn mode(&self) -> ObsMode {
        self.mode
    }

    pub fn state(&self) -> &KinematicState {
        &self.state
    }

    pub fn energy_wh(&self) -> f64 {
        self.meter.wh()
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    /// The dynamics are deterministic; the seed is accepted for interface
    /// symmetry with stochastic environments.
    pub fn reset(&mut self, _seed: u64) -> Vec<f64> {
        let [y, vx, vy] = self.config.initial;
        self.state = KinematicState::new(y, vx, vy);
        self.meter = EnergyMeter::default();
        self.proposal = [START_TOKEN; 4];
        self.steps = 0;
        self.done = false;
        self.observation()
    }

    pub fn observation(&self) -> Vec<f64> {
        let mut obs = vec![self.state.y, self.state.vx, self.state.vy];
        if self.mode == ObsMode::Guided {
            obs.extend_from_slice(&self.proposal);
        }
        obs
    }

    /// Writes normalized proposal parameters into the observation tail.
    pub fn set_proposal(&mut self, mean: [f64; 2], var: [f64; 2]) -> Result<Vec<f64>> {
        if !(var[0] >= 0.0 && var[1] >= 0.0) {
            return Err(Error::contract(format!("proposal variance must be non-negative, got {var:?}")));
        }
        self.proposal = [mean[0], mean[1], var[0], var[1]];
        Ok(self.observation())
    }

    pub fn reward_components(&self, state: &KinematicState, u: &ControlInput) -> RewardParts {
        RewardParts {
            altitude: self.config.altitude_reward(state.y),
            speed: self.config.speed_reward(state.vx),
            power: self.config.power_reward(u.power),
            terminal: 0.0,
        }
    }

    pub fn step(&mut self, u: ControlInput) -> Result<StepResult> {
        if self.done {
            return Err(Error::contract("step called on a terminated episode"));
        }
        if !u.in_bounds() {
            return Err(Error::contract(format!("action out of bounds: {u:?}")));
        }
        let t0 = self.state.t;
        let (mut next, forces) = advance(&self.state, &u, self.config.dt, &self.vehicle)?;
        self.steps += 1;
        next.t = self.steps as f64 * self.config.dt;
        if ![next.x, next.y, next.vx, next.vy].iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("vehicle state".into()));
        }
        self.meter.add(u.power, self.config.dt);

        let mut parts = self.reward_components(&next, &u);
        let cause = if next.y < 0.0 {
            TerminationCause::Ground
        } else if chordwise_velocity(next.vx, next.vy, u.theta) < 0.0 {
            TerminationCause::NegativeFreestream
        } else if next.y >= self.config.target_altitude && next.vx >= self.config.target_speed {
            TerminationCause::TookOff
        } else if self.steps >= self.config.max_steps() {
            TerminationCause::Timeout
        } else {
            TerminationCause::None
        };
        if matches!(cause, TerminationCause::Ground | TerminationCause::NegativeFreestream) {
            parts.terminal = self.config.violation_penalty(t0);
        }
        self.state = next;
        self.done = cause != TerminationCause::None;
        Ok(StepResult {
            observation: self.observation(),
            reward: parts.total(),
            parts,
            cause,
            energy_wh: self.meter.wh(),
            state: next,
            forces,
        })
    }
}

/// Proposal columns appended to guided episode logs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProposalRecord {
    pub mean: [f64; 2],
    pub var: [f64; 2],
    pub z: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRow {
    pub state: KinematicState,
    pub control: ControlInput,
    pub reward: f64,
    pub parts: RewardParts,
    pub energy_wh: f64,
    pub cause: TerminationCause,
    pub proposal: Option<ProposalRecord>,
}

impl EpisodeRow {
    pub fn from_step(u: ControlInput, r: &StepResult, proposal: Option<ProposalRecord>) -> Self {
        EpisodeRow {
            state: r.state,
            control: u,
            reward: r.reward,
            parts: r.parts,
            energy_wh: r.energy_wh,
            cause: r.cause,
            proposal,
        }
    }
}

/// Scientific notation with 17 significant digits.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Renders an episode as CSV. Guided columns are emitted when any row
/// carries a proposal.
pub fn episode_csv(rows: &[EpisodeRow]) -> String {
    let guided = rows.iter().any(|r| r.proposal.is_some());
    let mut out = String::from("t,x,y,v_x,v_y,P,theta,reward,R_y,R_Vx,R_P,energy_Wh,cause");
    if guided {
        out.push_str(",mu_P,mu_theta,var_P,var_theta,z_P,z_theta");
    }
    out.push('\n');
    for r in rows {
        let s = &r.state;
        let nums = [
            s.t,
            s.x,
            s.y,
            s.vx,
            s.vy,
            r.control.power,
            r.control.theta,
            r.reward,
            r.parts.altitude,
            r.parts.speed,
            r.parts.power,
            r.energy_wh,
        ];
        let line: Vec<String> = nums.iter().map(|v| fmt17(*v)).collect();
        out.push_str(&line.join(","));
        let _ = write!(out, ",{}", r.cause.as_str());
        if guided {
            let p = r.proposal.unwrap_or(ProposalRecord { mean: [f64::NAN; 2], var: [f64::NAN; 2], z: [f64::NAN; 2] });
            for v in [p.mean[0], p.mean[1], p.var[0], p.var[1], p.z[0], p.z[1]] {
                let _ = write!(out, ",{}", fmt17(v));
            }
        }
        out.push('\n');
    }
    out
}
