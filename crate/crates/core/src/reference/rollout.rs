//! Direct-shooting rollout of a spline control profile.

use serde::{Deserialize, Serialize};

use super::bspline::BSplineControl;
use crate::env::{EnergyMeter, EnvConfig};
use crate::error::{Error, Result};
use crate::vehicle::{advance, chordwise_velocity, ControlInput, KinematicState, VehicleConfig};

/// One point of the flight-condition space used for dataset generation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlightCondition {
    /// Maximum effective angle of attack (deg).
    pub alpha_max_deg: f64,
    /// Maximum acceleration magnitude (g).
    pub a_max_g: f64,
    /// Propeller–wing interaction factor.
    pub k_w: f64,
    /// Electrical efficiency.
    pub eta: f64,
    pub s_ref: f64,
    /// Enforce the angle-of-attack and acceleration limits at every step.
    pub path_constraints: bool,
}

pub const CONDITION_BOUNDS: [(f64, f64); 5] = [(10.0, 15.0), (0.2, 0.4), (0.3, 1.0), (0.7, 0.9), (0.9, 1.0)];

impl FlightCondition {
    /// Takeoff-only case with nominal interaction, efficiency and area.
    pub fn verification() -> Self {
        FlightCondition { alpha_max_deg: 15.0, a_max_g: 0.4, k_w: 1.0, eta: 0.9, s_ref: 1.0, path_constraints: false }
    }

    pub fn from_array(v: [f64; 5], path_constraints: bool) -> Self {
        FlightCondition { alpha_max_deg: v[0], a_max_g: v[1], k_w: v[2], eta: v[3], s_ref: v[4], path_constraints }
    }

    pub fn as_array(&self) -> [f64; 5] {
        [self.alpha_max_deg, self.a_max_g, self.k_w, self.eta, self.s_ref]
    }

    pub fn validate(&self) -> Result<()> {
        for (v, (lo, hi)) in self.as_array().iter().zip(CONDITION_BOUNDS) {
            if !(*v >= lo && *v <= hi) {
                return Err(Error::contract(format!("flight condition value {v} outside [{lo}, {hi}]")));
            }
        }
        Ok(())
    }

    pub fn apply(&self, base: &VehicleConfig) -> VehicleConfig {
        VehicleConfig { wing_interaction: self.k_w, efficiency: self.eta, s_ref: self.s_ref, ..base.clone() }
    }
}

/// Constraint violations in physical units; zero when satisfied.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    /// 305 − y_final (m)
    pub altitude: f64,
    /// 67 − V_x,final (m/s)
    pub speed: f64,
    /// −min y (m)
    pub ground: f64,
    /// −min chordwise inflow (m/s)
    pub freestream: f64,
    /// max α_EFS − α_max (rad)
    pub alpha: f64,
    /// max |a| − a_max·g (m/s²)
    pub accel: f64,
}

pub const FEASIBILITY_TOL: f64 = 1e-3;
pub const GROUND_TOL: f64 = 1e-6;

impl Residuals {
    pub fn feasible(&self) -> bool {
        self.altitude <= FEASIBILITY_TOL
            && self.speed <= FEASIBILITY_TOL
            && self.ground <= GROUND_TOL
            && self.freestream <= 0.0
            && self.alpha <= FEASIBILITY_TOL
            && self.accel <= FEASIBILITY_TOL
    }

    pub fn as_array(&self) -> [f64; 6] {
        [self.altitude, self.speed, self.ground, self.freestream, self.alpha, self.accel]
    }

    fn failed() -> Self {
        Residuals { altitude: 1e3, speed: 1e3, ground: 1e3, freestream: 1e3, alpha: 1e3, accel: 1e3 }
    }
}

/// Extremes along a trajectory from which every residual is derived.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryStats {
    pub y_final: f64,
    pub vx_final: f64,
    /// Lowest altitude after any step.
    pub min_y: f64,
    /// Lowest chordwise inflow after any step.
    pub min_chordwise: f64,
    pub max_alpha_efs: f64,
    pub max_accel: f64,
}

impl TrajectoryStats {
    pub fn residuals(&self, cond: &FlightCondition, env: &EnvConfig, gravity: f64) -> Residuals {
        let (alpha, accel) = if cond.path_constraints {
            (
                (self.max_alpha_efs - cond.alpha_max_deg.to_radians()).max(0.0),
                (self.max_accel - cond.a_max_g * gravity).max(0.0),
            )
        } else {
            (0.0, 0.0)
        };
        Residuals {
            altitude: (env.target_altitude - self.y_final).max(0.0),
            speed: (env.target_speed - self.vx_final).max(0.0),
            ground: (-self.min_y).max(0.0),
            freestream: (-self.min_chordwise).max(0.0),
            alpha,
            accel,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    pub controls: Vec<ControlInput>,
    /// Initial state followed by the state after every step.
    pub states: Vec<KinematicState>,
    pub energy_wh: f64,
    pub stats: TrajectoryStats,
    pub residuals: Residuals,
    /// The physics solver failed part-way; residuals are set to a large
    /// sentinel.
    pub failed: bool,
}

impl Rollout {
    pub fn feasible(&self) -> bool {
        !self.failed && self.residuals.feasible()
    }

    pub fn duration(&self) -> f64 {
        self.states.last().map(|s| s.t).unwrap_or(0.0)
    }
}

/// Number of simulation steps covering a takeoff of duration `t`.
pub fn step_count(t: f64, dt: f64) -> usize {
    (t / dt - 1e-9).ceil().max(1.0) as usize
}

/// Samples the spline at every step start, clamping the last sample to T.
pub fn sample_controls(ctrl: &BSplineControl, dt: f64) -> Result<Vec<ControlInput>> {
    let n = step_count(ctrl.t_takeoff, dt);
    (0..n).map(|i| ctrl.eval((i as f64 * dt).min(ctrl.t_takeoff))).collect()
}

/// Simulates an explicit control sequence from the environment's initial
/// state, accumulating energy exactly as the environment does. `vehicle`
/// must already carry the condition's interaction, efficiency and area.
pub fn rollout_controls(
    controls: &[ControlInput],
    cond: &FlightCondition,
    vehicle: &VehicleConfig,
    env: &EnvConfig,
) -> Rollout {
    let [y0, vx0, vy0] = env.initial;
    let mut state = KinematicState::new(y0, vx0, vy0);
    let mut states = Vec::with_capacity(controls.len() + 1);
    states.push(state);
    let mut meter = EnergyMeter::default();
    let mut stats = TrajectoryStats {
        y_final: y0,
        vx_final: vx0,
        min_y: f64::INFINITY,
        min_chordwise: f64::INFINITY,
        max_alpha_efs: f64::NEG_INFINITY,
        max_accel: 0.0,
    };
    for (i, u) in controls.iter().enumerate() {
        let (mut next, forces) = match advance(&state, u, env.dt, vehicle) {
            Ok(v) => v,
            Err(_) => return failed(controls, states, meter, stats),
        };
        next.t = (i + 1) as f64 * env.dt;
        if !(next.y.is_finite() && next.vx.is_finite() && next.vy.is_finite()) {
            return failed(controls, states, meter, stats);
        }
        meter.add(u.power, env.dt);
        stats.min_y = stats.min_y.min(next.y);
        stats.min_chordwise = stats.min_chordwise.min(chordwise_velocity(next.vx, next.vy, u.theta));
        stats.max_alpha_efs = stats.max_alpha_efs.max(forces.alpha_efs);
        let a = ((next.vx - state.vx) / env.dt).hypot((next.vy - state.vy) / env.dt);
        stats.max_accel = stats.max_accel.max(a);
        state = next;
        states.push(state);
    }
    stats.y_final = state.y;
    stats.vx_final = state.vx;
    let residuals = stats.residuals(cond, env, vehicle.gravity);
    Rollout { controls: controls.to_vec(), states, energy_wh: meter.wh(), stats, residuals, failed: false }
}

fn failed(controls: &[ControlInput], states: Vec<KinematicState>, meter: EnergyMeter, stats: TrajectoryStats) -> Rollout {
    Rollout {
        controls: controls.to_vec(),
        states,
        energy_wh: meter.wh(),
        stats,
        residuals: Residuals::failed(),
        failed: true,
    }
}

pub fn rollout(
    ctrl: &BSplineControl,
    cond: &FlightCondition,
    vehicle: &VehicleConfig,
    env: &EnvConfig,
) -> Result<Rollout> {
    ctrl.validate()?;
    let controls = sample_controls(ctrl, env.dt)?;
    let cfg = cond.apply(vehicle);
    Ok(rollout_controls(&controls, cond, &cfg, env))
}
