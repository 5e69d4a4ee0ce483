use serde::{Deserialize, Serialize};

use super::aero::{drag_coeff, induced_drag, lift_coeff};
use super::config::VehicleConfig;
use super::propulsion::{
    disk_power, induced_velocity, normal_force, profile_power, thrust_from_power,
};
use crate::error::{Error, Result};

/// Electrical power bounds (W), total over all propellers.
pub const POWER_MIN: f64 = 1.8e5;
pub const POWER_MAX: f64 = 3.11e5;
/// Wing angle bounds (rad from vertical).
pub const ANGLE_MIN: f64 = 0.0;
pub const ANGLE_MAX: f64 = std::f64::consts::FRAC_PI_2;

/// Largest propeller incidence used by the normal-force model.
const MAX_INCIDENCE: f64 = 85.0 * std::f64::consts::PI / 180.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KinematicState {
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
    pub t: f64,
}

impl KinematicState {
    pub fn new(y: f64, vx: f64, vy: f64) -> Self {
        KinematicState { x: 0.0, y, vx, vy, t: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlInput {
    /// Total electrical power (W).
    pub power: f64,
    /// Wing angle from vertical (rad).
    pub theta: f64,
}

impl ControlInput {
    pub fn new(power: f64, theta: f64) -> Self {
        ControlInput { power, theta }
    }

    pub fn in_bounds(&self) -> bool {
        (POWER_MIN..=POWER_MAX).contains(&self.power) && (ANGLE_MIN..=ANGLE_MAX).contains(&self.theta)
    }

    pub fn clamped(self) -> Self {
        ControlInput {
            power: self.power.clamp(POWER_MIN, POWER_MAX),
            theta: self.theta.clamp(ANGLE_MIN, ANGLE_MAX),
        }
    }

    /// Maps both channels onto [0, 1] by the action bounds.
    pub fn normalized(&self) -> [f64; 2] {
        [
            (self.power - POWER_MIN) / (POWER_MAX - POWER_MIN),
            (self.theta - ANGLE_MIN) / (ANGLE_MAX - ANGLE_MIN),
        ]
    }

    /// Inverse of [`ControlInput::normalized`]; exact at both ends of each
    /// range, and never outside the bounds for inputs in [0, 1].
    pub fn from_normalized(n: [f64; 2]) -> Self {
        let lerp = |t: f64, lo: f64, hi: f64| ((1.0 - t) * lo + t * hi).clamp(lo.min(hi), hi.max(lo));
        ControlInput {
            power: lerp(n[0], POWER_MIN, POWER_MAX),
            theta: lerp(n[1], ANGLE_MIN, ANGLE_MAX),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ForceBreakdown {
    /// Total thrust (N).
    pub thrust: f64,
    pub lift_wings: f64,
    pub drag_wings: f64,
    pub drag_fuse: f64,
    /// Total propeller normal force (N).
    pub normal: f64,
    pub alpha_inf: f64,
    pub alpha_efs: f64,
    /// Per-propeller induced velocity (m/s).
    pub v_induced: f64,
    /// Per-propeller disk power (W).
    pub p_disk: f64,
    /// Per-propeller profile power (W).
    pub p_profile: f64,
    /// Set when losses exceeded the supplied power.
    pub disk_power_floored: bool,
    /// Axial (chordwise) component of the vehicle velocity (m/s).
    pub v_chordwise: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Freestream {
    pub alpha_inf: f64,
    pub alpha_efs: f64,
    pub v_efs: f64,
}

/// Chordwise/normal decomposition of the vehicle velocity for a wing at
/// `theta` from vertical, plus the angle of attack including propeller wash.
pub fn effective_freestream(vx: f64, vy: f64, theta: f64, v_induced: f64, cfg: &VehicleConfig) -> Freestream {
    let (s, c) = theta.sin_cos();
    let u = vx * s + vy * c;
    let w = vx * c - vy * s;
    let ue = u + cfg.wing_interaction * v_induced;
    Freestream {
        alpha_inf: w.atan2(u),
        alpha_efs: w.atan2(ue),
        v_efs: (w * w + ue * ue).sqrt(),
    }
}

pub fn chordwise_velocity(vx: f64, vy: f64, theta: f64) -> f64 {
    let (s, c) = theta.sin_cos();
    vx * s + vy * c
}

/// Evaluates every force acting on the vehicle for one state and control.
pub fn assemble_forces(state: &KinematicState, u: &ControlInput, cfg: &VehicleConfig) -> Result<ForceBreakdown> {
    if !u.in_bounds() {
        return Err(Error::contract(format!("control out of bounds: {u:?}")));
    }
    let rho = cfg.air_density;
    let n_props = cfg.propellers() as f64;
    let (s, c) = u.theta.sin_cos();
    let v_axial = state.vx * s + state.vy * c;
    let v_inplane = state.vx * c - state.vy * s;
    let speed = state.vx.hypot(state.vy);

    let v_perp = v_axial.max(0.0);
    let p_profile = profile_power(v_inplane.abs(), cfg);
    let (p_disk, floored) = disk_power(u.power / n_props, p_profile, cfg);
    let thrust = thrust_from_power(p_disk, v_perp, cfg)?;
    let v_induced = induced_velocity(thrust, v_perp, cfg);

    let fs = effective_freestream(state.vx, state.vy, u.theta, v_induced, cfg);
    let q_efs = 0.5 * rho * fs.v_efs * fs.v_efs;
    let wing_area = cfg.wing_area();
    let wings = cfg.wings as f64;
    let lift_per_wing = lift_coeff(fs.alpha_efs, cfg) * q_efs * wing_area;
    let profile_drag = drag_coeff(fs.alpha_efs, cfg) * q_efs * wing_area * wings;
    let d_induced = if q_efs > 0.0 { induced_drag(lift_per_wing, q_efs, cfg)? } else { 0.0 };

    let q_inf = 0.5 * rho * speed * speed;
    let drag_fuse = q_inf * cfg.fuselage_drag_area;

    let q_normal = 0.5 * rho * v_inplane * v_inplane;
    let incidence = fs.alpha_inf.clamp(-MAX_INCIDENCE, MAX_INCIDENCE);
    let normal = n_props * normal_force(thrust, q_normal, incidence, speed, cfg)?;

    Ok(ForceBreakdown {
        thrust: thrust * n_props,
        lift_wings: lift_per_wing * wings,
        drag_wings: profile_drag + d_induced,
        drag_fuse,
        normal,
        alpha_inf: fs.alpha_inf,
        alpha_efs: fs.alpha_efs,
        v_induced,
        p_disk,
        p_profile,
        disk_power_floored: floored,
        v_chordwise: v_axial,
    })
}

/// Net acceleration (m/s²) implied by a force breakdown.
///
/// Drag acts along −(sin φ, cos φ) with φ = θ + α the flow direction from
/// vertical; lift acts along (−cos φ, sin φ), perpendicular to it.
pub fn acceleration(f: &ForceBreakdown, theta: f64, cfg: &VehicleConfig) -> (f64, f64) {
    let m = cfg.mass;
    let (st, ct) = theta.sin_cos();
    let (sa, ca) = (theta + f.alpha_inf).sin_cos();
    let (se, ce) = (theta + f.alpha_efs).sin_cos();
    let lift_y = if cfg.lift_sign_as_printed { -f.lift_wings * se } else { f.lift_wings * se };
    let ax = (f.thrust * st - f.drag_fuse * sa - f.drag_wings * se - f.lift_wings * ce - f.normal * ct) / m;
    let ay = (f.thrust * ct - f.drag_fuse * ca - f.drag_wings * ce + lift_y + f.normal * st - m * cfg.gravity) / m;
    (ax, ay)
}

/// Evaluates the forces for `u` and advances one Euler step.
pub fn advance(
    state: &KinematicState,
    u: &ControlInput,
    dt: f64,
    cfg: &VehicleConfig,
) -> Result<(KinematicState, ForceBreakdown)> {
    let forces = assemble_forces(state, u, cfg)?;
    let next = step_dynamics(state, &forces, u.theta, dt, cfg)?;
    Ok((next, forces))
}

/// Forward-Euler update; positions advance with the pre-update velocity.
pub fn step_dynamics(
    state: &KinematicState,
    forces: &ForceBreakdown,
    theta: f64,
    dt: f64,
    cfg: &VehicleConfig,
) -> Result<KinematicState> {
    if !(dt > 0.0) {
        return Err(Error::contract(format!("time step must be positive, got {dt}")));
    }
    let (ax, ay) = acceleration(forces, theta, cfg);
    Ok(KinematicState {
        x: state.x + state.vx * dt,
        y: state.y + state.vy * dt,
        vx: state.vx + ax * dt,
        vy: state.vy + ay * dt,
        t: state.t + dt,
    })
}
