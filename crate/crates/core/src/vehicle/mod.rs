//! Flight physics of the tandem tilt-wing vehicle.

pub mod aero;
pub mod config;
pub mod dynamics;
pub mod propulsion;

pub use config::VehicleConfig;
pub use dynamics::{
    acceleration, advance, assemble_forces, chordwise_velocity, effective_freestream, step_dynamics, ControlInput, ForceBreakdown, KinematicState,
    ANGLE_MAX, ANGLE_MIN, POWER_MAX, POWER_MIN,
};
