use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical constants of the tandem tilt-wing vehicle plus the flight
/// condition knobs (`efficiency`, `wing_interaction`, `s_ref`).
///
/// Angles are stored in radians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleConfig {
    /// Wing span b (m).
    pub span: f64,
    /// Wing chord c (m).
    pub chord: f64,
    /// Airfoil thickness-to-chord ratio.
    pub thickness_ratio: f64,
    pub wings: u32,
    /// Per-wing planform scale, multiplies b·c.
    pub s_ref: f64,
    pub props_per_wing: u32,
    /// Propeller radius R (m).
    pub prop_radius: f64,
    /// Blades per propeller B.
    pub blades: u32,
    /// Average blade chord c_b (m).
    pub blade_chord: f64,
    /// Rotor speed Ω (rad/s).
    pub rotor_speed: f64,
    /// Rotor solidity σ.
    pub solidity: f64,
    /// Propeller blade profile drag coefficient C_d0p.
    pub profile_drag_coeff: f64,
    /// Induced-power correction κ.
    pub induced_power_factor: f64,
    /// Fuselage drag area (m²).
    pub fuselage_drag_area: f64,
    pub mass: f64,
    pub gravity: f64,
    pub air_density: f64,
    /// Electrical loss factor η.
    pub efficiency: f64,
    /// Propeller–wing interaction factor k_w.
    pub wing_interaction: f64,
    /// Stall angle of attack α_s (rad).
    pub stall_angle: f64,
    /// Lift coefficient at stall C_Ls.
    pub stall_lift: f64,
    /// Drag coefficient at stall C_Ds; the first point of the drag table.
    pub stall_drag: f64,
    /// Constant pre-stall parasite drag coefficient.
    pub pre_stall_drag: f64,
    /// KS aggregation sharpness.
    pub ks_sharpness: f64,
    /// Use the induced velocity consistent with the thrust model
    /// (coefficient 1 before the root) instead of the printed factor 2.
    pub momentum_consistent: bool,
    /// Apply the wing lift in the vertical equation with the printed
    /// (non-perpendicular) sign instead of rotating it with the flow.
    pub lift_sign_as_printed: bool,
}

/// Classical finite-wing lift slope, 2π/(1 + 2/AR).
pub fn lift_slope(aspect_ratio: f64) -> f64 {
    2.0 * PI / (1.0 + 2.0 / aspect_ratio)
}

impl Default for VehicleConfig {
    fn default() -> Self {
        let span = 6.0;
        let chord = 1.5;
        let stall_angle = 16f64.to_radians();
        VehicleConfig {
            span,
            chord,
            thickness_ratio: 0.12,
            wings: 2,
            s_ref: 1.0,
            props_per_wing: 4,
            prop_radius: 0.75,
            blades: 3,
            blade_chord: 0.1,
            rotor_speed: 181.0,
            solidity: 0.13,
            profile_drag_coeff: 0.012,
            induced_power_factor: 1.2,
            fuselage_drag_area: 0.35,
            mass: 725.0,
            gravity: 9.80665,
            air_density: 1.225,
            efficiency: 0.9,
            wing_interaction: 1.0,
            stall_angle,
            stall_lift: lift_slope(span / chord) * stall_angle,
            stall_drag: 0.100,
            pre_stall_drag: 0.012,
            ks_sharpness: 50.0,
            momentum_consistent: false,
            lift_sign_as_printed: false,
        }
    }
}

impl VehicleConfig {
    pub fn aspect_ratio(&self) -> f64 {
        self.span / self.chord
    }

    pub fn disk_area(&self) -> f64 {
        PI * self.prop_radius * self.prop_radius
    }

    /// Planform area of one wing (m²).
    pub fn wing_area(&self) -> f64 {
        self.s_ref * self.span * self.chord
    }

    pub fn propellers(&self) -> u32 {
        self.wings * self.props_per_wing
    }

    pub fn weight(&self) -> f64 {
        self.mass * self.gravity
    }

    pub fn validate(&self) -> Result<()> {
        let positives = [
            ("span", self.span),
            ("chord", self.chord),
            ("thickness_ratio", self.thickness_ratio),
            ("prop_radius", self.prop_radius),
            ("blade_chord", self.blade_chord),
            ("rotor_speed", self.rotor_speed),
            ("solidity", self.solidity),
            ("profile_drag_coeff", self.profile_drag_coeff),
            ("induced_power_factor", self.induced_power_factor),
            ("fuselage_drag_area", self.fuselage_drag_area),
            ("mass", self.mass),
            ("gravity", self.gravity),
            ("air_density", self.air_density),
            ("efficiency", self.efficiency),
            ("stall_angle", self.stall_angle),
            ("stall_lift", self.stall_lift),
            ("stall_drag", self.stall_drag),
            ("pre_stall_drag", self.pre_stall_drag),
            ("ks_sharpness", self.ks_sharpness),
        ];
        for (name, v) in positives {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::contract(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.wing_interaction.is_finite() && self.wing_interaction >= 0.0) {
            return Err(Error::contract("wing_interaction must be non-negative"));
        }
        if !(self.s_ref > 0.0 && self.s_ref <= 1.5) {
            return Err(Error::contract(format!("s_ref {} outside (0, 1.5]", self.s_ref)));
        }
        if self.wings == 0 || self.props_per_wing == 0 || self.blades == 0 {
            return Err(Error::contract("wing, propeller and blade counts must be positive"));
        }
        if self.stall_angle >= 27.5f64.to_radians() {
            return Err(Error::contract("stall angle must precede the last drag table point"));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: VehicleConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_consistent() {
        let cfg = VehicleConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.aspect_ratio(), 4.0);
        assert_eq!(cfg.propellers(), 8);
        assert!((cfg.disk_area() - PI * 0.5625).abs() < 1e-15);
        assert!((cfg.wing_area() - 9.0).abs() < 1e-15);
    }

    #[test]
    fn json_round_trip_and_unknown_fields() {
        let cfg = VehicleConfig { mass: 800.0, ..Default::default() };
        let text = cfg.to_json().unwrap();
        assert_eq!(VehicleConfig::from_json(&text).unwrap(), cfg);

        let mut value: serde_json::Value = serde_json::from_str(&text).unwrap();
        value["wingspan_typo"] = serde_json::json!(1.0);
        assert!(VehicleConfig::from_json(&value.to_string()).is_err());
    }

    #[test]
    fn rejects_bad_s_ref() {
        let cfg = VehicleConfig { s_ref: 1.6, ..Default::default() };
        assert!(cfg.validate().is_err());
    }
}
