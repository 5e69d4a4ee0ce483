//! Momentum-theory propulsion: thrust from disk power, profile power,
//! propeller normal force, and the induced velocity seen by the wings.
//! All quantities here are per propeller.

use std::f64::consts::PI;

use super::config::VehicleConfig;
use crate::error::{Error, Result};

const NEWTON_TOL: f64 = 1e-10;
const NEWTON_MAX_ITER: usize = 100;

/// Disk power needed to produce `thrust` with axial inflow `v_perp`.
pub fn power_from_thrust(thrust: f64, v_perp: f64, cfg: &VehicleConfig) -> f64 {
    let k = cfg.induced_power_factor;
    let root = (v_perp * v_perp / 4.0 + thrust / (2.0 * cfg.air_density * cfg.disk_area())).sqrt();
    thrust * v_perp + k * thrust * (-v_perp / 2.0 + root)
}

fn power_derivative(thrust: f64, v_perp: f64, cfg: &VehicleConfig) -> f64 {
    let k = cfg.induced_power_factor;
    let two_rho_a = 2.0 * cfg.air_density * cfg.disk_area();
    let root = (v_perp * v_perp / 4.0 + thrust / two_rho_a).sqrt();
    let droot = if root > 0.0 { 1.0 / (2.0 * two_rho_a * root) } else { 0.0 };
    v_perp + k * (-v_perp / 2.0 + root) + k * thrust * droot
}

/// Inverts the momentum-theory power relation with Newton–Raphson started at
/// 1.2× the per-propeller share of the weight.
pub fn thrust_from_power(p_disk: f64, v_perp: f64, cfg: &VehicleConfig) -> Result<f64> {
    if !(p_disk >= 0.0 && v_perp >= 0.0) {
        return Err(Error::contract(format!(
            "thrust_from_power needs P_disk ≥ 0 and V⊥ ≥ 0, got {p_disk}, {v_perp}"
        )));
    }
    if p_disk == 0.0 {
        return Ok(0.0);
    }
    let mut t = 1.2 * cfg.weight() / cfg.propellers() as f64;
    let mut residual = f64::INFINITY;
    for _ in 0..NEWTON_MAX_ITER {
        residual = power_from_thrust(t, v_perp, cfg) - p_disk;
        if (residual / p_disk).abs() < NEWTON_TOL {
            return Ok(t);
        }
        let step = residual / power_derivative(t, v_perp, cfg);
        let next = t - step;
        // power is increasing and convex-ish in T; halve toward zero if the
        // step overshoots below the physical range
        t = if next > 0.0 { next } else { t / 2.0 };
    }
    Err(Error::NonConvergence { last: t, residual })
}

/// Blade profile power for in-plane inflow `v_par`.
pub fn profile_power(v_par: f64, cfg: &VehicleConfig) -> f64 {
    let omega_r = cfg.rotor_speed * cfg.prop_radius;
    let mu = v_par / omega_r;
    let cp = cfg.solidity * cfg.profile_drag_coeff / 8.0 * (1.0 + 4.6 * mu * mu);
    cp * cfg.air_density * cfg.disk_area() * cfg.prop_radius.powi(3) * cfg.rotor_speed.powi(3)
}

/// Power reaching the disk after electrical losses and profile power.
/// The flag is set when losses exceed the supply and the result is floored.
pub fn disk_power(p_electrical: f64, p_profile: f64, cfg: &VehicleConfig) -> (f64, bool) {
    let p = cfg.efficiency * p_electrical - p_profile;
    if p < 0.0 {
        (0.0, true)
    } else {
        (p, false)
    }
}

/// Blade pitch at 3/4 radius: 0 → 35° over 0 → 67 m/s, held above.
pub fn blade_pitch(speed: f64) -> f64 {
    let frac = (speed / 67.0).clamp(0.0, 1.0);
    frac * 35f64.to_radians()
}

/// Effective solidity 2·B·c_b / (3πR).
pub fn effective_solidity(cfg: &VehicleConfig) -> f64 {
    2.0 * cfg.blades as f64 * cfg.blade_chord / (3.0 * PI * cfg.prop_radius)
}

/// Thrust factor f at thrust coefficient T_c.
pub fn thrust_factor(tc: f64) -> f64 {
    1.0 + ((1.0 + tc).sqrt() - 1.0) / 2.0 + tc / (4.0 * (2.0 + tc))
}

/// Empirical propeller normal force.
///
/// `q_normal` is the dynamic pressure of the inflow component perpendicular
/// to the propeller axis and `incidence` the angle between inflow and axis.
/// The product f·q is expanded so that q = 0 stays finite.
pub fn normal_force(thrust: f64, q_normal: f64, incidence: f64, speed: f64, cfg: &VehicleConfig) -> Result<f64> {
    if !(thrust >= 0.0) {
        return Err(Error::contract(format!("normal force needs T ≥ 0, got {thrust}")));
    }
    if incidence == 0.0 {
        return Ok(0.0);
    }
    let a = cfg.disk_area();
    let sigma_e = effective_solidity(cfg);
    let beta = blade_pitch(speed);
    let q = q_normal.max(0.0);
    let t_per_a = thrust / a;
    // f·q = q + (√(q² + qT/A) − q)/2 + q·(T/A) / (4(2q + T/A))
    let mut fq = q + ((q * q + q * t_per_a).sqrt() - q) / 2.0;
    let denom = 4.0 * (2.0 * q + t_per_a);
    if denom > 0.0 {
        fq += q * t_per_a / denom;
    }
    let tan = incidence.tan();
    Ok(4.25 * sigma_e * (beta + 8f64.to_radians()).sin() * fq * a / (1.0 + 2.0 * sigma_e) * tan)
}

/// Induced velocity at the disk. The printed form carries a factor 2 on the
/// root; `momentum_consistent` switches to the thrust model's own inflow.
pub fn induced_velocity(thrust: f64, v_perp: f64, cfg: &VehicleConfig) -> f64 {
    let root = (v_perp * v_perp / 4.0 + thrust / (2.0 * cfg.air_density * cfg.disk_area())).sqrt();
    let k = if cfg.momentum_consistent { 1.0 } else { 2.0 };
    -v_perp / 2.0 + k * root
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn static_thrust_round_trip() {
        let cfg = VehicleConfig::default();
        let a = PI * 0.75 * 0.75;
        let p = 1.2 * 889.0 * (889.0 / (2.0 * 1.225 * a)).sqrt();
        assert!((p - 1.53e4).abs() / 1.53e4 < 0.01, "P = {p}");
        let t = thrust_from_power(p, 0.0, &cfg).unwrap();
        assert!((t - 889.0).abs() / 889.0 < 1e-6);
    }

    #[test]
    fn zero_power_zero_thrust() {
        let cfg = VehicleConfig::default();
        assert_eq!(thrust_from_power(0.0, 0.0, &cfg).unwrap(), 0.0);
        assert!(thrust_from_power(-1.0, 0.0, &cfg).is_err());
    }

    #[test]
    fn thrust_increases_with_power() {
        let cfg = VehicleConfig::default();
        for v in [0.0, 10.0, 40.0] {
            let mut prev = 0.0;
            for i in 1..50 {
                let t = thrust_from_power(i as f64 * 1000.0, v, &cfg).unwrap();
                assert!(t > prev);
                prev = t;
            }
        }
    }

    #[test]
    fn forward_inverse_grid() {
        let cfg = VehicleConfig::default();
        for i in 0..20 {
            for j in 0..20 {
                let t = 10.0 + (5000.0 - 10.0) * i as f64 / 19.0;
                let v = 60.0 * j as f64 / 19.0;
                let p = power_from_thrust(t, v, &cfg);
                let back = thrust_from_power(p, v, &cfg).unwrap();
                assert!((back - t).abs() / t < 1e-8, "T={t} V={v} back={back}");
            }
        }
    }

    #[test]
    fn profile_power_values() {
        let cfg = VehicleConfig::default();
        let cp: f64 = 0.13 * 0.012 / 8.0;
        assert!((cp - 1.95e-4).abs() < 1e-12);
        let p0 = profile_power(0.0, &cfg);
        let expected = cp * 1.225 * PI * 0.5625 * 0.75f64.powi(3) * 181f64.powi(3);
        assert!((p0 - expected).abs() < 1e-9);
        assert!((p0 - 1.06e3).abs() < 10.0, "P_p = {p0}");
        assert!(profile_power(10.0, &cfg) > p0);
        // μ = 1 at V = ΩR
        let at_tip = profile_power(181.0 * 0.75, &cfg);
        assert!((at_tip / p0 - 5.6).abs() < 1e-12);
    }

    #[test]
    fn disk_power_cases() {
        let cfg = VehicleConfig::default();
        assert_eq!(disk_power(1e4, 1e3, &cfg), (8e3, false));
        let ideal = VehicleConfig { efficiency: 1.0, ..Default::default() };
        assert_eq!(disk_power(1234.5, 0.0, &ideal), (1234.5, false));
        assert_eq!(disk_power(100.0, 1e3, &cfg), (0.0, true));
    }

    #[test]
    fn blade_pitch_schedule() {
        assert_eq!(blade_pitch(0.0), 0.0);
        assert!((blade_pitch(67.0) - 35f64.to_radians()).abs() < 1e-15);
        assert!((blade_pitch(33.5) - 17.5f64.to_radians()).abs() < 1e-15);
        assert_eq!(blade_pitch(200.0), blade_pitch(67.0));
    }

    #[test]
    fn normal_force_pieces() {
        let cfg = VehicleConfig::default();
        let se = effective_solidity(&cfg);
        assert!((se - 0.0849).abs() < 1e-4, "σe = {se}");
        assert_eq!(thrust_factor(0.0), 1.0);
        assert_eq!(normal_force(800.0, 100.0, 0.0, 10.0, &cfg).unwrap(), 0.0);
        let at_zero_q = normal_force(800.0, 0.0, 0.3, 0.0, &cfg).unwrap();
        assert!(at_zero_q.is_finite() && at_zero_q == 0.0);
        // expanded product matches f(T_c)·q for q > 0
        let (t, q, inc, v) = (700.0, 150.0, 0.2f64, 20.0);
        let a = cfg.disk_area();
        let tc = t / (q * a);
        let direct = 4.25 * se * (blade_pitch(v) + 8f64.to_radians()).sin() * thrust_factor(tc) * q * a
            / (1.0 + 2.0 * se)
            * inc.tan();
        let got = normal_force(t, q, inc, v, &cfg).unwrap();
        assert!((got - direct).abs() < 1e-9 * direct.abs());
    }

    #[test]
    fn induced_velocity_forms() {
        let mut cfg = VehicleConfig::default();
        assert_eq!(induced_velocity(0.0, 0.0, &cfg), 0.0);
        let printed = induced_velocity(889.0, 0.0, &cfg);
        assert!((printed - 28.66).abs() < 0.01, "{printed}");
        cfg.momentum_consistent = true;
        assert_eq!(induced_velocity(0.0, 0.0, &cfg), 0.0);
        let consistent = induced_velocity(889.0, 0.0, &cfg);
        assert!((consistent - 14.33).abs() < 0.01, "{consistent}");
        let mut prev = f64::INFINITY;
        for i in 0..30 {
            let vi = induced_velocity(889.0, i as f64 * 2.0, &cfg);
            assert!(vi < prev);
            prev = vi;
        }
    }
}
