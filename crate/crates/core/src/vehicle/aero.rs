//! Wing aerodynamic coefficients across the full 0–90° transition.
//!
//! Lift follows the finite-wing linear slope until it meets the empirical
//! post-stall curve; the two are joined with a KS smooth minimum. Drag is a
//! constant parasite level, then a monotone cubic through the measured
//! 16–27.5° points, then the empirical post-stall curve. The low junction is
//! a KS smooth maximum; the high junction, where both branches pass through
//! the same point, is blended with the KS switching weight.

use std::f64::consts::{FRAC_PI_2, PI};

use super::config::{lift_slope, VehicleConfig};
use crate::error::{Error, Result};

/// Measured drag coefficients above stall, (deg, C_D). The first entry is
/// replaced by the configured stall anchor.
pub const DRAG_TABLE: [(f64, f64); 4] = [(16.0, 0.100), (20.0, 0.175), (25.0, 0.275), (27.5, 0.363)];

/// Span efficiency of each wing of the tandem pair.
pub const TANDEM_SPAN_EFFICIENCY: f64 = 0.68;

/// Smooth maximum: `max + ln Σ exp(ρ(f − max)) / ρ`.
pub fn ks_max(values: &[f64], rho: f64) -> f64 {
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    let s: f64 = values.iter().map(|&v| (rho * (v - m)).exp()).sum();
    m + s.ln() / rho
}

pub fn ks_min(values: &[f64], rho: f64) -> f64 {
    let neg: Vec<f64> = values.iter().map(|v| -v).collect();
    -ks_max(&neg, rho)
}

/// Gradient weight of the KS maximum of two branches, i.e. the logistic
/// switch `1 / (1 + exp(-ρ x))`.
fn ks_switch(x: f64, rho: f64) -> f64 {
    let z = rho * x;
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Monotone piecewise cubic (Fritsch–Carlson) through sorted points with
/// linear extrapolation on both ends.
#[derive(Debug, Clone)]
pub struct MonotoneCubic {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
}

impl MonotoneCubic {
    pub fn new(points: &[(f64, f64)]) -> Self {
        let n = points.len();
        assert!(n >= 2, "need at least two points");
        let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
        let secants: Vec<f64> = (0..n - 1).map(|i| (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i])).collect();
        let mut slopes = vec![0.0; n];
        slopes[0] = secants[0];
        slopes[n - 1] = secants[n - 2];
        for i in 1..n - 1 {
            slopes[i] = if secants[i - 1] * secants[i] <= 0.0 {
                0.0
            } else {
                // weighted harmonic mean
                let h0 = xs[i] - xs[i - 1];
                let h1 = xs[i + 1] - xs[i];
                let w1 = 2.0 * h1 + h0;
                let w2 = h1 + 2.0 * h0;
                (w1 + w2) / (w1 / secants[i - 1] + w2 / secants[i])
            };
        }
        MonotoneCubic { xs, ys, slopes }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.ys[0] + self.slopes[0] * (x - self.xs[0]);
        }
        if x >= self.xs[n - 1] {
            return self.ys[n - 1] + self.slopes[n - 1] * (x - self.xs[n - 1]);
        }
        let i = match self.xs.iter().position(|&xi| xi > x) {
            Some(j) => j - 1,
            None => n - 2,
        };
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.ys[i] + h10 * h * self.slopes[i] + h01 * self.ys[i + 1] + h11 * h * self.slopes[i + 1]
    }
}

/// Maps any angle onto [-π/2, π/2] for the coefficient models. Returns the
/// folded angle and whether the flow arrives from the trailing edge.
fn fold(alpha: f64) -> (f64, bool) {
    if alpha.abs() <= FRAC_PI_2 {
        return (alpha, false);
    }
    let a = (alpha + PI).rem_euclid(2.0 * PI) - PI;
    if a > FRAC_PI_2 {
        (PI - a, true)
    } else if a < -FRAC_PI_2 {
        (-PI - a, true)
    } else {
        (a, false)
    }
}

/// Empirical post-stall lift for 0 < a ≤ π/2.
fn post_stall_lift(a: f64, cfg: &VehicleConfig) -> f64 {
    let c1 = 1.1 + 0.018 * cfg.aspect_ratio();
    let a1 = c1 / 2.0;
    let (ss, cs) = cfg.stall_angle.sin_cos();
    let a2 = (cfg.stall_lift - c1 * ss * cs) * ss / (cs * cs);
    let s = a.sin();
    if s <= 0.0 {
        return f64::INFINITY;
    }
    a1 * (2.0 * a).sin() + a2 * a.cos().powi(2) / s
}

/// Wing lift coefficient; odd in α.
pub fn lift_coeff(alpha: f64, cfg: &VehicleConfig) -> f64 {
    let (folded, reversed) = fold(alpha);
    let a = folded.abs();
    let linear = lift_slope(cfg.aspect_ratio()) * a;
    let cl = if a == 0.0 {
        0.0
    } else {
        ks_min(&[linear, post_stall_lift(a, cfg)], cfg.ks_sharpness)
    };
    let signed = cl * folded.signum();
    if reversed {
        -signed
    } else {
        signed
    }
}

/// Maximum drag coefficient of a finite flat wing broadside to the flow.
pub fn max_drag_coeff(cfg: &VehicleConfig) -> f64 {
    (1.0 + 0.065 * cfg.aspect_ratio()) / (0.9 + cfg.thickness_ratio)
}

fn drag_table(cfg: &VehicleConfig) -> MonotoneCubic {
    let mut pts: Vec<(f64, f64)> = DRAG_TABLE.iter().map(|&(d, c)| (d.to_radians(), c)).collect();
    pts[0] = (cfg.stall_angle, cfg.stall_drag);
    MonotoneCubic::new(&pts)
}

/// Empirical post-stall drag, anchored at the last table point so the two
/// branches meet there.
fn post_stall_drag(a: f64, cfg: &VehicleConfig) -> f64 {
    let (anchor_deg, anchor_cd) = DRAG_TABLE[DRAG_TABLE.len() - 1];
    let (sa, ca) = anchor_deg.to_radians().sin_cos();
    let b1 = max_drag_coeff(cfg);
    let b2 = (anchor_cd - b1 * sa) / ca;
    b1 * a.sin() + b2 * a.cos()
}

/// Wing profile drag coefficient; even in α.
pub fn drag_coeff(alpha: f64, cfg: &VehicleConfig) -> f64 {
    let (folded, _) = fold(alpha);
    let a = folded.abs();
    let rho = cfg.ks_sharpness;
    let table = drag_table(cfg).eval(a);
    let low = ks_max(&[cfg.pre_stall_drag, table], rho);
    let anchor = DRAG_TABLE[DRAG_TABLE.len() - 1].0.to_radians();
    let w = ks_switch(a - anchor, rho);
    (1.0 - w) * low + w * post_stall_drag(a, cfg)
}

/// Total induced drag of both wings for per-wing lift `lift_per_wing`.
pub fn induced_drag(lift_per_wing: f64, q: f64, cfg: &VehicleConfig) -> Result<f64> {
    if !(q > 0.0) {
        return Err(Error::contract(format!("induced drag needs q > 0, got {q}")));
    }
    let b = cfg.span;
    Ok(2.0 * lift_per_wing * lift_per_wing / (TANDEM_SPAN_EFFICIENCY * PI * q * b * b))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn deg(d: f64) -> f64 {
        d.to_radians()
    }

    #[test]
    fn lift_endpoints() {
        let cfg = VehicleConfig::default();
        assert_eq!(lift_coeff(0.0, &cfg), 0.0);
        assert!(lift_coeff(deg(90.0), &cfg).abs() < 1e-12);
    }

    #[test]
    fn lift_at_45_deg_follows_post_stall_curve() {
        let cfg = VehicleConfig::default();
        // hand evaluation: C1 = 1.172, A1 = 0.586, slope = 2π/1.5
        let slope = 2.0 * PI / 1.5;
        let a_s = deg(16.0);
        let cls = slope * a_s;
        let a2 = (cls - 1.172 * a_s.sin() * a_s.cos()) * a_s.sin() / a_s.cos().powi(2);
        let expected = 0.586 * 1.0 + a2 * 0.5 / (0.5f64).sqrt();
        assert!((lift_coeff(deg(45.0), &cfg) - expected).abs() < 1e-12);
        assert!((a2 - 0.256_307).abs() < 1e-5, "A2 = {a2}");
    }

    #[test]
    fn lift_is_odd_and_drag_even() {
        let cfg = VehicleConfig::default();
        for i in 0..=180 {
            let a = deg(i as f64 * 0.5);
            assert_eq!(lift_coeff(-a, &cfg), -lift_coeff(a, &cfg));
            assert_eq!(drag_coeff(-a, &cfg), drag_coeff(a, &cfg));
        }
    }

    #[test]
    fn drag_at_90_is_max() {
        let cfg = VehicleConfig::default();
        let cdmax: f64 = (1.0 + 0.065 * 4.0) / (0.9 + 0.12);
        assert!((cdmax - 1.235_294).abs() < 1e-6);
        assert!((drag_coeff(deg(90.0), &cfg) - cdmax).abs() < 1e-12);
    }

    #[test]
    fn drag_matches_table() {
        let cfg = VehicleConfig::default();
        for &(d, c) in DRAG_TABLE.iter() {
            let got = drag_coeff(deg(d), &cfg);
            assert!((got - c).abs() < 0.005, "{d}°: {got} vs {c}");
        }
        let sharp = VehicleConfig { ks_sharpness: 1e6, ..Default::default() };
        for &(d, c) in DRAG_TABLE.iter() {
            let got = drag_coeff(deg(d), &sharp);
            assert!((got - c).abs() < 1e-9, "{d}°: {got} vs {c}");
        }
        assert!((drag_coeff(deg(20.0), &cfg) - 0.175).abs() < 1e-3);
    }

    #[test]
    fn coefficient_curves_are_smooth_and_drag_nonnegative() {
        let cfg = VehicleConfig::default();
        let mut prev_l = lift_coeff(0.0, &cfg);
        let mut prev_d = drag_coeff(0.0, &cfg);
        for i in 1..=900 {
            let a = deg(i as f64 * 0.1);
            let l = lift_coeff(a, &cfg);
            let d = drag_coeff(a, &cfg);
            assert!(d >= 0.0);
            assert!((l - prev_l).abs() < 0.01, "lift jump at {}°", i as f64 * 0.1);
            assert!((d - prev_d).abs() < 0.01, "drag jump at {}°", i as f64 * 0.1);
            prev_l = l;
            prev_d = d;
        }
    }

    #[test]
    fn monotone_cubic_hits_knots_and_stays_monotone() {
        let pts: Vec<(f64, f64)> = DRAG_TABLE.to_vec();
        let m = MonotoneCubic::new(&pts);
        for &(x, y) in &pts {
            assert!((m.eval(x) - y).abs() < 1e-15);
        }
        let mut prev = m.eval(16.0);
        for i in 1..=115 {
            let v = m.eval(16.0 + i as f64 * 0.1);
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn induced_drag_cases() {
        let cfg = VehicleConfig::default();
        assert_eq!(induced_drag(0.0, 500.0, &cfg).unwrap(), 0.0);
        let one = induced_drag(1000.0, 500.0, &cfg).unwrap();
        let two = induced_drag(2000.0, 500.0, &cfg).unwrap();
        assert!((two / one - 4.0).abs() < 1e-12);
        let expected = 2.0 * 3556.0f64.powi(2) / (0.68 * PI * 500.0 * 36.0);
        assert!((induced_drag(3556.0, 500.0, &cfg).unwrap() - expected).abs() < 1e-9);
        assert!(induced_drag(1.0, 0.0, &cfg).is_err());
    }

    #[test]
    fn ks_bounds() {
        let v = [0.3, 0.1];
        assert!(ks_max(&v, 50.0) >= 0.3);
        assert!(ks_max(&v, 50.0) <= 0.3 + 2f64.ln() / 50.0);
        assert!(ks_min(&v, 50.0) <= 0.1);
    }
}
