//! Clamped uniform cubic B-spline control profiles.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vehicle::ControlInput;

pub const CONTROL_POINTS: usize = 20;
const DEGREE: usize = 3;

/// Knot `i` of the clamped uniform knot vector for `n` points over [0, span].
fn knot(i: usize, n: usize, span: f64) -> f64 {
    if i <= DEGREE {
        0.0
    } else if i >= n {
        span
    } else {
        (i - DEGREE) as f64 / (n - DEGREE) as f64 * span
    }
}

/// De Boor evaluation of a clamped uniform cubic B-spline at `t ∈ [0, span]`.
pub fn eval_clamped(points: &[f64], span: f64, t: f64) -> Result<f64> {
    let n = points.len();
    if n <= DEGREE {
        return Err(Error::contract(format!("cubic B-spline needs at least 4 points, got {n}")));
    }
    if !(span > 0.0) || !(0.0..=span).contains(&t) {
        return Err(Error::contract(format!("spline parameter {t} outside [0, {span}]")));
    }
    // knot span index s with knot(s) ≤ t < knot(s+1), s ∈ [3, n-1]
    let interior = (n - DEGREE) as f64;
    let s = ((t / span * interior).floor() as usize + DEGREE).min(n - 1);
    let mut d = [0.0; DEGREE + 1];
    for (j, dj) in d.iter_mut().enumerate() {
        *dj = points[s - DEGREE + j];
    }
    for r in 1..=DEGREE {
        for j in (r..=DEGREE).rev() {
            let i = s - DEGREE + j;
            let lo = knot(i, n, span);
            let hi = knot(i + DEGREE + 1 - r, n, span);
            let a = if hi > lo { (t - lo) / (hi - lo) } else { 0.0 };
            d[j] = (1.0 - a) * d[j - 1] + a * d[j];
        }
    }
    Ok(d[DEGREE])
}

/// Power and wing-angle profiles over a takeoff of duration `t_takeoff`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BSplineControl {
    /// Power control points (W).
    pub power: Vec<f64>,
    /// Wing-angle control points (rad).
    pub theta: Vec<f64>,
    pub t_takeoff: f64,
}

impl BSplineControl {
    pub fn new(power: Vec<f64>, theta: Vec<f64>, t_takeoff: f64) -> Result<Self> {
        let c = BSplineControl { power, theta, t_takeoff };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.power.len() != CONTROL_POINTS || self.theta.len() != CONTROL_POINTS {
            return Err(Error::contract(format!(
                "expected {CONTROL_POINTS} power and angle points, got {} and {}",
                self.power.len(),
                self.theta.len()
            )));
        }
        if !(self.t_takeoff > 0.0 && self.t_takeoff <= 40.0) {
            return Err(Error::contract(format!("takeoff duration {} outside (0, 40]", self.t_takeoff)));
        }
        if self.power.iter().chain(self.theta.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("spline control points".into()));
        }
        Ok(())
    }

    /// Control at time `t`, clamped to the actuator bounds.
    pub fn eval(&self, t: f64) -> Result<ControlInput> {
        let p = eval_clamped(&self.power, self.t_takeoff, t)?;
        let th = eval_clamped(&self.theta, self.t_takeoff, t)?;
        Ok(ControlInput::new(p, th).clamped())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_points_give_constant_curve() {
        let pts = vec![2.5; CONTROL_POINTS];
        for i in 0..=100 {
            let t = i as f64 * 0.19;
            assert!((eval_clamped(&pts, 19.0, t).unwrap() - 2.5).abs() < 1e-14);
        }
    }

    #[test]
    fn clamped_endpoints() {
        let pts: Vec<f64> = (0..CONTROL_POINTS).map(|i| (i as f64 * 0.7).sin()).collect();
        assert!((eval_clamped(&pts, 12.0, 0.0).unwrap() - pts[0]).abs() < 1e-15);
        assert!((eval_clamped(&pts, 12.0, 12.0).unwrap() - pts[19]).abs() < 1e-15);
        assert!(eval_clamped(&pts, 12.0, 12.0001).is_err());
        assert!(eval_clamped(&pts, 12.0, -1e-9).is_err());
    }

    // Greville abscissae of a clamped cubic: averages of three consecutive
    // interior knots. Control points placed on a cubic at these abscissae
    // reproduce a linear function exactly; for a general cubic use the
    // blossom of the polynomial.
    #[test]
    fn reproduces_cubic_polynomial() {
        let n = CONTROL_POINTS;
        let span = 7.0;
        let f = |t: f64| 1.0 - 2.0 * t + 0.3 * t * t - 0.05 * t * t * t;
        let coeffs = [1.0, -2.0, 0.3, -0.05];
        let points: Vec<f64> = (0..n)
            .map(|i| {
                let (a, b, c) = (knot(i + 1, n, span), knot(i + 2, n, span), knot(i + 3, n, span));
                // blossom of the monomials 1, t, t², t³
                coeffs[0]
                    + coeffs[1] * (a + b + c) / 3.0
                    + coeffs[2] * (a * b + b * c + a * c) / 3.0
                    + coeffs[3] * a * b * c
            })
            .collect();
        for i in 0..=70 {
            let t = i as f64 * 0.1;
            let got = eval_clamped(&points, span, t).unwrap();
            assert!((got - f(t)).abs() < 1e-12, "t={t}: {got} vs {}", f(t));
        }
    }

    #[test]
    fn control_validation_and_clamping() {
        assert!(BSplineControl::new(vec![2e5; 19], vec![0.0; 20], 10.0).is_err());
        assert!(BSplineControl::new(vec![2e5; 20], vec![0.0; 20], 0.0).is_err());
        assert!(BSplineControl::new(vec![2e5; 20], vec![0.0; 20], 41.0).is_err());
        let c = BSplineControl::new(vec![4e5; 20], vec![-1.0; 20], 10.0).unwrap();
        let u = c.eval(5.0).unwrap();
        assert_eq!(u.power, 3.11e5);
        assert_eq!(u.theta, 0.0);
    }
}
