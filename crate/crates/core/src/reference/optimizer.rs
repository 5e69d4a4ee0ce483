//! Minimum-energy takeoff by direct shooting: an augmented-Lagrangian outer
//! loop around a CMA-ES inner search over the normalized 41-variable design.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bspline::{BSplineControl, CONTROL_POINTS};
use super::cmaes::Cmaes;
use super::rollout::{rollout, FlightCondition, Residuals, Rollout};
use crate::env::EnvConfig;
use crate::error::{Error, Result};
use crate::vehicle::{ControlInput, VehicleConfig, ANGLE_MAX, POWER_MAX, POWER_MIN};

pub const DESIGN_DIM: usize = 2 * CONTROL_POINTS + 1;
pub const T_MIN: f64 = 5.0;
pub const T_MAX: f64 = 40.0;
const FAILED_FITNESS: f64 = 1e9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSettings {
    /// Maximum number of rollouts, excluding the initial-guess evaluation.
    pub budget: usize,
    pub population: usize,
    /// Initial CMA-ES step size in normalized design units.
    pub sigma0: f64,
    /// CMA-ES generations per multiplier update.
    pub inner_generations: usize,
    pub penalty_init: f64,
    pub penalty_growth: f64,
    /// Extra altitude (m) and speed (m/s) demanded internally so that the
    /// converged design clears the true targets.
    pub target_margin: [f64; 2],
    /// Internal tightening of the angle-of-attack (deg) and acceleration (g)
    /// limits.
    pub path_margin: [f64; 2],
    pub seed: u64,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        OptimizerSettings {
            budget: 20_000,
            population: 32,
            sigma0: 0.15,
            inner_generations: 40,
            penalty_init: 10.0,
            penalty_growth: 2.0,
            target_margin: [0.05, 0.02],
            path_margin: [0.02, 0.002],
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeResult {
    pub control: BSplineControl,
    pub energy_wh: f64,
    pub duration: f64,
    pub residuals: Residuals,
    pub feasible: bool,
    pub evaluations: usize,
    /// Best feasible energy after each outer iteration (NaN before the
    /// first feasible point).
    pub history: Vec<f64>,
}

/// Constant 2.6e5 W power, wing angle ramping 0 → 80°, 25 s.
pub fn initial_guess() -> BSplineControl {
    let theta = (0..CONTROL_POINTS).map(|i| i as f64 / (CONTROL_POINTS - 1) as f64 * 80f64.to_radians()).collect();
    BSplineControl { power: vec![2.6e5; CONTROL_POINTS], theta, t_takeoff: 25.0 }
}

pub fn encode(ctrl: &BSplineControl) -> Vec<f64> {
    let mut x = Vec::with_capacity(DESIGN_DIM);
    x.extend(ctrl.power.iter().map(|p| (p - POWER_MIN) / (POWER_MAX - POWER_MIN)));
    x.extend(ctrl.theta.iter().map(|t| t / ANGLE_MAX));
    x.push((ctrl.t_takeoff - T_MIN) / (T_MAX - T_MIN));
    x
}

/// Maps a design vector into the box and back to physical units, returning
/// the squared distance that had to be clipped.
pub fn decode(x: &[f64]) -> (BSplineControl, f64) {
    let mut outside = 0.0;
    let mut clip = |v: f64| {
        let c = v.clamp(0.0, 1.0);
        outside += (v - c) * (v - c);
        c
    };
    let power = x[..CONTROL_POINTS].iter().map(|v| ControlInput::from_normalized([clip(*v), 0.0]).power).collect();
    let theta = x[CONTROL_POINTS..2 * CONTROL_POINTS].iter().map(|v| clip(*v) * ANGLE_MAX).collect();
    let t = T_MIN + clip(x[2 * CONTROL_POINTS]) * (T_MAX - T_MIN);
    (BSplineControl { power, theta, t_takeoff: t }, outside)
}

struct Problem<'a> {
    cond: FlightCondition,
    tight_cond: FlightCondition,
    vehicle: &'a VehicleConfig,
    env: &'a EnvConfig,
    tight_env: EnvConfig,
}

impl Problem<'_> {
    /// Signed, scaled constraint values (≤ 0 when satisfied) of the
    /// tightened problem.
    fn constraints(&self, r: &Rollout) -> Vec<f64> {
        let s = &r.stats;
        let e = &self.tight_env;
        let mut g = vec![
            (e.target_altitude - s.y_final) / e.target_altitude,
            (e.target_speed - s.vx_final) / e.target_speed,
            -s.min_y / 10.0,
            -s.min_chordwise / 10.0,
        ];
        if self.cond.path_constraints {
            let c = &self.tight_cond;
            g.push((s.max_alpha_efs - c.alpha_max_deg.to_radians()) * 10.0);
            g.push((s.max_accel - c.a_max_g * self.vehicle.gravity) / self.vehicle.gravity);
        }
        g
    }

    fn evaluate(&self, ctrl: &BSplineControl) -> Result<Rollout> {
        rollout(ctrl, &self.cond, self.vehicle, self.env)
    }
}

#[derive(Debug, Clone)]
struct Multipliers {
    lambda: Vec<f64>,
    penalty: f64,
}

impl Multipliers {
    fn merit(&self, objective: f64, g: &[f64]) -> f64 {
        let mu = self.penalty;
        objective
            + g.iter()
                .zip(&self.lambda)
                .map(|(gi, li)| {
                    let s = (gi + li / mu).max(0.0);
                    mu / 2.0 * s * s - li * li / (2.0 * mu)
                })
                .sum::<f64>()
    }
}

struct Tracker {
    best_feasible: Option<(f64, BSplineControl, Rollout)>,
    best_infeasible: Option<(f64, BSplineControl, Rollout)>,
}

impl Tracker {
    fn offer(&mut self, ctrl: &BSplineControl, r: &Rollout) {
        if r.feasible() {
            if self.best_feasible.as_ref().is_none_or(|(e, _, _)| r.energy_wh < *e) {
                self.best_feasible = Some((r.energy_wh, ctrl.clone(), r.clone()));
            }
        } else if self.best_feasible.is_none() {
            let worst = scaled_violation(&r.residuals);
            if self.best_infeasible.as_ref().is_none_or(|(w, _, _)| worst < *w) {
                self.best_infeasible = Some((worst, ctrl.clone(), r.clone()));
            }
        }
    }
}

fn scaled_violation(r: &Residuals) -> f64 {
    let scales = [305.0, 67.0, 10.0, 10.0, 0.1, 9.80665];
    r.as_array().iter().zip(scales).map(|(v, s)| v / s).fold(0.0, f64::max)
}

/// Minimises electrical energy subject to the takeoff targets, ground
/// clearance, positive chordwise inflow and, when enabled, the condition's
/// path limits. Deterministic for a fixed seed and budget.
pub fn optimize(
    cond: &FlightCondition,
    vehicle: &VehicleConfig,
    env: &EnvConfig,
    settings: &OptimizerSettings,
) -> Result<OptimizeResult> {
    optimize_from(&initial_guess(), cond, vehicle, env, settings)
}

pub fn optimize_from(
    start: &BSplineControl,
    cond: &FlightCondition,
    vehicle: &VehicleConfig,
    env: &EnvConfig,
    settings: &OptimizerSettings,
) -> Result<OptimizeResult> {
    start.validate()?;
    if settings.population < 4 || settings.inner_generations == 0 {
        return Err(Error::contract("optimizer needs population ≥ 4 and at least one inner generation"));
    }
    let mut tight_cond = *cond;
    tight_cond.alpha_max_deg -= settings.path_margin[0];
    tight_cond.a_max_g -= settings.path_margin[1];
    let mut tight_env = env.clone();
    tight_env.target_altitude += settings.target_margin[0];
    tight_env.target_speed += settings.target_margin[1];
    let problem = Problem { cond: *cond, tight_cond, vehicle, env, tight_env };

    let first = problem.evaluate(start)?;
    let mut tracker = Tracker { best_feasible: None, best_infeasible: None };
    tracker.offer(start, &first);

    let n_con = problem.constraints(&first).len();
    let mut mult = Multipliers { lambda: vec![0.0; n_con], penalty: settings.penalty_init };
    let mut es = Cmaes::new(encode(start), settings.sigma0, settings.population);
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let mut evaluations = 0;
    let mut history = Vec::new();
    let mut prev_violation = f64::INFINITY;

    let fitness = |mult: &Multipliers, x: &[f64]| -> (f64, BSplineControl, Option<Rollout>) {
        let (ctrl, outside) = decode(x);
        match problem.evaluate(&ctrl) {
            Ok(r) if !r.failed => {
                let g = problem.constraints(&r);
                let f = mult.merit(r.energy_wh / 1000.0, &g) + 10.0 * outside;
                (f, ctrl, Some(r))
            }
            _ => (FAILED_FITNESS + outside, ctrl, None),
        }
    };

    while evaluations + es.lambda() <= settings.budget {
        for _ in 0..settings.inner_generations {
            if evaluations + es.lambda() > settings.budget {
                break;
            }
            let cands = es.ask(&mut rng);
            let evals: Vec<_> = cands.par_iter().map(|c| fitness(&mult, c.x.as_slice())).collect();
            evaluations += cands.len();
            for (_, ctrl, r) in &evals {
                if let Some(r) = r {
                    tracker.offer(ctrl, r);
                }
            }
            let fit: Vec<f64> = evals.iter().map(|e| e.0).collect();
            es.tell(&cands, &fit);
        }
        if evaluations >= settings.budget {
            history.push(tracker.best_feasible.as_ref().map_or(f64::NAN, |b| b.0));
            break;
        }
        let (_, ctrl, r) = fitness(&mult, es.mean.as_slice());
        evaluations += 1;
        if let Some(r) = r {
            tracker.offer(&ctrl, &r);
            let g = problem.constraints(&r);
            let violation = g.iter().fold(0.0, |m: f64, v| m.max(*v));
            for (l, gi) in mult.lambda.iter_mut().zip(&g) {
                *l = (*l + mult.penalty * gi).max(0.0);
            }
            if violation > 0.0 && violation > 0.5 * prev_violation {
                mult.penalty *= settings.penalty_growth;
            }
            prev_violation = violation;
        } else {
            mult.penalty *= settings.penalty_growth;
        }
        history.push(tracker.best_feasible.as_ref().map_or(f64::NAN, |b| b.0));
    }

    let (control, r, feasible) = match (tracker.best_feasible, tracker.best_infeasible) {
        (Some((_, c, r)), _) => (c, r, true),
        (None, Some((_, c, r))) => (c, r, false),
        (None, None) => (start.clone(), first, false),
    };
    Ok(OptimizeResult {
        energy_wh: r.energy_wh,
        duration: r.duration(),
        residuals: r.residuals,
        feasible,
        control,
        evaluations,
        history,
    })
}
