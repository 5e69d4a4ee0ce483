use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::train::{EnvStep, Environment};
use crate::error::{Error, Result};

/// Point mass on a line driven by a bounded force; reward is the negative
/// squared distance to a target coordinate.
#[derive(Debug, Clone)]
pub struct DoubleIntegrator {
    pub target: f64,
    pub dt: f64,
    pub max_accel: f64,
    pub horizon: usize,
    x: f64,
    v: f64,
    t: usize,
}

impl Default for DoubleIntegrator {
    fn default() -> Self {
        DoubleIntegrator { target: 1.0, dt: 0.1, max_accel: 2.0, horizon: 50, x: 0.0, v: 0.0, t: 0 }
    }
}

impl DoubleIntegrator {
    fn obs(&self) -> Vec<f64> {
        vec![self.x - self.target, self.v]
    }
}

impl Environment for DoubleIntegrator {
    fn obs_dim(&self) -> usize {
        2
    }

    fn action_dim(&self) -> usize {
        1
    }

    fn reset(&mut self, seed: u64) -> Result<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.x = rng.gen_range(-0.2..0.2);
        self.v = 0.0;
        self.t = 0;
        Ok(self.obs())
    }

    fn step(&mut self, action: &[f64]) -> Result<EnvStep> {
        if action.len() != 1 || !(-1.0..=1.0).contains(&action[0]) {
            return Err(Error::contract(format!("toy action {action:?} outside [-1, 1]")));
        }
        self.v += action[0] * self.max_accel * self.dt;
        self.x += self.v * self.dt;
        self.t += 1;
        let e = self.x - self.target;
        Ok(EnvStep {
            observation: self.obs(),
            reward: -e * e,
            terminal: false,
            truncated: self.t >= self.horizon,
            success: e.abs() < 0.05 && self.v.abs() < 0.1,
        })
    }
}
