//! Latin hypercube sampling over the flight-condition box.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::rollout::{FlightCondition, CONDITION_BOUNDS};
use crate::error::{Error, Result};

/// `n` points in the unit hypercube of dimension `dim`: each axis is cut
/// into `n` equal bins holding exactly one sample, with independent random
/// pairing across axes.
pub fn unit_hypercube(n: usize, dim: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let mut points = vec![vec![0.0; dim]; n];
    for d in 0..dim {
        let mut bins: Vec<usize> = (0..n).collect();
        bins.shuffle(rng);
        for (p, bin) in points.iter_mut().zip(bins) {
            p[d] = (bin as f64 + rng.gen::<f64>()) / n as f64;
        }
    }
    points
}

pub fn lhs_sample(n: usize, seed: u64, path_constraints: bool) -> Result<Vec<FlightCondition>> {
    if n == 0 {
        return Err(Error::contract("LHS needs at least one sample"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(unit_hypercube(n, CONDITION_BOUNDS.len(), &mut rng)
        .into_iter()
        .map(|u| {
            let mut v = [0.0; 5];
            for (i, (lo, hi)) in CONDITION_BOUNDS.iter().enumerate() {
                v[i] = lo + u[i] * (hi - lo);
            }
            FlightCondition::from_array(v, path_constraints)
        })
        .collect())
}
