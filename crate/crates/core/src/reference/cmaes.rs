//! Rank-μ covariance matrix adaptation evolution strategy.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

#[derive(Debug, Clone)]
pub struct Cmaes {
    dim: usize,
    lambda: usize,
    weights: Vec<f64>,
    mueff: f64,
    cc: f64,
    cs: f64,
    c1: f64,
    cmu: f64,
    damps: f64,
    chi_n: f64,
    pub mean: DVector<f64>,
    pub sigma: f64,
    cov: DMatrix<f64>,
    basis: DMatrix<f64>,
    scales: DVector<f64>,
    ps: DVector<f64>,
    pc: DVector<f64>,
    generation: usize,
    eigen_generation: usize,
}

/// A sampled candidate: its coordinates and the standard-normal draw.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub x: DVector<f64>,
    y: DVector<f64>,
}

impl Cmaes {
    pub fn new(mean: Vec<f64>, sigma: f64, lambda: usize) -> Self {
        let dim = mean.len();
        let n = dim as f64;
        let mu = lambda / 2;
        let raw: Vec<f64> = (0..mu).map(|i| ((lambda as f64 + 1.0) / 2.0).ln() - ((i + 1) as f64).ln()).collect();
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let mueff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();
        let cc = (4.0 + mueff / n) / (n + 4.0 + 2.0 * mueff / n);
        let cs = (mueff + 2.0) / (n + mueff + 5.0);
        let c1 = 2.0 / ((n + 1.3).powi(2) + mueff);
        let cmu = (1.0 - c1).min(2.0 * (mueff - 2.0 + 1.0 / mueff) / ((n + 2.0).powi(2) + mueff));
        let damps = 1.0 + 2.0 * (((mueff - 1.0) / (n + 1.0)).sqrt() - 1.0).max(0.0) + cs;
        let chi_n = n.sqrt() * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));
        Cmaes {
            dim,
            lambda,
            weights,
            mueff,
            cc,
            cs,
            c1,
            cmu,
            damps,
            chi_n,
            mean: DVector::from_vec(mean),
            sigma,
            cov: DMatrix::identity(dim, dim),
            basis: DMatrix::identity(dim, dim),
            scales: DVector::from_element(dim, 1.0),
            ps: DVector::zeros(dim),
            pc: DVector::zeros(dim),
            generation: 0,
            eigen_generation: 0,
        }
    }

    pub fn lambda(&self) -> usize {
        self.lambda
    }

    pub fn ask<R: Rng>(&self, rng: &mut R) -> Vec<Candidate> {
        (0..self.lambda)
            .map(|_| {
                let z = DVector::from_fn(self.dim, |_, _| rng.sample::<f64, _>(StandardNormal));
                let y = &self.basis * z.component_mul(&self.scales);
                let x = &self.mean + self.sigma * &y;
                Candidate { x, y }
            })
            .collect()
    }

    /// Updates the distribution from candidates and their fitness (lower is
    /// better). Ties are broken by sampling order.
    pub fn tell(&mut self, candidates: &[Candidate], fitness: &[f64]) {
        let n = self.dim as f64;
        let mut order: Vec<usize> = (0..candidates.len()).collect();
        order.sort_by(|&a, &b| fitness[a].total_cmp(&fitness[b]));
        let mu = self.weights.len();

        let mut y_w = DVector::zeros(self.dim);
        for (w, &i) in self.weights.iter().zip(&order[..mu]) {
            y_w += *w * &candidates[i].y;
        }
        self.mean += self.sigma * &y_w;

        // C^{-1/2} y_w = B D^{-1} Bᵀ y_w
        let inv_sqrt_y = &self.basis * (self.basis.transpose() * &y_w).component_div(&self.scales);
        self.ps = (1.0 - self.cs) * &self.ps + (self.cs * (2.0 - self.cs) * self.mueff).sqrt() * inv_sqrt_y;
        self.generation += 1;
        let ps_norm = self.ps.norm();
        let decay = 1.0 - (1.0 - self.cs).powi(2 * self.generation as i32);
        let hsig = ps_norm / decay.sqrt() / self.chi_n < 1.4 + 2.0 / (n + 1.0);
        let h = if hsig { 1.0 } else { 0.0 };
        self.pc = (1.0 - self.cc) * &self.pc + h * (self.cc * (2.0 - self.cc) * self.mueff).sqrt() * &y_w;

        let mut rank_mu = DMatrix::zeros(self.dim, self.dim);
        for (w, &i) in self.weights.iter().zip(&order[..mu]) {
            let y = &candidates[i].y;
            rank_mu += *w * y * y.transpose();
        }
        let delta_h = (1.0 - h) * self.cc * (2.0 - self.cc);
        self.cov = (1.0 - self.c1 - self.cmu + self.c1 * delta_h) * &self.cov
            + self.c1 * &self.pc * self.pc.transpose()
            + self.cmu * rank_mu;
        self.sigma *= ((self.cs / self.damps) * (ps_norm / self.chi_n - 1.0)).exp();

        let lazy_gap = (self.lambda as f64 / ((self.c1 + self.cmu) * n * 10.0)).max(1.0) as usize;
        if self.generation - self.eigen_generation >= lazy_gap {
            self.decompose();
        }
    }

    fn decompose(&mut self) {
        self.eigen_generation = self.generation;
        let sym = (&self.cov + self.cov.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym);
        self.scales = eig.eigenvalues.map(|v| v.max(1e-20).sqrt());
        self.basis = eig.eigenvectors;
        self.cov = &self.basis * DMatrix::from_diagonal(&self.scales.map(|s| s * s)) * self.basis.transpose();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn minimise(f: impl Fn(&DVector<f64>) -> f64, x0: Vec<f64>, gens: usize, seed: u64) -> DVector<f64> {
        let mut es = Cmaes::new(x0, 0.5, 12);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..gens {
            let cands = es.ask(&mut rng);
            let fit: Vec<f64> = cands.iter().map(|c| f(&c.x)).collect();
            es.tell(&cands, &fit);
        }
        es.mean.clone()
    }

    #[test]
    fn solves_ill_conditioned_quadratic() {
        let f = |x: &DVector<f64>| (0..x.len()).map(|i| 10f64.powi(i as i32) * (x[i] - 1.0).powi(2)).sum::<f64>();
        let m = minimise(f, vec![0.0; 5], 400, 1);
        for v in m.iter() {
            assert!((v - 1.0).abs() < 1e-3, "{m}");
        }
    }

    #[test]
    fn rosenbrock() {
        let f = |x: &DVector<f64>| {
            (0..x.len() - 1).map(|i| 100.0 * (x[i + 1] - x[i] * x[i]).powi(2) + (1.0 - x[i]).powi(2)).sum::<f64>()
        };
        let m = minimise(f, vec![0.0; 4], 1500, 2);
        assert!(f(&m) < 1e-6, "{m}");
    }

    #[test]
    fn seed_deterministic() {
        let f = |x: &DVector<f64>| x.norm_squared();
        assert_eq!(minimise(f, vec![1.0; 6], 30, 9), minimise(f, vec![1.0; 6], 30, 9));
    }
}
