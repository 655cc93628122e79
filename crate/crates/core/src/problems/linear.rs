use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{KinkPolicy, Problem};
use crate::linalg::solve;
use crate::{Error, Result, Vector};

/// Least squares `f_i(x) = ½(⟨a_i, x⟩ − b_i)²` with noisy labels.
#[derive(Debug, Clone)]
pub struct NoisyLinear {
    features: Vec<Vector>,
    labels: Vec<f64>,
    minimizer: Vector,
    optimum: f64,
}

impl NoisyLinear {
    pub fn new(features: Vec<Vector>, labels: Vec<f64>) -> Result<Self> {
        let n = features.first().map(|a| a.len()).unwrap_or(0);
        if n == 0 || features.iter().any(|a| a.len() != n) {
            return Err(Error::param(
                "features",
                "rows must share a positive dimension",
            ));
        }
        if labels.len() != features.len() {
            return Err(Error::param("labels", "one label per feature row"));
        }
        let mut gram = alloc::vec![0.0; n * n];
        let mut rhs = alloc::vec![0.0; n];
        for (a, &b) in features.iter().zip(&labels) {
            for r in 0..n {
                rhs[r] += a[r] * b;
                for c in 0..n {
                    gram[r * n + c] += a[r] * a[c];
                }
            }
        }
        let minimizer: Vector = solve(gram, rhs)
            .ok_or_else(|| Error::param("features", "normal equations are singular"))?
            .into();
        let mut p = NoisyLinear {
            features,
            labels,
            minimizer,
            optimum: 0.0,
        };
        p.optimum = (0..p.labels.len())
            .map(|i| p.component_value(i, &p.minimizer))
            .sum::<f64>()
            / p.labels.len() as f64;
        Ok(p)
    }

    /// `count` rows with standard normal features, a standard normal ground
    /// truth and additive Gaussian label noise of standard deviation
    /// `label_noise`.
    pub fn synthetic(n: usize, count: usize, label_noise: f64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let truth = Vector::from_fn(n, |_| rng.sample(StandardNormal));
        let features: Vec<Vector> = (0..count)
            .map(|_| Vector::from_fn(n, |_| rng.sample(StandardNormal)))
            .collect();
        let labels = features
            .iter()
            .map(|a| {
                let noise: f64 = rng.sample(StandardNormal);
                a.iter().zip(truth.iter()).map(|(x, y)| x * y).sum::<f64>() + label_noise * noise
            })
            .collect();
        NoisyLinear::new(features, labels)
    }

    /// The least-squares solution.
    pub fn minimizer(&self) -> &Vector {
        &self.minimizer
    }

    /// `f` at the least-squares solution, the best value reachable without
    /// gradient noise.
    pub fn optimum_value(&self) -> f64 {
        self.optimum
    }

    fn residual(&self, i: usize, x: &[f64]) -> f64 {
        self.features[i]
            .iter()
            .zip(x)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            - self.labels[i]
    }
}

impl Problem for NoisyLinear {
    fn name(&self) -> &str {
        "noisy_linear"
    }

    fn dim(&self) -> usize {
        self.minimizer.len()
    }

    fn num_components(&self) -> usize {
        self.labels.len()
    }

    fn component_value(&self, i: usize, x: &[f64]) -> f64 {
        let r = self.residual(i, x);
        0.5 * r * r
    }

    fn component_subgrad(&self, i: usize, x: &[f64], _policy: &KinkPolicy) -> Vector {
        self.features[i].scale(self.residual(i, x))
    }

    fn gap(&self, x: &[f64]) -> Result<f64> {
        let n = self.num_components() as f64;
        let mut grad = Vector::zeros(self.dim());
        for i in 0..self.num_components() {
            let r = self.residual(i, x);
            for (g, a) in grad.iter_mut().zip(self.features[i].iter()) {
                *g += r * a;
            }
        }
        Ok(grad.norm2() / n)
    }

    fn stationary_distance(&self, x: &[f64]) -> Result<f64> {
        Ok(crate::vector::norm2(
            &x.iter()
                .zip(self.minimizer.iter())
                .map(|(a, b)| a - b)
                .collect::<Vec<_>>(),
        ))
    }
}
