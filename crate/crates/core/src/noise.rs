//! Additive subgradient noise: Gaussian, uniform and alpha-stable.

use core::f64::consts::{FRAC_PI_2, PI};

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::{Error, Result, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)
)]
pub enum NoiseModel {
    #[default]
    None,
    Gaussian {
        sigma: f64,
    },
    /// Uniform on `[-bound, bound]`.
    Uniform {
        bound: f64,
    },
    Stable {
        alpha: f64,
        beta: f64,
        scale: f64,
    },
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            NoiseModel::None => Ok(()),
            NoiseModel::Gaussian { sigma } if !(sigma >= 0.0) || !sigma.is_finite() => {
                Err(Error::param("sigma", "must be nonnegative"))
            }
            NoiseModel::Uniform { bound } if !(bound >= 0.0) || !bound.is_finite() => {
                Err(Error::param("bound", "must be nonnegative"))
            }
            NoiseModel::Stable { alpha, beta, scale } => {
                AlphaStable::new(alpha, beta, scale).map(|_| ())
            }
            _ => Ok(()),
        }
    }

    pub fn is_none(&self) -> bool {
        matches!(self, NoiseModel::None)
    }
}

/// Alpha-stable law for `α ∈ (1, 2]` in the 1-parameterization with location
/// zero, so the mean is zero. Sampled by the Chambers–Mallows–Stuck method.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaStable {
    alpha: f64,
    scale: f64,
    // Shift B and factor S of the construction.
    b: f64,
    s: f64,
}

impl AlphaStable {
    pub fn new(alpha: f64, beta: f64, scale: f64) -> Result<Self> {
        if !(alpha > 1.0 && alpha <= 2.0) {
            return Err(Error::param(
                "alpha",
                "stability index must lie in (1, 2]; the mean is undefined for alpha <= 1",
            ));
        }
        if !(-1.0..=1.0).contains(&beta) {
            return Err(Error::param("beta", "skewness must lie in [-1, 1]"));
        }
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::param("scale", "must be positive"));
        }
        let t = beta * libm::tan(FRAC_PI_2 * alpha);
        Ok(AlphaStable {
            alpha,
            scale,
            b: libm::atan(t) / alpha,
            s: libm::pow(1.0 + t * t, 1.0 / (2.0 * alpha)),
        })
    }
}

impl Distribution<f64> for AlphaStable {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let a = self.alpha;
        let u: f64 = rng.random::<f64>();
        let v = PI * (u - 0.5);
        let w: f64 = Exp1.sample(rng);
        let z = a * (v + self.b);
        let x = self.s * libm::sin(z) / libm::pow(libm::cos(v), 1.0 / a)
            * libm::pow(libm::cos(v - z) / w, (1.0 - a) / a);
        self.scale * x
    }
}

/// `n` i.i.d. draws from `model`.
pub fn sample_noise<R: Rng + ?Sized>(model: &NoiseModel, rng: &mut R, n: usize) -> Result<Vector> {
    model.validate()?;
    let out: Vector = match *model {
        NoiseModel::None => Vector::zeros(n),
        NoiseModel::Gaussian { sigma } => (0..n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(rng);
                sigma * z
            })
            .collect(),
        NoiseModel::Uniform { bound } => (0..n)
            .map(|_| bound * (2.0 * rng.random::<f64>() - 1.0))
            .collect(),
        NoiseModel::Stable { alpha, beta, scale } => {
            let d = AlphaStable::new(alpha, beta, scale)?;
            (0..n).map(|_| d.sample(rng)).collect()
        }
    };
    out.finite("noise sample")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::vec::Vec;

    fn draws(model: NoiseModel, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        sample_noise(&model, &mut rng, n).unwrap().into_inner()
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(AlphaStable::new(1.0, 0.0, 1.0).is_err());
        assert!(AlphaStable::new(0.5, 0.0, 1.0).is_err());
        assert!(AlphaStable::new(2.1, 0.0, 1.0).is_err());
        assert!(AlphaStable::new(1.5, 1.5, 1.0).is_err());
        assert!(AlphaStable::new(1.5, 0.0, 0.0).is_err());
        assert!(NoiseModel::Gaussian { sigma: -1.0 }.validate().is_err());
    }

    #[test]
    fn stable_two_is_gaussian_with_double_variance() {
        let sigma = 0.7;
        let x = draws(
            NoiseModel::Stable {
                alpha: 2.0,
                beta: 0.0,
                scale: sigma,
            },
            1_000_000,
            1,
        );
        let mean = x.iter().sum::<f64>() / x.len() as f64;
        let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (x.len() - 1) as f64;
        assert!(
            (var / (2.0 * sigma * sigma) - 1.0).abs() < 0.05,
            "var = {var}"
        );
    }

    #[test]
    fn gaussian_mean_within_clt_bound() {
        let sigma = 3.0;
        let x = draws(NoiseModel::Gaussian { sigma }, 1_000_000, 2);
        let mean = x.iter().sum::<f64>() / x.len() as f64;
        assert!(mean.abs() < 5.0 * sigma / 1e3);
    }

    #[test]
    fn uniform_stays_in_bounds() {
        let x = draws(NoiseModel::Uniform { bound: 0.5 }, 10_000, 3);
        assert!(x.iter().all(|v| v.abs() <= 0.5));
        assert_eq!(draws(NoiseModel::None, 4, 0), [0.0; 4]);
    }

    #[test]
    fn reproducible_from_seed() {
        let m = NoiseModel::Stable {
            alpha: 1.1,
            beta: 1.0,
            scale: 0.2,
        };
        assert_eq!(draws(m, 100, 9), draws(m, 100, 9));
        assert_ne!(draws(m, 100, 9), draws(m, 100, 10));
    }
}
