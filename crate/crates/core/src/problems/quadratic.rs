use super::{KinkPolicy, Problem};
use crate::{Result, Vector};

/// `f(x) = ½‖x − c‖²`.
#[derive(Debug, Clone)]
pub struct Quadratic {
    center: Vector,
}

impl Quadratic {
    pub fn new(center: Vector) -> Self {
        Quadratic { center }
    }
}

impl Problem for Quadratic {
    fn name(&self) -> &str {
        "quadratic"
    }

    fn dim(&self) -> usize {
        self.center.len()
    }

    fn num_components(&self) -> usize {
        1
    }

    fn component_value(&self, _i: usize, x: &[f64]) -> f64 {
        0.5 * x
            .iter()
            .zip(self.center.iter())
            .map(|(a, c)| (a - c) * (a - c))
            .sum::<f64>()
    }

    fn component_subgrad(&self, _i: usize, x: &[f64], _policy: &KinkPolicy) -> Vector {
        x.iter()
            .zip(self.center.iter())
            .map(|(a, c)| a - c)
            .collect()
    }

    fn gap(&self, x: &[f64]) -> Result<f64> {
        self.stationary_distance(x)
    }

    fn stationary_distance(&self, x: &[f64]) -> Result<f64> {
        Ok(libm::sqrt(
            x.iter()
                .zip(self.center.iter())
                .map(|(a, c)| (a - c) * (a - c))
                .sum(),
        ))
    }
}
