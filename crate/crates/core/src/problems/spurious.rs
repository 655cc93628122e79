use super::{KinkPolicy, Problem};
use crate::{Result, Vector};

/// `f(x) = relu(x) − relu(−x)`, which equals `x`.
///
/// Differentiating through the composition gives `relu'(x) + relu'(−x)`, so
/// at `x = 0` the selection is `2 · relu'(0)`: zero under the common
/// `relu'(0) = 0` convention, although the Clarke subdifferential is `{1}`
/// everywhere. The conservative field of the composition is `{1}` off zero
/// and `[0, 2]` at zero, so `x = 0` is a spurious stationary point.
#[derive(Debug, Clone, Copy, Default)]
pub struct Spurious;

fn relu(t: f64) -> f64 {
    t.max(0.0)
}

impl Problem for Spurious {
    fn name(&self) -> &str {
        "spurious"
    }

    fn dim(&self) -> usize {
        1
    }

    fn num_components(&self) -> usize {
        1
    }

    fn component_value(&self, _i: usize, x: &[f64]) -> f64 {
        relu(x[0]) - relu(-x[0])
    }

    fn component_subgrad(&self, _i: usize, x: &[f64], policy: &KinkPolicy) -> Vector {
        // d/dx relu(x) = relu'(x); d/dx [-relu(-x)] = relu'(-x).
        Vector::from([policy.relu_derivative(x[0]) + policy.relu_derivative(-x[0])])
    }

    fn gap(&self, x: &[f64]) -> Result<f64> {
        Ok(if x[0] == 0.0 { 0.0 } else { 1.0 })
    }

    fn stationary_distance(&self, x: &[f64]) -> Result<f64> {
        Ok(x[0].abs())
    }

    fn kink_margin(&self, _i: usize, x: &[f64]) -> f64 {
        x[0].abs()
    }
}

/// The spurious problem.
pub fn spurious_problem() -> Spurious {
    Spurious
}
