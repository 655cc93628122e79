//! Finite-sum nonsmooth objectives `f(x) = (1/N) Σ f_i(x)`.
//!
//! Each problem returns, per component, one element of a conservative field
//! of `f_i`. Where the field is set-valued the [`KinkPolicy`] decides which
//! element is returned, mirroring the choice an automatic-differentiation
//! library makes for `relu'(0)` or `|·|'(0)`.

use alloc::boxed::Box;
use alloc::vec::Vec;

use rand::RngCore;

use crate::vector::same_len;
use crate::{Error, Result, Vector};

mod l1;
mod linear;
mod max_affine;
pub mod mlp;
mod quadratic;
mod spurious;
pub mod tape;

pub use l1::L1Center;
pub use linear::NoisyLinear;
pub use max_affine::MaxAffine;
pub use mlp::{Activation, Dataset, Loss, Mlp, MlpSpec};
pub use quadratic::Quadratic;
pub use spurious::{spurious_problem, Spurious};

/// How ties among the pieces of a pointwise max are resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(rename_all = "snake_case")
)]
pub enum MaxTie {
    /// Slope of the first active piece.
    #[default]
    First,
    /// Average slope of all active pieces.
    Mean,
}

/// Values returned at the kinks of the nonsmooth primitives.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(default)
)]
pub struct KinkPolicy {
    /// `relu'(0)`, in `[0, 1]`.
    pub relu_at_zero: f64,
    /// `|·|'(0)`, in `[-1, 1]`.
    pub abs_at_zero: f64,
    pub max_tie: MaxTie,
}

impl Default for KinkPolicy {
    fn default() -> Self {
        KinkPolicy {
            relu_at_zero: 0.0,
            abs_at_zero: 0.0,
            max_tie: MaxTie::First,
        }
    }
}

impl KinkPolicy {
    pub fn with_relu_at_zero(relu_at_zero: f64) -> Result<Self> {
        let p = KinkPolicy {
            relu_at_zero,
            ..Default::default()
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.relu_at_zero) {
            return Err(Error::param("relu_at_zero", "must lie in [0, 1]"));
        }
        if !(-1.0..=1.0).contains(&self.abs_at_zero) {
            return Err(Error::param("abs_at_zero", "must lie in [-1, 1]"));
        }
        Ok(())
    }

    #[inline]
    pub(crate) fn abs_derivative(&self, t: f64) -> f64 {
        if t > 0.0 {
            1.0
        } else if t < 0.0 {
            -1.0
        } else {
            self.abs_at_zero
        }
    }

    #[inline]
    pub(crate) fn relu_derivative(&self, t: f64) -> f64 {
        if t > 0.0 {
            1.0
        } else if t < 0.0 {
            0.0
        } else {
            self.relu_at_zero
        }
    }
}

/// A finite-sum objective with per-component conservative selections.
///
/// Implementors may assume `i < num_components()` and `x.len() == dim()`;
/// the free functions in this module ([`eval`], [`subgrad`], ...) check both.
pub trait Problem: Send + Sync {
    fn name(&self) -> &str;
    fn dim(&self) -> usize;
    fn num_components(&self) -> usize;
    fn component_value(&self, i: usize, x: &[f64]) -> f64;
    fn component_subgrad(&self, i: usize, x: &[f64], policy: &KinkPolicy) -> Vector;

    /// `dist(0, D_f(x))` in closed form, when available.
    fn gap(&self, _x: &[f64]) -> Result<f64> {
        Err(Error::Unsupported {
            what: "closed-form stationarity gap",
        })
    }

    /// Euclidean distance from `x` to the stationary set `{y : 0 ∈ D_f(y)}`,
    /// when available.
    fn stationary_distance(&self, _x: &[f64]) -> Result<f64> {
        Err(Error::Unsupported {
            what: "closed-form distance to the stationary set",
        })
    }

    /// Smallest distance of any kink argument of component `i` to its kink.
    /// `INFINITY` for smooth components.
    fn kink_margin(&self, _i: usize, _x: &[f64]) -> f64 {
        f64::INFINITY
    }

    /// A starting point for randomized runs.
    fn initial_point(&self, rng: &mut dyn RngCore) -> Vector {
        use rand::Rng;
        Vector::from_fn(self.dim(), |_| rng.random_range(-1.0..1.0))
    }
}

fn check(problem: &dyn Problem, i: usize, x: &[f64]) -> Result<()> {
    check_x(problem, x)?;
    if i >= problem.num_components() {
        return Err(Error::IndexOutOfRange {
            index: i,
            len: problem.num_components(),
        });
    }
    Ok(())
}

fn check_x(problem: &dyn Problem, x: &[f64]) -> Result<()> {
    same_len(problem.dim(), x.len())?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            context: "problem input",
        });
    }
    Ok(())
}

/// `f_i(x)`.
pub fn eval(problem: &dyn Problem, i: usize, x: &[f64]) -> Result<f64> {
    check(problem, i, x)?;
    let v = problem.component_value(i, x);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite {
            context: "component value",
        })
    }
}

/// An element of the conservative field of `f_i` at `x`.
pub fn subgrad(problem: &dyn Problem, i: usize, x: &[f64], policy: &KinkPolicy) -> Result<Vector> {
    check(problem, i, x)?;
    problem
        .component_subgrad(i, x, policy)
        .finite("component subgradient")
}

/// `f(x) = (1/N) Σ f_i(x)`.
pub fn objective(problem: &dyn Problem, x: &[f64]) -> Result<f64> {
    check_x(problem, x)?;
    let n = problem.num_components();
    let total: f64 = (0..n).map(|i| problem.component_value(i, x)).sum();
    let v = total / n as f64;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite {
            context: "objective",
        })
    }
}

/// The mean of the component selections, an element of `D_f(x)`.
pub fn full_subgrad(problem: &dyn Problem, x: &[f64], policy: &KinkPolicy) -> Result<Vector> {
    let parts = component_subgrads(problem, x, policy)?;
    Ok(mean_of(&parts, problem.dim()))
}

/// All component selections at `x`.
pub fn component_subgrads(
    problem: &dyn Problem,
    x: &[f64],
    policy: &KinkPolicy,
) -> Result<Vec<Vector>> {
    check_x(problem, x)?;
    (0..problem.num_components())
        .map(|i| {
            problem
                .component_subgrad(i, x, policy)
                .finite("component subgradient")
        })
        .collect()
}

pub(crate) fn mean_of(parts: &[Vector], n: usize) -> Vector {
    let mut acc = Vector::zeros(n);
    for p in parts {
        for (a, b) in acc.iter_mut().zip(p.iter()) {
            *a += b;
        }
    }
    let inv = 1.0 / parts.len() as f64;
    acc.map(|v| v * inv)
}

/// `dist(0, D_f(x))`; reports [`Error::Unsupported`] without a closed form.
pub fn gap(problem: &dyn Problem, x: &[f64]) -> Result<f64> {
    check_x(problem, x)?;
    problem.gap(x)
}

/// `min_i kink_margin(i, x)`.
pub fn kink_margin(problem: &dyn Problem, x: &[f64]) -> f64 {
    (0..problem.num_components())
        .map(|i| problem.kink_margin(i, x))
        .fold(f64::INFINITY, f64::min)
}

/// Central-difference estimate of `∇f_i(x)` with step `h`.
pub fn finite_diff(problem: &dyn Problem, i: usize, x: &[f64], h: f64) -> Result<Vector> {
    check(problem, i, x)?;
    if !(h > 0.0) {
        return Err(Error::param("h", "must be positive"));
    }
    let mut probe = x.to_vec();
    let grad = (0..x.len())
        .map(|j| {
            let orig = probe[j];
            probe[j] = orig + h;
            let up = problem.component_value(i, &probe);
            probe[j] = orig - h;
            let down = problem.component_value(i, &probe);
            probe[j] = orig;
            (up - down) / (2.0 * h)
        })
        .collect::<Vector>();
    grad.finite("finite difference")
}

/// Either the exact `dist(0, D_f(x))` or, for problems without a closed
/// form, the sup-norm of the mean conservative selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Stationarity {
    Exact(f64),
    Surrogate(f64),
}

impl Stationarity {
    pub fn value(&self) -> f64 {
        match *self {
            Stationarity::Exact(v) | Stationarity::Surrogate(v) => v,
        }
    }
}

/// Exact gap when the problem has one, else the surrogate.
pub fn stationarity(problem: &dyn Problem, x: &[f64], policy: &KinkPolicy) -> Result<Stationarity> {
    match gap(problem, x) {
        Ok(g) => Ok(Stationarity::Exact(g)),
        Err(Error::Unsupported { .. }) => Ok(Stationarity::Surrogate(
            full_subgrad(problem, x, policy)?.norm_inf(),
        )),
        Err(e) => Err(e),
    }
}

/// Identifiers accepted by [`build`].
pub const CATALOG: &[&str] = &[
    "l1_center",
    "max_affine",
    "spurious",
    "quadratic",
    "noisy_linear",
    "relu_mlp",
];

/// Builds a catalog problem with its default parameters from a string id.
///
/// Problems with random data draw it from a fixed internal seed so that the
/// id alone determines the instance.
pub fn build(id: &str) -> Result<Box<dyn Problem>> {
    Ok(match id {
        "l1_center" => Box::new(L1Center::synthetic(10, 5, 0x11C3)),
        "max_affine" => Box::new(MaxAffine::default_2d()),
        "spurious" => Box::new(Spurious),
        "quadratic" => Box::new(Quadratic::new(Vector::zeros(2))),
        "noisy_linear" => Box::new(NoisyLinear::synthetic(20, 200, 1.0, 0x11EA)?),
        "relu_mlp" => Box::new(Mlp::new(
            MlpSpec::default_relu(),
            Dataset::two_clusters(256, 0x5EED),
        )?),
        _ => {
            return Err(Error::param(
                "problem",
                alloc::format!("unknown problem id `{id}`"),
            ));
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_builds() {
        for id in CATALOG {
            let p = build(id).unwrap();
            assert!(p.dim() > 0 && p.num_components() > 0, "{id}");
        }
        assert!(build("resnet50").is_err());
    }

    #[test]
    fn eval_checks_index_and_dim() {
        let p = L1Center::new(alloc::vec![Vector::from([1.0, 1.0])]).unwrap();
        assert_eq!(eval(&p, 0, &[1.0, 1.0]).unwrap(), 0.0);
        assert!(matches!(
            eval(&p, 1, &[1.0, 1.0]),
            Err(Error::IndexOutOfRange { index: 1, len: 1 })
        ));
        assert!(matches!(
            eval(&p, 0, &[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(subgrad(&p, 3, &[1.0, 1.0], &KinkPolicy::default()).is_err());
    }

    #[test]
    fn finite_diff_examples() {
        let q = Quadratic::new(Vector::zeros(2));
        let fd = finite_diff(&q, 0, &[1.0, 2.0], 1e-6).unwrap();
        assert!((fd[0] - 1.0).abs() < 1e-8 && (fd[1] - 2.0).abs() < 1e-8);

        let l1 = L1Center::new(alloc::vec![Vector::zeros(2)]).unwrap();
        let fd = finite_diff(&l1, 0, &[2.0, -3.0], 1e-6).unwrap();
        assert!((fd[0] - 1.0).abs() < 1e-9 && (fd[1] + 1.0).abs() < 1e-9);
        assert!(finite_diff(&l1, 0, &[2.0, -3.0], 0.0).is_err());
    }

    #[test]
    fn kink_policy_validation() {
        assert!(KinkPolicy::with_relu_at_zero(1.5).is_err());
        let bad = KinkPolicy {
            abs_at_zero: 2.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn surrogate_used_without_closed_form() {
        let p = build("relu_mlp").unwrap();
        let x = Vector::zeros(p.dim());
        assert!(matches!(
            gap(p.as_ref(), &x),
            Err(Error::Unsupported { .. })
        ));
        assert!(matches!(
            stationarity(p.as_ref(), &x, &KinkPolicy::default()).unwrap(),
            Stationarity::Surrogate(_)
        ));
    }
}
