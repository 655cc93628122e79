//! Dense vectors, elementwise sign selections and the optimizer state triple.

use alloc::vec::Vec;
use core::ops::{Deref, DerefMut};

use crate::{Error, Result};

/// A dense vector of `f64` entries.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(transparent)
)]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn zeros(n: usize) -> Self {
        Vector(alloc::vec![0.0; n])
    }

    pub fn filled(n: usize, value: f64) -> Self {
        Vector(alloc::vec![value; n])
    }

    pub fn from_fn(n: usize, f: impl FnMut(usize) -> f64) -> Self {
        Vector((0..n).map(f).collect())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn norm2(&self) -> f64 {
        norm2(&self.0)
    }

    pub fn norm_inf(&self) -> f64 {
        self.0.iter().fold(0.0, |acc: f64, v| acc.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// Passes `self` through if every entry is finite.
    pub fn finite(self, context: &'static str) -> Result<Self> {
        if self.is_finite() {
            Ok(self)
        } else {
            Err(Error::NonFinite { context })
        }
    }

    pub fn map(&self, f: impl FnMut(f64) -> f64) -> Vector {
        Vector(self.0.iter().copied().map(f).collect())
    }

    pub fn zip_map(&self, other: &[f64], mut f: impl FnMut(f64, f64) -> f64) -> Result<Vector> {
        same_len(self.len(), other.len())?;
        Ok(Vector(
            self.0.iter().zip(other).map(|(&a, &b)| f(a, b)).collect(),
        ))
    }

    pub fn scale(&self, c: f64) -> Vector {
        self.map(|v| c * v)
    }

    pub fn dot(&self, other: &[f64]) -> Result<f64> {
        same_len(self.len(), other.len())?;
        Ok(self.0.iter().zip(other).map(|(a, b)| a * b).sum())
    }

    pub fn add(&self, other: &[f64]) -> Result<Vector> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &[f64]) -> Result<Vector> {
        self.zip_map(other, |a, b| a - b)
    }
}

impl Deref for Vector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for Vector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for Vector {
    fn from(v: Vec<f64>) -> Self {
        Vector(v)
    }
}

impl From<&[f64]> for Vector {
    fn from(v: &[f64]) -> Self {
        Vector(v.to_vec())
    }
}

impl<const N: usize> From<[f64; N]> for Vector {
    fn from(v: [f64; N]) -> Self {
        Vector(v.to_vec())
    }
}

impl FromIterator<f64> for Vector {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        Vector(iter.into_iter().collect())
    }
}

pub(crate) fn same_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

pub(crate) fn norm2(v: &[f64]) -> f64 {
    libm::sqrt(v.iter().map(|a| a * a).sum())
}

/// `(1 - w) * a + w * b` for `w` in `[0, 1]`, with rounding kept inside the
/// segment `[min(a, b), max(a, b)]`.
#[inline]
pub(crate) fn convex_combination(a: f64, b: f64, w: f64) -> f64 {
    let lo = a.min(b);
    let hi = a.max(b);
    ((1.0 - w) * a + w * b).clamp(lo, hi)
}

/// Elementwise product `a ⊙ b`.
pub fn hadamard(a: &[f64], b: &[f64]) -> Result<Vector> {
    same_len(a.len(), b.len())?;
    Vector(a.iter().zip(b).map(|(x, y)| x * y).collect()).finite("hadamard")
}

/// Elementwise `(|v_i| + shift)^exponent`.
pub fn shifted_power(v: &[f64], shift: f64, exponent: f64) -> Result<Vector> {
    if !(shift > 0.0) || !shift.is_finite() {
        return Err(Error::param("shift", "must be positive and finite"));
    }
    Vector(
        v.iter()
            .map(|x| libm::pow(x.abs() + shift, exponent))
            .collect(),
    )
    .finite("shifted_power")
}

/// Strict sign: `-1`, `0` or `1`, with `0` exactly at zero.
#[inline]
pub fn sign_tilde_scalar(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Elementwise strict sign.
pub fn sign_tilde(x: &[f64]) -> Vector {
    x.iter().copied().map(sign_tilde_scalar).collect()
}

/// A single-valued selection of the set-valued sign, which is `[-1, 1]` at
/// zero.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SignSelection {
    at_zero: f64,
}

impl Default for SignSelection {
    fn default() -> Self {
        SignSelection { at_zero: 0.0 }
    }
}

impl SignSelection {
    pub fn new(at_zero: f64) -> Result<Self> {
        if !(-1.0..=1.0).contains(&at_zero) {
            return Err(Error::param("at_zero", "must lie in [-1, 1]"));
        }
        Ok(SignSelection { at_zero })
    }

    pub fn at_zero(&self) -> f64 {
        self.at_zero
    }

    #[inline]
    pub fn scalar(&self, x: f64) -> f64 {
        if x == 0.0 {
            self.at_zero
        } else {
            sign_tilde_scalar(x)
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vector {
        x.iter().map(|&v| self.scalar(v)).collect()
    }
}

/// Iterate, momentum and second-moment estimator, plus the iteration count.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OptimizerState {
    pub x: Vector,
    pub m: Vector,
    pub v: Vector,
    pub k: u64,
}

impl OptimizerState {
    /// Starts at `x` with `m = 0` and `v = 0`.
    pub fn new(x: Vector) -> Self {
        let n = x.len();
        OptimizerState {
            x,
            m: Vector::zeros(n),
            v: Vector::zeros(n),
            k: 0,
        }
    }

    pub fn with_moments(x: Vector, m: Vector, v: Vector) -> Result<Self> {
        same_len(x.len(), m.len())?;
        same_len(x.len(), v.len())?;
        if v.iter().any(|&e| !(e >= 0.0)) {
            return Err(Error::InvalidState(
                "second-moment estimate must be nonnegative",
            ));
        }
        Ok(OptimizerState { x, m, v, k: 0 })
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }
}
