//! The clipping projection and the clipped methods SGD-C and ADAM-C.

use crate::optim::{check_weight, momentum_update, Scaling};
use crate::vector::{convex_combination, norm2, same_len, sign_tilde_scalar};
use crate::{Error, Result, Vector};

/// Shape `S` of the clipping region `C·S`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(rename_all = "lowercase")
)]
pub enum ClipRegion {
    /// Unit Euclidean ball.
    #[default]
    Ball,
    /// Unit sup-norm box `[-1, 1]^n`.
    Box,
}

impl ClipRegion {
    /// Euclidean radius of `S` in dimension `n`.
    pub fn radius(self, n: usize) -> f64 {
        match self {
            ClipRegion::Ball => 1.0,
            ClipRegion::Box => libm::sqrt(n as f64),
        }
    }
}

/// Euclidean projection of `g` onto `C·S`.
///
/// The ball projection divides by `‖g‖/C` and then nudges the divisor up
/// until the result lies in the ball, so clipping a clipped vector is the
/// identity exactly.
pub fn clip(g: &[f64], c: f64, region: ClipRegion) -> Result<Vector> {
    if !(c > 0.0) {
        return Err(Error::param("C", "clip radius must be positive"));
    }
    if g.iter().any(|v| v.is_nan()) {
        return Err(Error::NonFinite {
            context: "clip input",
        });
    }
    match region {
        ClipRegion::Box => Ok(g.iter().map(|&v| v.clamp(-c, c)).collect()),
        ClipRegion::Ball => {
            let norm = norm2(g);
            if norm <= c {
                return Ok(g.into());
            }
            // Infinite entries dominate: the projection points along them.
            let dir: Vector = if g.iter().any(|v| v.is_infinite()) {
                g.iter()
                    .map(|&v| if v.is_infinite() { v.signum() } else { 0.0 })
                    .collect()
            } else {
                g.into()
            };
            let norm = norm2(&dir);
            let norm = if norm.is_finite() {
                norm
            } else {
                rescaled_norm(&dir)
            };
            let mut d = norm / c;
            loop {
                let y: Vector = dir.iter().map(|&v| v / d).collect();
                if y.is_finite() && norm2(&y) <= c {
                    return Ok(y);
                }
                d = d.next_up();
            }
        }
    }
}

// ‖g‖ for vectors whose squared norm overflows.
fn rescaled_norm(g: &[f64]) -> f64 {
    let big = g.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    big * libm::sqrt(g.iter().map(|v| (v / big) * (v / big)).sum())
}

/// Iterate, momentum and (for ADAM-C) the first-moment estimate of `|ĝ|`.
pub type ClippedState = crate::OptimizerState;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SgdcConfig {
    pub tau1: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(rename_all = "snake_case")
)]
pub enum ClippedVariant {
    #[default]
    FirstMoment,
    AdabeliefC,
    AmsgradC,
    YogiC,
}

impl ClippedVariant {
    pub fn uses_tau2(self) -> bool {
        self != ClippedVariant::AmsgradC
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AdamcConfig {
    pub tau1: f64,
    pub tau2: f64,
    pub alpha: f64,
    pub epsilon: f64,
    pub variant: ClippedVariant,
    /// Use the clipped `ĝ` in the Nesterov term instead of the raw `g`.
    #[cfg_attr(feature = "serde", serde(default))]
    pub clip_nesterov: bool,
}

impl Default for AdamcConfig {
    fn default() -> Self {
        AdamcConfig {
            tau1: 1.0,
            tau2: 2.0,
            alpha: 0.0,
            epsilon: 1e-8,
            variant: ClippedVariant::FirstMoment,
            clip_nesterov: false,
        }
    }
}

fn check_inputs(state: &ClippedState, g: &[f64]) -> Result<()> {
    let n = state.dim();
    same_len(n, g.len())?;
    same_len(n, state.m.len())?;
    same_len(n, state.v.len())?;
    if g.iter().any(|v| v.is_nan()) {
        return Err(Error::NonFinite {
            context: "subgradient",
        });
    }
    Ok(())
}

/// `ĝ = clip(g)`, `m' = (1 − τ₁η)m + τ₁ηĝ`, `x' = x − η(m' + αĝ)`.
pub fn sgdc_step(
    state: &ClippedState,
    g: &[f64],
    eta: f64,
    c: f64,
    cfg: &SgdcConfig,
    region: ClipRegion,
) -> Result<ClippedState> {
    check_inputs(state, g)?;
    let w = check_weight("tau1", cfg.tau1, eta)?;
    let gh = clip(g, c, region)?;
    let m = momentum_update(&state.m, &gh, w);
    let x: Vector = (0..state.dim())
        .map(|i| state.x[i] - eta * (m[i] + cfg.alpha * gh[i]))
        .collect();
    Ok(ClippedState {
        x: x.finite("iterate update")?,
        m,
        v: state.v.clone(),
        k: state.k + 1,
    })
}

/// ADAM-C: momentum on `ĝ`, a `v` estimate driven by `|ĝ|`, preconditioner
/// `(ρ_v|v'| + ε)^(−1)` and Nesterov term `α·g` on the raw selection unless
/// `clip_nesterov` is set.
pub fn adamc_step(
    state: &ClippedState,
    g: &[f64],
    eta: f64,
    c: f64,
    cfg: &AdamcConfig,
    scaling: &mut Scaling,
    region: ClipRegion,
) -> Result<ClippedState> {
    check_inputs(state, g)?;
    if !(cfg.epsilon > 0.0) {
        return Err(Error::param("epsilon", "must be positive"));
    }
    if state.v.iter().any(|&e| !(e >= 0.0)) {
        return Err(Error::InvalidState(
            "second-moment estimate must be nonnegative",
        ));
    }
    let w1 = check_weight("tau1", cfg.tau1, eta)?;
    let w2 = if cfg.variant.uses_tau2() {
        check_weight("tau2", cfg.tau2, eta)?
    } else {
        0.0
    };
    let gh = clip(g, c, region)?;
    let m = momentum_update(&state.m, &gh, w1);
    let v: Vector = (0..state.dim())
        .map(|i| {
            let a = gh[i].abs();
            let vi = state.v[i];
            match cfg.variant {
                ClippedVariant::FirstMoment => convex_combination(vi, a, w2),
                ClippedVariant::AdabeliefC => convex_combination(vi, (gh[i] - m[i]).abs(), w2),
                ClippedVariant::AmsgradC => vi.max(a),
                ClippedVariant::YogiC => vi - w2 * sign_tilde_scalar(vi - a) * a,
            }
        })
        .collect();
    let rho_m = scaling.m.rho(eta, cfg.tau1)?;
    let rho_v = scaling.v.rho(eta, cfg.tau2)?;
    let nesterov: &[f64] = if cfg.clip_nesterov { &gh } else { g };
    let x: Vector = (0..state.dim())
        .map(|i| {
            state.x[i]
                - eta * (rho_m * m[i] + cfg.alpha * nesterov[i])
                    / (rho_v * v[i].abs() + cfg.epsilon)
        })
        .collect();
    Ok(ClippedState {
        x: x.finite("iterate update")?,
        m,
        v: v.finite("v update")?,
        k: state.k + 1,
    })
}
