//! The Adam-family engine.
//!
//! One iteration, given a stochastic conservative selection `g` and stepsize
//! `η`:
//!
//! ```text
//! m' = (1 − τ₁η) m + τ₁η g
//! v' = variant-specific update from (v, g, m')
//! x' = x − η (ρ_v |v'| + ε)^(−γ) ⊙ (ρ_m m' + α g)
//! ```
//!
//! With `γ = 1/2` this is the usual Adam-style preconditioner; note that `ε`
//! sits inside the power, not added to `√v`.

use alloc::vec::Vec;

use crate::vector::{convex_combination, same_len, sign_tilde_scalar};
use crate::{Error, OptimizerState, Result, SignSelection, Vector};

/// The estimator rule for `v`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(rename_all = "lowercase")
)]
pub enum Variant {
    Adam,
    AdaBelief,
    AmsGrad,
    NAdam,
    Yogi,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::Adam,
        Variant::AdaBelief,
        Variant::AmsGrad,
        Variant::NAdam,
        Variant::Yogi,
    ];

    /// Lower bound constant of `sign~(v) ⊙ U(x, m, v) ≥ κ|v|` for the
    /// variant's `U`.
    pub fn kappa(self) -> f64 {
        match self {
            Variant::AmsGrad => 1.0,
            _ => 0.0,
        }
    }

    pub fn default_alpha(self) -> f64 {
        match self {
            Variant::NAdam => 0.1,
            _ => 0.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Adam => "adam",
            Variant::AdaBelief => "adabelief",
            Variant::AmsGrad => "amsgrad",
            Variant::NAdam => "nadam",
            Variant::Yogi => "yogi",
        }
    }

    pub fn from_name(name: &str) -> Option<Variant> {
        Variant::ALL.into_iter().find(|v| v.name() == name)
    }

    /// Whether `τ₂` enters the `v` update (it does not for AMSGrad).
    pub fn uses_tau2(self) -> bool {
        self != Variant::AmsGrad
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AfmConfig {
    /// Nesterov weight on the raw selection.
    pub alpha: f64,
    /// Power of the preconditioner `(|v| + ε)^(−γ)`.
    pub gamma: f64,
    pub epsilon: f64,
    pub tau1: f64,
    pub tau2: f64,
    pub kappa: f64,
    pub variant: Variant,
}

impl AfmConfig {
    /// Defaults for `variant`: `γ = 1/2`, `ε = 1e-8`, `τ₁ = 1`, `τ₂ = 2`, `α`
    /// and `κ` from the variant.
    pub fn new(variant: Variant) -> Self {
        AfmConfig {
            alpha: variant.default_alpha(),
            gamma: 0.5,
            epsilon: 1e-8,
            tau1: 1.0,
            tau2: 2.0,
            kappa: variant.kappa(),
            variant,
        }
    }

    pub fn with_taus(mut self, tau1: f64, tau2: f64) -> Self {
        self.tau1 = tau1;
        self.tau2 = tau2;
        self
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConfigWarning {
    /// `(1 − κ)γτ₂ ≤ 2τ₁` fails; convergence is no longer guaranteed.
    StabilityCondition { lhs: f64, rhs: f64 },
    /// `κ` exceeds what the variant's `U` satisfies.
    KappaTooLarge { kappa: f64, variant_kappa: f64 },
}

impl core::fmt::Display for ConfigWarning {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            ConfigWarning::StabilityCondition { lhs, rhs } => write!(
                f,
                "stability condition (1-kappa)*gamma*tau2 <= 2*tau1 violated ({lhs} > {rhs}); \
                 convergence is not guaranteed"
            ),
            ConfigWarning::KappaTooLarge {
                kappa,
                variant_kappa,
            } => {
                write!(
                    f,
                    "kappa = {kappa} exceeds the variant's bound {variant_kappa}"
                )
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigDiagnostics {
    pub warnings: Vec<ConfigWarning>,
}

impl ConfigDiagnostics {
    pub fn is_clean(&self) -> bool {
        self.warnings.is_empty()
    }
}

/// Hard errors for invalid parameters, warnings where only the convergence
/// guarantee is lost.
pub fn validate_config(cfg: &AfmConfig) -> Result<ConfigDiagnostics> {
    for (name, value) in [
        ("tau1", cfg.tau1),
        ("tau2", cfg.tau2),
        ("epsilon", cfg.epsilon),
    ] {
        if !(value > 0.0) || !value.is_finite() {
            return Err(Error::param(name, "must be positive and finite"));
        }
    }
    for (name, value) in [
        ("alpha", cfg.alpha),
        ("gamma", cfg.gamma),
        ("kappa", cfg.kappa),
    ] {
        if !(value >= 0.0) || !value.is_finite() {
            return Err(Error::param(name, "must be nonnegative and finite"));
        }
    }
    let mut diag = ConfigDiagnostics::default();
    let variant_kappa = cfg.variant.kappa();
    if cfg.kappa > variant_kappa {
        diag.warnings.push(ConfigWarning::KappaTooLarge {
            kappa: cfg.kappa,
            variant_kappa,
        });
    }
    let lhs = (1.0 - cfg.kappa.min(variant_kappa)) * cfg.gamma * cfg.tau2;
    let rhs = 2.0 * cfg.tau1;
    if lhs > rhs {
        diag.warnings
            .push(ConfigWarning::StabilityCondition { lhs, rhs });
    }
    Ok(diag)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(rename_all = "snake_case")
)]
pub enum ScalingMode {
    /// `ρ = 1`.
    None,
    /// `ρ_k = 1 / (1 − Π_{j<k} (1 − τη_j))`, Adam's bias correction for
    /// varying stepsizes.
    #[default]
    BiasCorrection,
}

/// Produces one scaling factor `ρ` per iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingRule {
    mode: ScalingMode,
    product: f64,
}

impl ScalingRule {
    pub fn new(mode: ScalingMode) -> Self {
        ScalingRule { mode, product: 1.0 }
    }

    pub fn mode(&self) -> ScalingMode {
        self.mode
    }

    /// Advances the running product with `τη` and returns the new `ρ`.
    pub fn rho(&mut self, eta: f64, tau: f64) -> Result<f64> {
        match self.mode {
            ScalingMode::None => Ok(1.0),
            ScalingMode::BiasCorrection => {
                let w = tau * eta;
                if !(w > 0.0 && w <= 1.0) {
                    return Err(Error::StepTooLarge {
                        which: "tau",
                        product: w,
                    });
                }
                self.product *= 1.0 - w;
                if self.product == 0.0 {
                    Ok(1.0)
                } else {
                    Ok(1.0 / (1.0 - self.product))
                }
            }
        }
    }
}

/// The pair of scaling rules for `m` and `v`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scaling {
    pub m: ScalingRule,
    pub v: ScalingRule,
}

impl Scaling {
    /// AMSGrad's `v` is a running max, so its scaling is fixed at one.
    pub fn new(mode: ScalingMode, variant: Variant) -> Self {
        let v_mode = if variant.uses_tau2() {
            mode
        } else {
            ScalingMode::None
        };
        Scaling {
            m: ScalingRule::new(mode),
            v: ScalingRule::new(v_mode),
        }
    }

    pub fn none() -> Self {
        Scaling {
            m: ScalingRule::new(ScalingMode::None),
            v: ScalingRule::new(ScalingMode::None),
        }
    }
}

pub(crate) fn check_weight(which: &'static str, tau: f64, eta: f64) -> Result<f64> {
    let w = tau * eta;
    if !(w > 0.0) || !w.is_finite() {
        return Err(Error::param("eta", "stepsize must be positive and finite"));
    }
    if w > 1.0 {
        return Err(Error::StepTooLarge { which, product: w });
    }
    Ok(w)
}

/// `(1 − w) m + w g`, kept inside each coordinate's segment.
pub(crate) fn momentum_update(m: &[f64], g: &[f64], w: f64) -> Vector {
    m.iter()
        .zip(g)
        .map(|(&a, &b)| convex_combination(a, b, w))
        .collect()
}

/// The variant's rule for `v_{k+1}`.
pub fn v_update(
    variant: Variant,
    v: &[f64],
    g: &[f64],
    m_next: &[f64],
    eta: f64,
    tau2: f64,
) -> Result<Vector> {
    same_len(v.len(), g.len())?;
    same_len(v.len(), m_next.len())?;
    if v.iter().any(|&e| !(e >= 0.0)) {
        return Err(Error::InvalidState(
            "second-moment estimate must be nonnegative",
        ));
    }
    let w = if variant.uses_tau2() {
        check_weight("tau2", tau2, eta)?
    } else {
        0.0
    };
    let out: Vector = match variant {
        Variant::Adam | Variant::NAdam => v
            .iter()
            .zip(g)
            .map(|(&a, &b)| convex_combination(a, b * b, w))
            .collect(),
        Variant::AdaBelief => v
            .iter()
            .zip(g)
            .zip(m_next)
            .map(|((&a, &b), &mn)| {
                let r = b - mn;
                convex_combination(a, r * r, w)
            })
            .collect(),
        Variant::AmsGrad => v.iter().zip(g).map(|(&a, &b)| a.max(b * b)).collect(),
        Variant::Yogi => v
            .iter()
            .zip(g)
            .map(|(&a, &b)| {
                let g2 = b * b;
                a - w * sign_tilde_scalar(a - g2) * g2
            })
            .collect(),
    };
    out.finite("v update")
}

/// One iteration of the engine; see the module docs for the formulas.
pub fn step(
    state: &OptimizerState,
    g: &[f64],
    eta: f64,
    cfg: &AfmConfig,
    scaling: &mut Scaling,
) -> Result<OptimizerState> {
    let n = state.dim();
    same_len(n, g.len())?;
    same_len(n, state.m.len())?;
    same_len(n, state.v.len())?;
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            context: "subgradient",
        });
    }
    let w1 = check_weight("tau1", cfg.tau1, eta)?;
    let m = momentum_update(&state.m, g, w1);
    let v = v_update(cfg.variant, &state.v, g, &m, eta, cfg.tau2)?;
    let rho_m = scaling.m.rho(eta, cfg.tau1)?;
    let rho_v = scaling.v.rho(eta, cfg.tau2)?;
    let x: Vector = (0..n)
        .map(|i| {
            let pre = libm::pow(rho_v * v[i].abs() + cfg.epsilon, -cfg.gamma);
            state.x[i] - eta * pre * (rho_m * m[i] + cfg.alpha * g[i])
        })
        .collect();
    Ok(OptimizerState {
        x: x.finite("iterate update")?,
        m,
        v,
        k: state.k + 1,
    })
}

/// A single-valued selection of the set-valued `U(x, m, v)` paired with each
/// variant, built from the component selections `d_i ∈ D_{f_i}(x)`.
///
/// `sign` resolves `sign(v)` at `v_j = 0`; `at_zero = 1` matches the
/// discrete updates started from `v = 0`.
pub fn u_selection(
    variant: Variant,
    v: &[f64],
    m: &[f64],
    components: &[Vector],
    sign: SignSelection,
) -> Result<Vector> {
    same_len(v.len(), m.len())?;
    if components.is_empty() {
        return Err(Error::param(
            "components",
            "need at least one component selection",
        ));
    }
    for d in components {
        same_len(v.len(), d.len())?;
    }
    let inv = 1.0 / components.len() as f64;
    let out = (0..v.len())
        .map(|j| {
            let vj = v[j].abs();
            let mean = components
                .iter()
                .map(|d| {
                    let s = d[j] * d[j];
                    match variant {
                        Variant::Adam | Variant::NAdam => s,
                        Variant::AdaBelief => (d[j] - m[j]) * (d[j] - m[j]),
                        // max(|v|, S) − |v|; |v| is added back below so
                        // rounding in the mean cannot drop below |v|.
                        Variant::AmsGrad => (s - vj).max(0.0),
                        Variant::Yogi => vj - sign_tilde_scalar(vj - s) * s,
                    }
                })
                .sum::<f64>()
                * inv;
            let mean = if variant == Variant::AmsGrad {
                vj + mean
            } else {
                mean
            };
            sign.scalar(v[j]) * mean
        })
        .collect::<Vector>();
    out.finite("U selection")
}
