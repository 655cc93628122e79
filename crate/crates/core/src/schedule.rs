//! Stepsize, two-timescale and clipping-radius schedules, plus a numerical
//! check of their asymptotic requirements.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)
)]
pub enum StepSchedule {
    /// `η_k = η₀ / (k+1)^p`
    Power {
        eta0: f64,
        p: f64,
    },
    /// `η_k = η₀ / √(epoch+1)` with `epoch = ⌊k / steps_per_epoch⌋`.
    SqrtEpoch {
        eta0: f64,
        steps_per_epoch: u64,
    },
    Constant {
        eta0: f64,
    },
}

impl StepSchedule {
    pub fn power(eta0: f64, p: f64) -> Result<Self> {
        let s = StepSchedule::Power { eta0, p };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta0() > 0.0) || !self.eta0().is_finite() {
            return Err(Error::param("eta0", "must be positive and finite"));
        }
        match *self {
            StepSchedule::Power { p, .. } if !(p > 0.0) || !p.is_finite() => {
                Err(Error::param("p", "must be positive"))
            }
            StepSchedule::SqrtEpoch {
                steps_per_epoch: 0, ..
            } => Err(Error::param("steps_per_epoch", "must be at least 1")),
            _ => Ok(()),
        }
    }

    pub fn eta0(&self) -> f64 {
        match *self {
            StepSchedule::Power { eta0, .. }
            | StepSchedule::SqrtEpoch { eta0, .. }
            | StepSchedule::Constant { eta0 } => eta0,
        }
    }

    pub fn with_eta0(self, eta0: f64) -> Self {
        match self {
            StepSchedule::Power { p, .. } => StepSchedule::Power { eta0, p },
            StepSchedule::SqrtEpoch {
                steps_per_epoch, ..
            } => StepSchedule::SqrtEpoch {
                eta0,
                steps_per_epoch,
            },
            StepSchedule::Constant { .. } => StepSchedule::Constant { eta0 },
        }
    }

    pub fn eta(&self, k: u64) -> f64 {
        match *self {
            StepSchedule::Power { eta0, p } => eta0 / libm::pow(k as f64 + 1.0, p),
            StepSchedule::SqrtEpoch {
                eta0,
                steps_per_epoch,
            } => {
                let epoch = k / steps_per_epoch.max(1);
                eta0 / libm::sqrt(epoch as f64 + 1.0)
            }
            StepSchedule::Constant { eta0 } => eta0,
        }
    }
}

/// `η_k·log(k+2)`, the quantity every schedule requirement is phrased in.
pub fn eta_log(schedule: &StepSchedule, k: u64) -> f64 {
    schedule.eta(k) * libm::log(k as f64 + 2.0)
}

/// Noise stepsizes `θ_k = η_k (η_k log(k+2))^(−s)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TwoTimescale {
    pub s: f64,
}

impl TwoTimescale {
    pub fn new(s: f64) -> Result<Self> {
        if !(s > 0.0 && s < 0.5) {
            return Err(Error::param("s", "must lie in (0, 1/2)"));
        }
        Ok(TwoTimescale { s })
    }

    pub fn theta(&self, schedule: &StepSchedule, k: u64) -> f64 {
        schedule.eta(k) * libm::pow(eta_log(schedule, k), -self.s)
    }
}

/// Clipping radii `C_k = C₀ (η_k log(k+2))^(−1/3)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ClipSchedule {
    pub c0: f64,
}

impl ClipSchedule {
    pub fn new(c0: f64) -> Result<Self> {
        if !(c0 > 0.0) {
            return Err(Error::param("c0", "must be positive"));
        }
        Ok(ClipSchedule { c0 })
    }

    pub fn radius(&self, schedule: &StepSchedule, k: u64) -> f64 {
        self.c0 * libm::cbrt(1.0 / eta_log(schedule, k))
    }
}

pub const CHECKPOINTS: [u64; 4] = [1_000, 10_000, 100_000, 1_000_000];

/// Minimum ratio between the first and last checkpoint for a sequence to
/// count as vanishing.
pub const MIN_DECREASE: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleCheck {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScheduleReport {
    pub checks: Vec<ScheduleCheck>,
}

impl ScheduleReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ScheduleCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn failure_names(&self) -> Vec<&'static str> {
        self.failures().map(|c| c.name).collect()
    }
}

impl core::fmt::Display for ScheduleReport {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "{} {}: {}",
                if c.passed { "ok  " } else { "FAIL" },
                c.name,
                c.detail
            )?;
        }
        Ok(())
    }
}

fn vanishing(name: &'static str, seq: impl Fn(u64) -> f64) -> ScheduleCheck {
    let values: Vec<f64> = CHECKPOINTS.iter().map(|&k| seq(k)).collect();
    let monotone = values.windows(2).all(|w| w[1] < w[0]);
    let ratio = values[0] / values[values.len() - 1];
    let passed =
        values.iter().all(|v| v.is_finite() && *v >= 0.0) && monotone && ratio >= MIN_DECREASE;
    ScheduleCheck {
        name,
        passed,
        detail: format!("values at k=1e3..1e6: {values:?}, decrease {ratio:.3}x (need strict decrease and >= {MIN_DECREASE}x)"),
    }
}

/// Partial sums up to the last checkpoint must beat the harmonic witness
/// `0.99·η₀·ln(K+1)`, which every non-summable family here exceeds.
fn divergent_sum(schedule: &StepSchedule) -> ScheduleCheck {
    let last = CHECKPOINTS[CHECKPOINTS.len() - 1];
    let sum: f64 = (0..last).map(|k| schedule.eta(k)).sum();
    let witness = 0.99 * schedule.eta0() * libm::log(last as f64 + 1.0);
    ScheduleCheck {
        name: "eta_sum_diverges",
        passed: sum >= witness,
        detail: format!("sum of eta_k for k < {last} is {sum:.6}, witness {witness:.6}"),
    }
}

/// Checks `η_k log k → 0`, `Σ η_k = ∞`, and when given `θ_k² log k / η_k → 0`
/// and `C_k² η_k log k → 0`.
pub fn validate_schedules(
    schedule: &StepSchedule,
    tt: Option<&TwoTimescale>,
    cs: Option<&ClipSchedule>,
) -> Result<ScheduleReport> {
    schedule.validate()?;
    let mut checks = alloc::vec![
        vanishing("eta_log_k_vanishes", |k| eta_log(schedule, k)),
        divergent_sum(schedule)
    ];
    if let Some(tt) = tt {
        TwoTimescale::new(tt.s)?;
        checks.push(vanishing("theta_sq_over_eta_log_k_vanishes", |k| {
            let th = tt.theta(schedule, k);
            th * th / schedule.eta(k) * libm::log(k as f64 + 2.0)
        }));
    }
    if let Some(cs) = cs {
        ClipSchedule::new(cs.c0)?;
        checks.push(vanishing("clip_sq_eta_log_k_vanishes", |k| {
            let c = cs.radius(schedule, k);
            c * c * eta_log(schedule, k)
        }));
    }
    Ok(ScheduleReport { checks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn eta_examples() {
        let s = StepSchedule::power(1.0, 0.5).unwrap();
        assert_eq!(s.eta(3), 0.5);
        let e = StepSchedule::SqrtEpoch {
            eta0: 2.0,
            steps_per_epoch: 10,
        };
        assert_eq!(e.eta(9), 2.0);
        assert_eq!(e.eta(30), 1.0);
        assert_eq!(StepSchedule::Constant { eta0: 0.3 }.eta(1000), 0.3);
    }

    #[test]
    fn theta_example() {
        // η_k = 0.01 with log(k+2) = 1 is reached by a constant schedule at
        // k = e − 2, so evaluate the formula at that point directly.
        let tt = TwoTimescale::new(0.25).unwrap();
        let theta = 0.01 * libm::pow(0.01 * 1.0, -tt.s);
        assert!((theta - 0.0316227766016838).abs() < 1e-15);
        let s = StepSchedule::Constant { eta0: 0.01 };
        let k0 = tt.theta(&s, 0);
        assert!((k0 - 0.01 * libm::pow(0.01 * libm::log(2.0), -0.25)).abs() < 1e-16);
    }

    #[test]
    fn clip_radius_example() {
        // η log(k+2) = 1e-3 at k = 0 with η₀ = 1e-3 / ln 2.
        let s = StepSchedule::Constant {
            eta0: 1e-3 / libm::log(2.0),
        };
        let c = ClipSchedule::new(1.0).unwrap().radius(&s, 0);
        assert!((c - 10.0).abs() < 1e-12);
    }

    #[test]
    fn validation_examples() {
        let r = validate_schedules(&StepSchedule::power(1.0, 0.5).unwrap(), None, None).unwrap();
        assert!(r.passed(), "{r}");
        let r = validate_schedules(&StepSchedule::Constant { eta0: 0.1 }, None, None).unwrap();
        assert_eq!(r.failure_names(), ["eta_log_k_vanishes"]);
        let r = validate_schedules(&StepSchedule::power(1.0, 2.0).unwrap(), None, None).unwrap();
        assert_eq!(r.failure_names(), ["eta_sum_diverges"]);
    }

    #[test]
    fn two_timescale_and_clip_checks() {
        let tt = TwoTimescale::new(0.25).unwrap();
        let cs = ClipSchedule::new(1.0).unwrap();
        for p in [0.6, 1.0] {
            let r =
                validate_schedules(&StepSchedule::power(0.05, p).unwrap(), Some(&tt), Some(&cs))
                    .unwrap();
            assert!(r.passed(), "p={p}\n{r}");
            assert_eq!(r.checks.len(), 4);
        }
        let epoch = StepSchedule::SqrtEpoch {
            eta0: 0.1,
            steps_per_epoch: 100,
        };
        assert!(validate_schedules(&epoch, Some(&tt), Some(&cs))
            .unwrap()
            .passed());
    }

    #[test]
    fn invalid_parameters() {
        assert!(StepSchedule::power(0.0, 0.5).is_err());
        assert!(StepSchedule::power(1.0, 0.0).is_err());
        assert!(TwoTimescale::new(0.5).is_err());
        assert!(ClipSchedule::new(-1.0).is_err());
        assert!(validate_schedules(
            &StepSchedule::SqrtEpoch {
                eta0: 1.0,
                steps_per_epoch: 0
            },
            None,
            None
        )
        .is_err());
    }

    proptest! {
        // The k+2 offset makes θ/η = (η log(k+2))^(−s) nondecreasing only once
        // log(k+2) ≥ 1/p.
        #[test]
        fn theta_over_eta_nondecreasing(p in 0.05..=1.0f64, s in 0.01..0.49f64, eta0 in 1e-3..10.0f64) {
            let sched = StepSchedule::power(eta0, p).unwrap();
            let tt = TwoTimescale::new(s).unwrap();
            let start = (libm::exp(1.0 / p) - 2.0).max(0.0).ceil() as u64;
            let mut prev = 0.0;
            for k in start..start + 2000 {
                let r = tt.theta(&sched, k) / sched.eta(k);
                prop_assert!(r >= prev * (1.0 - 1e-14), "k={}", k);
                prev = r;
            }
        }

        #[test]
        fn schedules_are_pure(k in 0u64..1_000_000, p in 0.1..=1.0f64) {
            let s = StepSchedule::power(0.5, p).unwrap();
            prop_assert_eq!(s.eta(k).to_bits(), s.eta(k).to_bits());
            let cs = ClipSchedule::new(2.0).unwrap();
            prop_assert!(cs.radius(&s, k) > 0.0);
        }
    }
}
