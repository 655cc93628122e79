//! Lyapunov function, explicit-Euler simulation of the limiting differential
//! inclusion, trajectories and their summaries.

use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::optim::{self, AfmConfig, Scaling, ScalingMode, Variant};
use crate::problems::{self, KinkPolicy, Problem, Spurious, Stationarity};
use crate::vector::same_len;
use crate::{Error, OptimizerState, Result, SignSelection, DIVERGENCE_BOUND};

/// Parameters of `φ(x, m, v) = f(x) + ⟨m, (|v| + ε)^(−γ) ⊙ m⟩ / (2τ₁)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LyapunovParams {
    pub tau1: f64,
    pub gamma: f64,
    pub epsilon: f64,
}

impl From<&AfmConfig> for LyapunovParams {
    fn from(cfg: &AfmConfig) -> Self {
        LyapunovParams {
            tau1: cfg.tau1,
            gamma: cfg.gamma,
            epsilon: cfg.epsilon,
        }
    }
}

pub fn lyapunov(
    problem: &dyn Problem,
    x: &[f64],
    m: &[f64],
    v: &[f64],
    params: &LyapunovParams,
) -> Result<f64> {
    if !(params.epsilon > 0.0) {
        return Err(Error::param("epsilon", "must be positive"));
    }
    if !(params.tau1 > 0.0) {
        return Err(Error::param("tau1", "must be positive"));
    }
    same_len(x.len(), m.len())?;
    same_len(x.len(), v.len())?;
    let f = problems::objective(problem, x)?;
    let quad: f64 = m
        .iter()
        .zip(v)
        .map(|(&mi, &vi)| mi * mi * libm::pow(vi.abs() + params.epsilon, -params.gamma))
        .sum();
    let phi = f + quad / (2.0 * params.tau1);
    if phi.is_finite() {
        Ok(phi)
    } else {
        Err(Error::NonFinite {
            context: "lyapunov",
        })
    }
}

/// One recorded point of a run.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(deny_unknown_fields)
)]
pub struct Snapshot {
    pub k: u64,
    /// Continuous time, for differential-inclusion runs.
    pub t: Option<f64>,
    pub f: f64,
    pub phi: f64,
    /// `dist(0, D_f(x))` where a closed form exists.
    pub gap: Option<f64>,
    /// `‖mean selection‖_∞` for problems without a closed-form gap.
    pub surrogate_gap: Option<f64>,
    /// Distance from `x` to the stationary set, where known.
    pub stationary_dist: Option<f64>,
    pub m_inf: f64,
    pub v_inf: f64,
    pub x_inf: f64,
}

impl Snapshot {
    pub fn observe(
        problem: &dyn Problem,
        state: &OptimizerState,
        lyap: &LyapunovParams,
        policy: &KinkPolicy,
        t: Option<f64>,
    ) -> Result<Self> {
        let (gap, surrogate_gap) = match problems::stationarity(problem, &state.x, policy)? {
            Stationarity::Exact(g) => (Some(g), None),
            Stationarity::Surrogate(g) => (None, Some(g)),
        };
        let stationary_dist = match problem.stationary_distance(&state.x) {
            Ok(d) => Some(d),
            Err(Error::Unsupported { .. }) => None,
            Err(e) => return Err(e),
        };
        Ok(Snapshot {
            k: state.k,
            t,
            f: problems::objective(problem, &state.x)?,
            phi: lyapunov(problem, &state.x, &state.m, &state.v, lyap)?,
            gap,
            surrogate_gap,
            stationary_dist,
            m_inf: state.m.norm_inf(),
            v_inf: state.v.norm_inf(),
            x_inf: state.x.norm_inf(),
        })
    }

    /// Exact gap if present, else the surrogate.
    pub fn gap_value(&self) -> Option<f64> {
        self.gap.or(self.surrogate_gap)
    }

    /// The quantity used for stopping and convergence: the distance to the
    /// stationary set when known, else the gap.
    pub fn stationarity(&self) -> Option<f64> {
        self.stationary_dist.or_else(|| self.gap_value())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RunMeta {
    pub config_hash: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    snapshots: Vec<Snapshot>,
    pub stride: u64,
    pub meta: RunMeta,
}

impl Trajectory {
    pub fn new(stride: u64, meta: RunMeta) -> Self {
        Trajectory {
            snapshots: Vec::new(),
            stride,
            meta,
        }
    }

    /// Appends a snapshot; `k` must exceed the previous one.
    pub fn push(&mut self, snap: Snapshot) -> Result<()> {
        if let Some(last) = self.snapshots.last() {
            if snap.k <= last.k {
                return Err(Error::InvalidState(
                    "snapshots must be strictly increasing in k",
                ));
            }
        }
        self.snapshots.push(snap);
        Ok(())
    }

    pub fn snapshots(&self) -> &[Snapshot] {
        &self.snapshots
    }

    pub fn last(&self) -> Option<&Snapshot> {
        self.snapshots.last()
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(rename_all = "snake_case")
)]
pub enum RunStatus {
    Converged,
    MaxIter,
    /// `‖x‖_∞` exceeded [`DIVERGENCE_BOUND`] or a non-finite value appeared.
    Diverged,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GapSummary {
    pub final_gap: f64,
    pub min_gap: f64,
    pub k_at_min: u64,
    pub final_stationary_dist: Option<f64>,
    pub min_stationary_dist: Option<f64>,
    /// Mean of the last 10% of recorded `f` values.
    pub f_limit_estimate: f64,
    /// Sample standard deviation of the same values.
    pub f_spread: f64,
}

pub fn gap_series(traj: &Trajectory) -> Result<GapSummary> {
    let snaps = traj.snapshots();
    if snaps.len() < 2 {
        return Err(Error::param("trajectory", "need at least two snapshots"));
    }
    let gaps: Vec<(u64, f64)> = snaps
        .iter()
        .filter_map(|s| s.gap_value().map(|g| (s.k, g)))
        .collect();
    if gaps.len() != snaps.len() {
        return Err(Error::Unsupported {
            what: "gap on every snapshot",
        });
    }
    let (k_at_min, min_gap) =
        gaps.iter().copied().fold(
            (0, f64::INFINITY),
            |acc, (k, g)| if g < acc.1 { (k, g) } else { acc },
        );
    let dists: Option<Vec<f64>> = snaps.iter().map(|s| s.stationary_dist).collect();
    let tail_len = (snaps.len() / 10).max(1);
    let tail = &snaps[snaps.len() - tail_len..];
    let mean = tail.iter().map(|s| s.f).sum::<f64>() / tail_len as f64;
    let spread = if tail_len > 1 {
        libm::sqrt(
            tail.iter()
                .map(|s| (s.f - mean) * (s.f - mean))
                .sum::<f64>()
                / (tail_len - 1) as f64,
        )
    } else {
        0.0
    };
    Ok(GapSummary {
        final_gap: gaps[gaps.len() - 1].1,
        min_gap,
        k_at_min,
        final_stationary_dist: dists.as_ref().and_then(|d| d.last().copied()),
        min_stationary_dist: dists.map(|d| d.into_iter().fold(f64::INFINITY, f64::min)),
        f_limit_estimate: mean,
        f_spread: spread,
    })
}

/// Explicit-Euler discretization of `d/dt (x, m, v) ∈ −G(x, m, v)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DiSimConfig {
    pub dt: f64,
    pub horizon: f64,
    pub policy: KinkPolicy,
    pub afm: AfmConfig,
    /// Selection of `sign(v)` inside `U`; `at_zero = 1` reproduces the
    /// discrete updates started from `v = 0`.
    pub sign: SignSelection,
    /// Time between recorded snapshots.
    pub snapshot_every: f64,
    /// Stop once the distance to the stationary set drops below this.
    pub stop_tol: f64,
}

impl DiSimConfig {
    pub fn new(afm: AfmConfig, dt: f64, horizon: f64) -> Self {
        DiSimConfig {
            dt,
            horizon,
            policy: KinkPolicy::default(),
            afm,
            sign: SignSelection::new(1.0).expect("1 is a valid selection"),
            snapshot_every: 0.1,
            stop_tol: 1e-6,
        }
    }

    fn validate(&self) -> Result<u64> {
        if !(self.dt > 0.0) || !(self.horizon > 0.0) {
            return Err(Error::param("dt", "dt and horizon must be positive"));
        }
        if self.dt * self.afm.tau1 > 1.0 || self.dt * self.afm.tau2 > 1.0 {
            return Err(Error::StepTooLarge {
                which: "tau",
                product: self.dt * self.afm.tau1.max(self.afm.tau2),
            });
        }
        if !(self.stop_tol >= 0.0) {
            return Err(Error::param("stop_tol", "must be nonnegative"));
        }
        self.policy.validate()?;
        optim::validate_config(&self.afm)?;
        let per = libm::round(self.snapshot_every / self.dt);
        if !(per >= 1.0)
            || libm::fabs(per * self.dt - self.snapshot_every) > 1e-9 * self.snapshot_every
        {
            return Err(Error::param(
                "snapshot_every",
                "must be a positive multiple of dt",
            ));
        }
        Ok(per as u64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiOutcome {
    pub trajectory: Trajectory,
    pub status: RunStatus,
    pub final_state: OptimizerState,
}

/// Integrates the flow from `init`. Snapshots are taken every
/// `snapshot_every` time units and at termination; `k` counts Euler steps.
pub fn simulate_di(
    problem: &dyn Problem,
    init: &OptimizerState,
    sim: &DiSimConfig,
) -> Result<DiOutcome> {
    let per = sim.validate()?;
    let n = problem.dim();
    same_len(n, init.x.len())?;
    let cfg = &sim.afm;
    let lyap = LyapunovParams::from(cfg);
    let mut state = OptimizerState::with_moments(init.x.clone(), init.m.clone(), init.v.clone())?;
    let mut traj = Trajectory::new(per, RunMeta::default());
    let total = libm::ceil(sim.horizon / sim.dt - 1e-9) as u64;
    let snap = |s: &OptimizerState, step: u64| {
        Snapshot::observe(problem, s, &lyap, &sim.policy, Some(step as f64 * sim.dt))
    };
    traj.push(snap(&state, 0)?)?;
    let mut status = RunStatus::MaxIter;
    let mut step = 0u64;
    let stationary = |s: &Snapshot| s.stationarity().unwrap_or(f64::INFINITY);
    if stationary(&traj.snapshots()[0]) < sim.stop_tol {
        status = RunStatus::Converged;
    }
    while status == RunStatus::MaxIter && step < total {
        let comps = problems::component_subgrads(problem, &state.x, &sim.policy)?;
        let d = problems::mean_of(&comps, n);
        let u = optim::u_selection(cfg.variant, &state.v, &state.m, &comps, sim.sign)?;
        let mut next = state.clone();
        for i in 0..n {
            let pre = libm::pow(state.v[i].abs() + cfg.epsilon, -cfg.gamma);
            next.x[i] -= sim.dt * pre * (state.m[i] + cfg.alpha * d[i]);
            next.m[i] -= sim.dt * cfg.tau1 * (state.m[i] - d[i]);
            next.v[i] -= sim.dt * cfg.tau2 * (state.v[i] - u[i]);
        }
        step += 1;
        next.k = step;
        if !(next.x.is_finite() && next.m.is_finite() && next.v.is_finite())
            || next.x.norm_inf() > DIVERGENCE_BOUND
        {
            status = RunStatus::Diverged;
            break;
        }
        state = next;
        let at_snapshot = step.is_multiple_of(per);
        let stop_now = problem
            .stationary_distance(&state.x)
            .map(|d| d < sim.stop_tol)
            .unwrap_or(false);
        if stop_now {
            status = RunStatus::Converged;
        }
        if at_snapshot || stop_now || step == total {
            traj.push(snap(&state, step)?)?;
        }
    }
    Ok(DiOutcome {
        trajectory: traj,
        status,
        final_state: state,
    })
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SpuriousConfig {
    pub runs: u64,
    pub c_range: (f64, f64),
    /// Base stepsizes `ν_k = nu0 / (k+1)^p`, scaled by the random `c`.
    pub nu0: f64,
    pub p: f64,
    pub iterations: u64,
    pub relu_at_zero: f64,
    pub variant: Variant,
    pub seed: u64,
}

impl Default for SpuriousConfig {
    fn default() -> Self {
        SpuriousConfig {
            runs: 100,
            c_range: (0.5, 1.5),
            nu0: 0.1,
            p: 0.6,
            iterations: 10_000,
            relu_at_zero: 0.0,
            variant: Variant::Adam,
            seed: 0x5EED,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SpuriousReport {
    pub runs: u64,
    /// Runs whose iterates were ever exactly zero.
    pub hit_zero: u64,
    /// Runs ending within `1e-6` of the spurious point.
    pub converged_to_spurious: u64,
    /// Whether the run started at `x = 0` stayed there.
    pub adversarial_fixed: bool,
    pub final_x: Vec<f64>,
}

impl SpuriousReport {
    pub fn hit_zero_fraction(&self) -> f64 {
        self.hit_zero as f64 / self.runs.max(1) as f64
    }

    pub fn spurious_fraction(&self) -> f64 {
        self.converged_to_spurious as f64 / self.runs.max(1) as f64
    }
}

fn spurious_run(x0: f64, c: f64, cfg: &SpuriousConfig, policy: &KinkPolicy) -> Result<(bool, f64)> {
    let problem = Spurious;
    let afm = AfmConfig::new(cfg.variant);
    let mut scaling = Scaling::new(ScalingMode::BiasCorrection, cfg.variant);
    let mut state = OptimizerState::new([x0].into());
    let mut hit = x0 == 0.0;
    for k in 0..cfg.iterations {
        let eta = c * cfg.nu0 / libm::pow(k as f64 + 1.0, cfg.p);
        let g = problems::subgrad(&problem, 0, &state.x, policy)?;
        state = optim::step(&state, &g, eta, &afm, &mut scaling)?;
        hit |= state.x[0] == 0.0;
    }
    Ok((hit, state.x[0]))
}

/// Runs AFM iterations on `relu(x) − relu(−x)` from random
/// `x₀ ∈ [−1, 1] \ {0}` with randomly scaled stepsizes `c·ν_k`, plus one
/// adversarial run from `x₀ = 0`.
pub fn spurious_avoidance_experiment(cfg: &SpuriousConfig) -> Result<SpuriousReport> {
    let (lo, hi) = cfg.c_range;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::param("c_range", "need 0 < c_min < c_max"));
    }
    if !(cfg.nu0 > 0.0 && cfg.p > 0.0) {
        return Err(Error::param("nu0", "nu0 and p must be positive"));
    }
    let policy = KinkPolicy::with_relu_at_zero(cfg.relu_at_zero)?;
    let mut report = SpuriousReport {
        runs: cfg.runs,
        hit_zero: 0,
        converged_to_spurious: 0,
        adversarial_fixed: false,
        final_x: Vec::new(),
    };
    for r in 0..cfg.runs {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(r);
        let mut x0 = 0.0;
        while x0 == 0.0 {
            x0 = rng.random_range(-1.0..1.0);
        }
        let c = rng.random_range(lo..hi);
        let (hit, xf) = spurious_run(x0, c, cfg, &policy)?;
        report.hit_zero += hit as u64;
        report.converged_to_spurious += (libm::fabs(xf) <= 1e-6) as u64;
        report.final_x.push(xf);
    }
    let (_, xf) = spurious_run(0.0, 1.0, cfg, &policy)?;
    report.adversarial_fixed = xf == 0.0;
    Ok(report)
}
