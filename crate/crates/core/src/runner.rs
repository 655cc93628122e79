//! Seeded single runs of AFM, SGD-C or ADAM-C on a problem.
//!
//! A run with seed `s` draws from three independent ChaCha8 streams keyed by
//! `s`: stream 0 picks components, stream 1 generates noise and stream 2 the
//! random initial point. Two runs with the same spec are bitwise identical.

use alloc::string::String;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analysis::{LyapunovParams, RunMeta, RunStatus, Snapshot, Trajectory};
use crate::clip::{adamc_step, sgdc_step, AdamcConfig, ClipRegion, SgdcConfig};
use crate::noise::{sample_noise, NoiseModel};
use crate::optim::{self, AfmConfig, Scaling, ScalingMode};
use crate::problems::{self, KinkPolicy, Problem};
use crate::schedule::{ClipSchedule, StepSchedule};
use crate::{Error, OptimizerState, Result, Vector, DIVERGENCE_BOUND};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(tag = "method", rename_all = "kebab-case")
)]
pub enum Method {
    Afm {
        #[cfg_attr(feature = "serde", serde(flatten))]
        cfg: AfmConfig,
        scaling: ScalingMode,
    },
    SgdC {
        #[cfg_attr(feature = "serde", serde(flatten))]
        cfg: SgdcConfig,
        region: ClipRegion,
        clip: ClipSchedule,
    },
    AdamC {
        #[cfg_attr(feature = "serde", serde(flatten))]
        cfg: AdamcConfig,
        region: ClipRegion,
        clip: ClipSchedule,
        scaling: ScalingMode,
    },
}

impl Method {
    pub fn lyapunov_params(&self) -> LyapunovParams {
        match self {
            Method::Afm { cfg, .. } => LyapunovParams::from(cfg),
            Method::SgdC { cfg, .. } => LyapunovParams {
                tau1: cfg.tau1,
                gamma: 0.0,
                epsilon: 1.0,
            },
            Method::AdamC { cfg, .. } => LyapunovParams {
                tau1: cfg.tau1,
                gamma: 1.0,
                epsilon: cfg.epsilon,
            },
        }
    }

    fn scaling(&self) -> Scaling {
        match *self {
            Method::Afm { cfg, scaling } => Scaling::new(scaling, cfg.variant),
            Method::AdamC { cfg, scaling, .. } => {
                let mut s = Scaling::new(scaling, optim::Variant::Adam);
                if !cfg.variant.uses_tau2() {
                    s.v = optim::ScalingRule::new(ScalingMode::None);
                }
                s
            }
            Method::SgdC { .. } => Scaling::none(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(rename_all = "snake_case")
)]
pub enum Sampling {
    /// One uniformly drawn component per step.
    #[default]
    Component,
    /// The mean selection over all components.
    Full,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum Init {
    /// The problem's random initial point, drawn from stream 2.
    #[default]
    Random,
    Point(Vector),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub method: Method,
    pub schedule: StepSchedule,
    pub noise: NoiseModel,
    pub sampling: Sampling,
    pub iterations: u64,
    /// Snapshot every `stride` iterations; `0` records only the first and
    /// last state.
    pub stride: u64,
    pub policy: KinkPolicy,
    pub init: Init,
    pub seed: u64,
    /// Final stationarity at or below this marks the run converged.
    pub converge_tol: f64,
    pub config_hash: String,
}

impl RunSpec {
    pub fn new(method: Method, schedule: StepSchedule, iterations: u64) -> Self {
        RunSpec {
            method,
            schedule,
            noise: NoiseModel::None,
            sampling: Sampling::Component,
            iterations,
            stride: 100,
            policy: KinkPolicy::default(),
            init: Init::Random,
            seed: 0,
            converge_tol: 1e-2,
            config_hash: String::new(),
        }
    }
}

/// What an observer sees after every iteration.
pub struct StepEvent<'a> {
    pub k: u64,
    pub eta: f64,
    pub prev: &'a OptimizerState,
    /// The stochastic selection fed to the method, noise included.
    pub g: &'a [f64],
    pub next: &'a OptimizerState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub trajectory: Trajectory,
    pub status: RunStatus,
    pub final_state: OptimizerState,
    /// `max_k ‖x_k‖_∞` over every iterate, not just snapshots.
    pub max_x_inf: f64,
}

pub const SAMPLING_STREAM: u64 = 0;
pub const NOISE_STREAM: u64 = 1;
pub const INIT_STREAM: u64 = 2;

pub fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

pub fn run(problem: &dyn Problem, spec: &RunSpec) -> Result<RunOutcome> {
    run_observed(problem, spec, &mut |_| {})
}

/// Like [`run`], calling `observer` after every successful iteration.
pub fn run_observed(
    problem: &dyn Problem,
    spec: &RunSpec,
    observer: &mut dyn FnMut(&StepEvent<'_>),
) -> Result<RunOutcome> {
    spec.schedule.validate()?;
    spec.noise.validate()?;
    spec.policy.validate()?;
    if let Method::Afm { cfg, .. } = &spec.method {
        optim::validate_config(cfg)?;
    }
    let n = problem.dim();
    let x0 = match &spec.init {
        Init::Random => problem.initial_point(&mut stream(spec.seed, INIT_STREAM)),
        Init::Point(x) => x.clone(),
    };
    if x0.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: x0.len(),
        });
    }
    let mut state = OptimizerState::new(x0);
    let mut sampler = stream(spec.seed, SAMPLING_STREAM);
    let mut noise_rng = stream(spec.seed, NOISE_STREAM);
    let mut scaling = spec.method.scaling();
    let lyap = spec.method.lyapunov_params();
    let meta = RunMeta {
        config_hash: spec.config_hash.clone(),
        seed: spec.seed,
    };
    let mut traj = Trajectory::new(spec.stride, meta);
    let observe = |s: &OptimizerState| Snapshot::observe(problem, s, &lyap, &spec.policy, None);
    traj.push(observe(&state)?)?;
    let mut max_x_inf = state.x.norm_inf();
    let mut status = RunStatus::MaxIter;

    for k in 0..spec.iterations {
        let eta = spec.schedule.eta(k);
        let mut g = match spec.sampling {
            Sampling::Component => {
                let i = sampler.random_range(0..problem.num_components());
                problems::subgrad(problem, i, &state.x, &spec.policy)?
            }
            Sampling::Full => problems::full_subgrad(problem, &state.x, &spec.policy)?,
        };
        if !spec.noise.is_none() {
            let xi = sample_noise(&spec.noise, &mut noise_rng, n)?;
            for (a, b) in g.iter_mut().zip(xi.iter()) {
                *a += b;
            }
        }
        let next = match &spec.method {
            Method::Afm { cfg, .. } => optim::step(&state, &g, eta, cfg, &mut scaling),
            Method::SgdC { cfg, region, clip } => sgdc_step(
                &state,
                &g,
                eta,
                clip.radius(&spec.schedule, k),
                cfg,
                *region,
            ),
            Method::AdamC {
                cfg, region, clip, ..
            } => adamc_step(
                &state,
                &g,
                eta,
                clip.radius(&spec.schedule, k),
                cfg,
                &mut scaling,
                *region,
            ),
        };
        let next = match next {
            Ok(s) => s,
            Err(Error::NonFinite { .. }) => {
                status = RunStatus::Diverged;
                break;
            }
            Err(e) => return Err(e),
        };
        observer(&StepEvent {
            k,
            eta,
            prev: &state,
            g: &g,
            next: &next,
        });
        state = next;
        let x_inf = state.x.norm_inf();
        max_x_inf = max_x_inf.max(x_inf);
        if x_inf > DIVERGENCE_BOUND {
            status = RunStatus::Diverged;
            break;
        }
        let last = k + 1 == spec.iterations;
        if last || (spec.stride > 0 && state.k.is_multiple_of(spec.stride)) {
            traj.push(observe(&state)?)?;
        }
    }

    if status == RunStatus::Diverged {
        // Record where the run stopped when the state is still finite.
        if state.x.is_finite() && traj.last().map(|s| s.k) != Some(state.k) {
            if let Ok(snap) = observe(&state) {
                traj.push(snap)?;
            }
        }
    } else if let Some(last) = traj.last() {
        if last.stationarity().is_some_and(|d| d <= spec.converge_tol) {
            status = RunStatus::Converged;
        }
    }
    Ok(RunOutcome {
        trajectory: traj,
        status,
        final_state: state,
        max_x_inf,
    })
}
