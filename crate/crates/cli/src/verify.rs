//! Invariant checks for every module and the acceptance criteria A1–A9.
//!
//! Each check returns a [`Check`]; nothing here panics on a failed
//! property, so a report always lists every result.

use std::fmt;
use std::time::Instant;

use afm_core::analysis::{
    gap_series, lyapunov, simulate_di, spurious_avoidance_experiment, DiSimConfig, LyapunovParams,
    RunStatus, SpuriousConfig, Trajectory,
};
use afm_core::clip::{adamc_step, sgdc_step, AdamcConfig, ClipRegion, ClippedVariant, SgdcConfig};
use afm_core::noise::{sample_noise, AlphaStable, NoiseModel};
use afm_core::optim::{
    step, u_selection, validate_config, AfmConfig, Scaling, ScalingMode, Variant,
};
use afm_core::problems::{
    self, build, finite_diff, KinkPolicy, L1Center, MaxAffine, NoisyLinear, Problem, Quadratic,
    CATALOG,
};
use afm_core::runner::{self, run, run_observed, Method, RunSpec, NOISE_STREAM};
use afm_core::schedule::{validate_schedules, ClipSchedule, StepSchedule, TwoTimescale};
use afm_core::{hadamard, shifted_power, sign_tilde, OptimizerState, SignSelection, Vector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;
use rayon::prelude::*;
use serde::Serialize;

use crate::commands::{self, phi_violations, Execution};
use crate::config::ExperimentConfig;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub id: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(id: &str, passed: bool, detail: impl Into<String>) -> Self {
        Check {
            id: id.to_string(),
            passed,
            detail: detail.into(),
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mark = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{mark} {}: {}", self.id, self.detail)
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Report {
    pub checks: Vec<Check>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{c}")?;
        }
        let failed = self.failures().len();
        write!(
            f,
            "{} checks, {} passed, {failed} failed",
            self.checks.len(),
            self.checks.len() - failed
        )
    }
}

/// The clip map under test; swapped out to show a broken clip is caught.
pub type ClipFn = fn(&[f64], f64, ClipRegion) -> afm_core::Result<Vector>;

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, b| a.max(b.abs()))
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn diff_norm(a: &[f64], b: &[f64]) -> f64 {
    norm2(&a.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<_>>())
}

/// Entries spread over many magnitudes, with exact zeros mixed in.
fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| {
            if rng.random_bool(0.1) {
                0.0
            } else {
                rng.random_range(-1.0..1.0) * 10f64.powi(rng.random_range(-4..5))
            }
        })
        .collect()
}

fn timed(id: &str, limit_s: f64, f: impl FnOnce() -> (bool, String)) -> Check {
    let start = Instant::now();
    let (ok, detail) = f();
    let secs = start.elapsed().as_secs_f64();
    let in_time = secs < limit_s;
    let mut detail = format!("{detail}; {secs:.1}s");
    if !in_time {
        detail.push_str(&format!(" exceeds {limit_s}s"));
    }
    Check::new(id, ok && in_time, detail)
}

// ---------------------------------------------------------------- core

pub fn core_checks() -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC0DE);
    let mut sign_bad = 0;
    let mut power_bad = 0;
    let mut hadamard_bad = 0;
    for _ in 0..10_000 {
        let x = random_vec(&mut rng, 6);
        let sel = SignSelection::new(rng.random_range(-1.0..=1.0)).expect("in range");
        let st = sign_tilde(&x);
        let lhs = hadamard(&st, &sel.apply(&x)).expect("same length");
        let rhs = hadamard(&st, &st).expect("same length");
        sign_bad += usize::from(lhs != rhs);
        let ones = shifted_power(&x.iter().map(|v| v.abs()).collect::<Vec<_>>(), 1.0, 0.0)
            .expect("finite");
        power_bad += usize::from(ones.iter().any(|&o| o != 1.0));
        let y = random_vec(&mut rng, 6);
        let xy = hadamard(&x, &y).expect("same length");
        let yx = hadamard(&y, &x).expect("same length");
        let left = hadamard(&xy, &x).expect("same length");
        let right = hadamard(&x, &yx).expect("same length");
        hadamard_bad += usize::from(xy != yx || left != right);
    }
    vec![
        Check::new(
            "core/sign_identity",
            sign_bad == 0,
            format!("{sign_bad} of 10000 vectors violate sign_tilde*sel == sign_tilde^2"),
        ),
        Check::new(
            "core/shifted_power_zero_exponent",
            power_bad == 0,
            format!("{power_bad} of 10000 vectors not all ones"),
        ),
        Check::new(
            "core/hadamard_commutative_associative",
            hadamard_bad == 0,
            format!("{hadamard_bad} of 10000 triples differ"),
        ),
    ]
}

// ---------------------------------------------------------------- problems

/// Worst `‖subgrad − fd‖/(1+‖fd‖)` over `points` random points with kink
/// margin above `1e-3`.
pub fn gradient_error(p: &dyn Problem, points: usize, seed: u64) -> (f64, usize) {
    let policy = KinkPolicy::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    let mut tries = 0;
    while checked < points && tries < 1000 * points {
        tries += 1;
        let x = p.initial_point(&mut rng).map(|v| 2.0 * v);
        let i = rng.random_range(0..p.num_components());
        if p.kink_margin(i, &x) <= 1e-3 {
            continue;
        }
        let err = match (
            problems::subgrad(p, i, &x, &policy),
            finite_diff(p, i, &x, 1e-6),
        ) {
            (Ok(g), Ok(fd)) => diff_norm(&g, &fd) / (1.0 + fd.norm2()),
            _ => f64::INFINITY,
        };
        worst = worst.max(err);
        checked += 1;
    }
    (worst, checked)
}

pub fn problem_checks() -> Vec<Check> {
    let mut out = Vec::new();
    let mut details = Vec::new();
    let mut ok = true;
    for id in CATALOG {
        let p = build(id).expect("catalog id");
        let (worst, n) = gradient_error(p.as_ref(), 200, 0x6AD);
        ok &= n == 200 && worst <= 1e-5;
        details.push(format!("{id} {worst:.1e} over {n}"));
    }
    out.push(Check::new(
        "problems/gradient_consistency",
        ok,
        details.join(", "),
    ));

    let policy = KinkPolicy::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0xC0);
    let mut bad = 0;
    for id in ["l1_center", "max_affine"] {
        let p = build(id).expect("catalog id");
        for _ in 0..1000 {
            let x = p.initial_point(&mut rng).map(|v| 3.0 * v);
            let y = p.initial_point(&mut rng).map(|v| 3.0 * v);
            let fx = problems::objective(p.as_ref(), &x).unwrap_or(f64::NAN);
            let fy = problems::objective(p.as_ref(), &y).unwrap_or(f64::NAN);
            let g = problems::full_subgrad(p.as_ref(), &x, &policy).unwrap_or_default();
            let lin = fx
                + g.iter()
                    .zip(y.iter().zip(x.iter()))
                    .map(|(a, (b, c))| a * (b - c))
                    .sum::<f64>();
            bad += usize::from(!(fy >= lin - 1e-12 * (1.0 + lin.abs())));
        }
    }
    out.push(Check::new(
        "problems/convexity",
        bad == 0,
        format!("{bad} of 2000 pairs violate the subgradient inequality"),
    ));

    out.push(gap_zero_check());
    out
}

fn gap_zero_check() -> Check {
    let mut bad = Vec::new();
    // l1_center: the median box, a point, sampled at its corner and at the
    // kink coordinates themselves.
    let l1 = L1Center::synthetic(10, 5, 0x11C3);
    let corner: Vec<f64> = l1.median_box().iter().map(|b| b.0).collect();
    if problems::gap(&l1, &corner).ok() != Some(0.0) {
        bad.push("l1_center median");
    }
    let even = L1Center::new(vec![
        Vector::from([0.0, 1.0]),
        Vector::from([1.0, 1.0]),
        Vector::from([2.0, -1.0]),
        Vector::from([3.0, 0.5]),
    ])
    .expect("valid centers");
    for s in 0..=8 {
        for t in 0..=4 {
            let x = [1.0 + 0.125 * s as f64, 0.5 + 0.125 * t as f64];
            if problems::gap(&even, &x).ok() != Some(0.0) {
                bad.push("l1_center box");
            }
        }
    }
    let ma = MaxAffine::default_2d();
    if problems::gap(&ma, &[0.3, -0.2]).ok() != Some(0.0) {
        bad.push("max_affine center");
    }
    if problems::gap(&problems::spurious_problem(), &[0.0]).ok() != Some(0.0) {
        bad.push("spurious origin");
    }
    let q = Quadratic::new(Vector::from([1.0, -2.0]));
    if problems::gap(&q, &[1.0, -2.0]).ok() != Some(0.0) {
        bad.push("quadratic center");
    }
    Check::new(
        "problems/gap_zero_on_stationary_set",
        bad.is_empty(),
        if bad.is_empty() {
            "l1_center, max_affine, spurious, quadratic".to_string()
        } else {
            format!("nonzero gap at {}", bad.join(", "))
        },
    )
}

// ---------------------------------------------------------------- optim

/// Per-step counts of violated moment bounds along one run.
#[derive(Debug, Default, Clone, Copy)]
pub struct BoundTracker {
    g_max: f64,
    sq_max: f64,
    pub steps: u64,
    pub m_violations: u64,
    pub v_violations: u64,
    pub monotone_violations: u64,
    pub negative_v: u64,
}

impl BoundTracker {
    pub fn new(state: &OptimizerState) -> Self {
        BoundTracker {
            g_max: sup(&state.m),
            sq_max: sup(&state.v),
            ..Self::default()
        }
    }

    pub fn observe(
        &mut self,
        variant: Variant,
        tau2: f64,
        eta: f64,
        prev: &OptimizerState,
        g: &[f64],
        next: &OptimizerState,
    ) {
        self.steps += 1;
        self.g_max = self.g_max.max(sup(g));
        self.m_violations += u64::from(sup(&next.m) > self.g_max);
        self.negative_v += u64::from(next.v.iter().any(|&v| !(v >= 0.0)));
        let sq = |r: &mut dyn Iterator<Item = f64>| r.fold(0.0, |a: f64, b| a.max(b * b));
        let ok = match variant {
            Variant::Adam | Variant::NAdam => {
                self.sq_max = self.sq_max.max(sq(&mut g.iter().copied()));
                sup(&next.v) <= self.sq_max
            }
            Variant::AdaBelief => {
                let r = sq(&mut g.iter().zip(next.m.iter()).map(|(a, b)| a - b));
                self.sq_max = self.sq_max.max(r);
                sup(&next.v) <= self.sq_max
            }
            Variant::AmsGrad => {
                self.sq_max = self.sq_max.max(sq(&mut g.iter().copied()));
                self.monotone_violations +=
                    u64::from(next.v.iter().zip(prev.v.iter()).any(|(a, b)| a < b));
                sup(&next.v) <= self.sq_max
            }
            Variant::Yogi => {
                let g2 = sq(&mut g.iter().copied());
                let w = tau2 * eta;
                sup(&next.v) <= sup(&prev.v).max(g2 + w * g2)
            }
        };
        self.v_violations += u64::from(!ok);
    }

    pub fn clean(&self) -> bool {
        self.m_violations == 0
            && self.v_violations == 0
            && self.monotone_violations == 0
            && self.negative_v == 0
    }
}

pub fn optim_checks() -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0971);
    let mut bounds_bad = 0;
    let mut det_bad = 0;
    let mut steps = 0;
    for run in 0..1000 {
        let variant = Variant::ALL[run % Variant::ALL.len()];
        let tau1 = rng.random_range(0.1..10.0);
        let tau2 = rng.random_range(0.1..40.0);
        let cfg = AfmConfig::new(variant).with_taus(tau1, tau2);
        let cap = 1.0 / tau1.max(if variant.uses_tau2() { tau2 } else { 0.0 });
        let mode = if run % 2 == 0 {
            ScalingMode::BiasCorrection
        } else {
            ScalingMode::None
        };
        let mut scaling = Scaling::new(mode, variant);
        let v0: Vec<f64> = random_vec(&mut rng, 4).iter().map(|v| v.abs()).collect();
        let mut state = OptimizerState::with_moments(
            Vector::zeros(4),
            random_vec(&mut rng, 4).into(),
            v0.into(),
        )
        .expect("v0 nonnegative");
        let mut tracker = BoundTracker::new(&state);
        for _ in 0..50 {
            let g = random_vec(&mut rng, 4);
            let eta = rng.random_range(0.0..1.0) * cap;
            let mut twin = scaling;
            let Ok(next) = step(&state, &g, eta, &cfg, &mut scaling) else {
                break;
            };
            let again = step(&state, &g, eta, &cfg, &mut twin);
            det_bad += usize::from(again.as_ref() != Ok(&next) || twin != scaling);
            tracker.observe(variant, tau2, eta, &state, &g, &next);
            state = next;
            steps += 1;
        }
        bounds_bad += usize::from(!tracker.clean());
    }

    let mut u_bad = 0;
    for case in 0..20_000 {
        let variant = Variant::ALL[case % Variant::ALL.len()];
        let v: Vec<f64> = random_vec(&mut rng, 3).iter().map(|v| v.abs()).collect();
        let m = random_vec(&mut rng, 3);
        let comps: Vec<Vector> = (0..rng.random_range(1..5))
            .map(|_| random_vec(&mut rng, 3).into())
            .collect();
        let u =
            u_selection(variant, &v, &m, &comps, SignSelection::default()).expect("finite inputs");
        let st = sign_tilde(&v);
        let kappa = variant.kappa();
        u_bad += usize::from((0..3).any(|j| !(st[j] * u[j] >= kappa * v[j].abs())));
    }

    vec![
        Check::new(
            "optim/moment_bounds",
            bounds_bad == 0,
            format!("{bounds_bad} of 1000 random runs ({steps} steps) break a bound"),
        ),
        Check::new(
            "optim/determinism",
            det_bad == 0,
            format!("{det_bad} of {steps} repeated steps differ"),
        ),
        Check::new(
            "optim/u_map_condition",
            u_bad == 0,
            format!("{u_bad} of 20000 samples violate sign(v)*U >= kappa|v|"),
        ),
    ]
}

// ---------------------------------------------------------------- clip

/// Idempotence, nonexpansiveness (slack `1e-12`) and containment in `C·S`
/// `pairs` random pairs per region.
pub fn clip_checks(clip: ClipFn, pairs: usize) -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC11B);
    let mut idem = 0;
    let mut expand = 0;
    let mut bound = 0;
    let mut errors = 0;
    for region in [ClipRegion::Ball, ClipRegion::Box] {
        for _ in 0..pairs {
            let n = rng.random_range(1..6);
            let c = 10f64.powf(rng.random_range(-2.0..2.0));
            let a = random_vec(&mut rng, n);
            let b = random_vec(&mut rng, n);
            let (Ok(ca), Ok(cb)) = (clip(&a, c, region), clip(&b, c, region)) else {
                errors += 1;
                continue;
            };
            idem += usize::from(clip(&ca, c, region).ok().as_ref() != Some(&ca));
            expand += usize::from(diff_norm(&ca, &cb) > diff_norm(&a, &b) + 1e-12);
            let size = match region {
                ClipRegion::Ball => ca.norm2(),
                ClipRegion::Box => ca.norm_inf(),
            };
            bound += usize::from(size > c);
        }
    }
    let total = 2 * pairs;
    let example = clip(&[3.0, 4.0], 1.0, ClipRegion::Ball)
        .map(|y| (y[0] - 0.6).abs() <= 1e-15 && (y[1] - 0.8).abs() <= 1e-15)
        .unwrap_or(false);
    vec![
        Check::new(
            "clip/idempotent",
            idem == 0 && errors == 0,
            format!("{idem} of {total} inputs change on a second clip, {errors} errors"),
        ),
        Check::new(
            "clip/nonexpansive",
            expand == 0 && errors == 0,
            format!("{expand} of {total} pairs expand"),
        ),
        Check::new(
            "clip/bound",
            bound == 0 && errors == 0 && example,
            format!(
                "{bound} of {total} outputs leave C*S; (3,4) -> (0.6,0.8) {}",
                if example { "exact" } else { "inexact" }
            ),
        ),
    ]
}

fn clipped_method_checks() -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5D);
    let mut disp_bad = 0;
    let mut steps = 0;
    for run in 0..500 {
        let region = if run % 2 == 0 {
            ClipRegion::Ball
        } else {
            ClipRegion::Box
        };
        let cfg = SgdcConfig {
            tau1: rng.random_range(0.1..10.0),
            alpha: rng.random_range(0.0..2.0),
        };
        let c = 10f64.powf(rng.random_range(-2.0..2.0));
        let limit = c * region.radius(3);
        let mut state = OptimizerState::new(Vector::zeros(3));
        let mut m_bound: f64 = 0.0;
        for _ in 0..50 {
            let g = random_vec(&mut rng, 3);
            let eta = rng.random_range(0.0..1.0) / cfg.tau1;
            let Ok(next) = sgdc_step(&state, &g, eta, c, &cfg, region) else {
                disp_bad += 1;
                break;
            };
            m_bound = m_bound.max(
                afm_core::clip::clip(&g, c, region)
                    .map(|v| v.norm2())
                    .unwrap_or(f64::INFINITY),
            );
            let dx = diff_norm(&next.x, &state.x);
            let allowed = eta * (next.m.norm2() + cfg.alpha * limit);
            disp_bad += usize::from(
                dx > allowed * (1.0 + 1e-12) + 1e-300
                    || next.m.norm2() > m_bound * (1.0 + 1e-12) + 1e-300,
            );
            state = next;
            steps += 1;
        }
    }

    let mut worst: f64 = 0.0;
    for _ in 0..2000 {
        let x = random_vec(&mut rng, 3);
        let m: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..3).map(|_| rng.random_range(0.0..2.0)).collect();
        let g: Vec<f64> = (0..3).map(|_| rng.random_range(-3.0..3.0)).collect();
        let (tau1, tau2, eta, eps) = (1.0, 2.0, rng.random_range(0.0..0.5), 1e-3);
        let state =
            OptimizerState::with_moments(x.clone().into(), m.clone().into(), v.clone().into())
                .expect("v nonnegative");
        let cfg = AdamcConfig {
            tau1,
            tau2,
            alpha: 0.0,
            epsilon: eps,
            variant: ClippedVariant::FirstMoment,
            clip_nesterov: false,
        };
        let out = adamc_step(
            &state,
            &g,
            eta,
            f64::INFINITY,
            &cfg,
            &mut Scaling::none(),
            ClipRegion::Ball,
        )
        .expect("bounded inputs");
        for i in 0..3 {
            let mi = (1.0 - tau1 * eta) * m[i] + tau1 * eta * g[i];
            let vi = (1.0 - tau2 * eta) * v[i] + tau2 * eta * g[i].abs();
            let xi = x[i] - eta * mi / (vi.abs() + eps);
            worst = worst.max((out.x[i] - xi).abs() / (1.0 + xi.abs()));
        }
    }
    vec![
        Check::new(
            "clip/sgdc_displacement_bound",
            disp_bad == 0,
            format!("{disp_bad} of {steps} steps exceed eta(|m|+alpha C radius)"),
        ),
        Check::new(
            "clip/adamc_unclipped_is_afm_gamma_one",
            worst <= 1e-13,
            format!("max relative deviation {worst:.1e} over 2000 steps"),
        ),
    ]
}

// ---------------------------------------------------------------- schedules

pub fn schedule_checks() -> Vec<Check> {
    let mut pure_bad = 0;
    let mut ratio_bad = 0;
    for p in [0.3, 0.6, 0.9, 1.0] {
        let sched = StepSchedule::power(0.5, p).expect("valid");
        let cs = ClipSchedule::new(2.0).expect("valid");
        for s in [0.1, 0.25, 0.4] {
            let tt = TwoTimescale::new(s).expect("valid");
            // η log(k+2) rises until log(k+2) = 1/p, so θ/η can only be
            // monotone from there on.
            let start = ((1.0 / p).exp() - 2.0).max(0.0).ceil() as u64;
            let mut prev = 0.0;
            for k in start..start + 5000 {
                let r = tt.theta(&sched, k) / sched.eta(k);
                ratio_bad += usize::from(r < prev * (1.0 - 1e-14));
                prev = r;
                pure_bad += usize::from(
                    sched.eta(k).to_bits() != sched.eta(k).to_bits()
                        || tt.theta(&sched, k).to_bits() != tt.theta(&sched, k).to_bits()
                        || cs.radius(&sched, k).to_bits() != cs.radius(&sched, k).to_bits(),
                );
            }
        }
    }
    let model = NoiseModel::Stable {
        alpha: 1.1,
        beta: 1.0,
        scale: 0.2,
    };
    let draw = |seed| {
        let mut rng = runner::stream(seed, NOISE_STREAM);
        (0..100)
            .map(|_| sample_noise(&model, &mut rng, 3).map(|v| v.into_inner()))
            .collect::<Result<Vec<_>, _>>()
    };
    let reproducible = draw(7).is_ok() && draw(7) == draw(7) && draw(7) != draw(8);
    vec![
        Check::new(
            "schedules/deterministic",
            pure_bad == 0,
            format!("{pure_bad} repeated evaluations differ"),
        ),
        Check::new(
            "schedules/theta_over_eta_nondecreasing",
            ratio_bad == 0,
            format!("{ratio_bad} decreases from k >= e^(1/p) - 2, p in {{0.3,0.6,0.9,1}}"),
        ),
        Check::new(
            "schedules/noise_reproducible",
            reproducible,
            "stable noise stream replayed from its seed",
        ),
    ]
}

// ---------------------------------------------------------------- analysis

fn di_sim(dt: f64, horizon: f64) -> DiSimConfig {
    let afm = AfmConfig::new(Variant::Adam)
        .with_taus(1.0, 1.0)
        .with_epsilon(1.0);
    DiSimConfig::new(afm, dt, horizon)
}

fn di_init(p: &dyn Problem, seed: u64) -> OptimizerState {
    OptimizerState::new(p.initial_point(&mut ChaCha8Rng::seed_from_u64(seed)))
}

/// Whether the recorded gap ever rises from one snapshot to the next.
fn gap_rises(traj: &Trajectory) -> usize {
    let snaps = traj.snapshots();
    (2..=snaps.len())
        .filter(|&len| {
            let mut prefix = Trajectory::new(traj.stride, traj.meta.clone());
            for s in &snaps[..len] {
                prefix.push(s.clone()).expect("increasing k");
            }
            let before = &snaps[len - 2];
            match gap_series(&prefix) {
                Ok(g) => before.gap_value().is_some_and(|b| g.final_gap > b),
                Err(_) => false,
            }
        })
        .count()
}

pub fn analysis_checks() -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x1A);
    let mut lyap_bad = 0;
    for id in ["l1_center", "max_affine", "noisy_linear", "relu_mlp"] {
        let p = build(id).expect("catalog id");
        for _ in 0..200 {
            let x = p.initial_point(&mut rng);
            let v: Vector = random_vec(&mut rng, p.dim())
                .iter()
                .map(|v| v.abs())
                .collect();
            let params = LyapunovParams {
                tau1: rng.random_range(0.1..5.0),
                gamma: rng.random_range(0.0..1.0),
                epsilon: rng.random_range(1e-8..1.0),
            };
            let phi = lyapunov(p.as_ref(), &x, &Vector::zeros(p.dim()), &v, &params);
            let f = problems::objective(p.as_ref(), &x);
            lyap_bad += usize::from(phi.is_err() || phi.ok() != f.ok());
        }
    }

    let mut worst_ratio: f64 = 0.0;
    let smooth: [Box<dyn Problem>; 2] = [
        Box::new(Quadratic::new(Vector::from([0.5, -1.0, 2.0]))),
        Box::new(NoisyLinear::synthetic(5, 40, 0.5, 3).expect("nonsingular")),
    ];
    let dt = 1e-2;
    for p in &smooth {
        let init = di_init(p.as_ref(), 4);
        let mut coarse = di_sim(dt, 5.0);
        let mut fine = di_sim(dt / 2.0, 5.0);
        coarse.stop_tol = 0.0;
        fine.stop_tol = 0.0;
        let dev = match (
            simulate_di(p.as_ref(), &init, &coarse),
            simulate_di(p.as_ref(), &init, &fine),
        ) {
            (Ok(a), Ok(b)) => a
                .final_state
                .x
                .sub(&b.final_state.x)
                .map(|d| d.norm_inf())
                .unwrap_or(f64::INFINITY),
            _ => f64::INFINITY,
        };
        worst_ratio = worst_ratio.max(dev / dt);
    }

    let mut rises = Vec::new();
    let mut total_rises = 0;
    for id in ["l1_center", "max_affine"] {
        let p = build(id).expect("catalog id");
        for seed in 0..3 {
            let n = simulate_di(p.as_ref(), &di_init(p.as_ref(), seed), &di_sim(1e-3, 60.0))
                .map(|o| gap_rises(&o.trajectory))
                .unwrap_or(usize::MAX);
            total_rises += n.min(1 << 20);
            rises.push(format!("{id}#{seed}:{n}"));
        }
    }

    vec![
        Check::new(
            "analysis/lyapunov_without_momentum_is_f",
            lyap_bad == 0,
            format!("{lyap_bad} of 800 points differ from f exactly"),
        ),
        Check::new(
            "analysis/di_first_order_consistency",
            worst_ratio <= 20.0,
            format!("max |x(dt) - x(dt/2)|_inf = {worst_ratio:.2} dt (limit 20 dt)"),
        ),
        Check::new(
            "analysis/final_gap_nonincreasing",
            total_rises == 0,
            format!(
                "gap_series final_gap rises under extension: {}",
                rises.join(" ")
            ),
        ),
    ]
}

// ---------------------------------------------------------------- cli

/// Keys of every trajectory line.
pub const SNAPSHOT_KEYS: [&str; 10] = [
    "k",
    "t",
    "f",
    "phi",
    "gap",
    "surrogate_gap",
    "stationary_dist",
    "m_inf",
    "v_inf",
    "x_inf",
];

pub fn small_config() -> ExperimentConfig {
    ExperimentConfig::from_json(
        r#"{
            "problem": {"id": "l1_center", "params": {"n": 3, "count": 3, "seed": 1}},
            "optimizer": {"method": "afm", "variant": "adam"},
            "schedule": {"family": "power", "eta0": 0.05, "p": 0.6},
            "noise": {"kind": "gaussian", "params": {"sigma": 0.1}},
            "iterations": 300,
            "stride": 50,
            "seeds": [1, 2, 3, 4]
        }"#,
    )
    .expect("built-in config parses")
}

pub fn cli_checks() -> Vec<Check> {
    let cfg = small_config();
    let problem = cfg.problem.build().expect("valid problem");
    let serial = commands::execute(&cfg, problem.as_ref(), Execution::Serial);
    let parallel = commands::execute(&cfg, problem.as_ref(), Execution::Parallel);
    let same = match (&serial, &parallel) {
        (Ok(a), Ok(b)) => {
            a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.0 == y.0 && x.1 == y.1)
        }
        _ => false,
    };
    let schema = serial
        .as_ref()
        .map(|runs| {
            runs.iter().all(|(_, out, _)| {
                crate::io::trajectory_jsonl(&out.trajectory)
                    .lines()
                    .all(|line| {
                        serde_json::from_str::<serde_json::Map<String, serde_json::Value>>(line)
                            .map(|m| {
                                let mut want = SNAPSHOT_KEYS;
                                want.sort_unstable();
                                m.keys().map(String::as_str).eq(want)
                            })
                            .unwrap_or(false)
                    })
            })
        })
        .unwrap_or(false);
    let loose = AfmConfig::new(Variant::Adam).with_taus(1.0, 5.0);
    let warned = validate_config(&loose)
        .map(|d| !d.is_clean())
        .unwrap_or(false);
    vec![
        Check::new(
            "cli/snapshot_schema",
            schema,
            format!("every JSONL line has keys {}", SNAPSHOT_KEYS.join(",")),
        ),
        Check::new(
            "cli/parallel_equals_serial",
            same,
            "4 seeds run serially and in parallel",
        ),
        Check::new(
            "cli/strict_mode_warning",
            warned,
            "Adam with tau2 = 5 tau1 raises a stability warning",
        ),
    ]
}

// ---------------------------------------------------------------- acceptance

fn mlp_bounds_run(variant: Variant, seed: u64) -> BoundTracker {
    let p = build("relu_mlp").expect("catalog id");
    let cfg = AfmConfig::new(variant);
    let mut spec = RunSpec::new(
        Method::Afm {
            cfg,
            scaling: ScalingMode::BiasCorrection,
        },
        StepSchedule::power(0.05, 0.6).expect("valid"),
        10_000,
    );
    spec.seed = seed;
    spec.stride = 0;
    let x0 = p.initial_point(&mut runner::stream(seed, runner::INIT_STREAM));
    let mut tracker = BoundTracker::new(&OptimizerState::new(x0));
    let res = run_observed(p.as_ref(), &spec, &mut |e| {
        tracker.observe(variant, cfg.tau2, e.eta, e.prev, e.g, e.next)
    });
    if res.is_err() {
        tracker.v_violations += 1;
    }
    tracker
}

pub fn a1() -> Check {
    timed("A1", 30.0, || {
        let jobs: Vec<(Variant, u64)> = Variant::ALL
            .iter()
            .flat_map(|&v| (0..20).map(move |s| (v, s)))
            .collect();
        let trackers: Vec<(Variant, BoundTracker)> = jobs
            .par_iter()
            .map(|&(v, s)| (v, mlp_bounds_run(v, s)))
            .collect();
        let mut parts = Vec::new();
        let mut ok = true;
        for v in Variant::ALL {
            let mine: Vec<&BoundTracker> = trackers
                .iter()
                .filter(|(w, _)| *w == v)
                .map(|(_, t)| t)
                .collect();
            let sum = |f: fn(&BoundTracker) -> u64| mine.iter().map(|t| f(t)).sum::<u64>();
            let (m, vv, mono, neg) = (
                sum(|t| t.m_violations),
                sum(|t| t.v_violations),
                sum(|t| t.monotone_violations),
                sum(|t| t.negative_v),
            );
            let steps = sum(|t| t.steps);
            ok &= m + vv + mono + neg == 0 && steps == 20 * 10_000;
            parts.push(format!("{} m:{m} v:{vv} mono:{mono} neg:{neg}", v.name()));
        }
        (
            ok,
            format!(
                "relu_mlp 20x1e4 steps per variant; violations {}",
                parts.join(", ")
            ),
        )
    })
}

/// Seeds shared by the multi-seed criteria.
pub const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

fn a2_variant(variant: Variant, tau2: f64) -> (usize, String) {
    let p = build("l1_center").expect("catalog id");
    let cfg = AfmConfig::new(variant).with_taus(1.0, tau2);
    let rows: Vec<(f64, f64)> = SEEDS
        .par_iter()
        .map(|&seed| {
            let mut spec = RunSpec::new(
                Method::Afm {
                    cfg,
                    scaling: ScalingMode::BiasCorrection,
                },
                StepSchedule::power(0.05, 0.6).expect("valid"),
                20_000,
            );
            spec.seed = seed;
            spec.stride = 10;
            match run(p.as_ref(), &spec).and_then(|o| gap_series(&o.trajectory)) {
                Ok(s) => (s.final_stationary_dist.unwrap_or(f64::INFINITY), s.f_spread),
                Err(_) => (f64::INFINITY, f64::INFINITY),
            }
        })
        .collect();
    let hits = rows
        .iter()
        .filter(|(d, s)| *d <= 1e-2 && *s <= 1e-3)
        .count();
    let detail = rows
        .iter()
        .map(|(d, s)| format!("{d:.3}/{s:.1e}"))
        .collect::<Vec<_>>()
        .join(" ");
    (
        hits,
        format!("{} tau2={tau2}: {hits}/5 [{detail}]", variant.name()),
    )
}

pub fn a2() -> Check {
    timed("A2", 60.0, || {
        let (adam, da) = a2_variant(Variant::Adam, 2.0);
        let (ams, db) = a2_variant(Variant::AmsGrad, 100.0);
        (
            adam >= 4 && ams >= 4,
            format!("final dist <= 1e-2 and f spread <= 1e-3; {da}; {db}"),
        )
    })
}

pub fn a3() -> Check {
    timed("A3", 60.0, || {
        let mut parts = Vec::new();
        let mut ok = true;
        for id in ["l1_center", "max_affine"] {
            let p = build(id).expect("catalog id");
            for seed in 0..3 {
                let init = di_init(p.as_ref(), seed);
                let start = problems::stationarity(p.as_ref(), &init.x, &KinkPolicy::default())
                    .map(|_| p.stationary_distance(&init.x).unwrap_or(0.0))
                    .unwrap_or(0.0);
                let n = match simulate_di(p.as_ref(), &init, &di_sim(1e-3, 60.0)) {
                    Ok(out) => phi_violations(out.trajectory.snapshots(), 1e-3),
                    Err(_) => usize::MAX,
                };
                ok &= n == 0 && start > 1e-3;
                parts.push(format!("{id}#{seed}:{n}"));
            }
        }
        (ok, format!("phi violations {}", parts.join(" ")))
    })
}

pub fn a4() -> Check {
    a4_with(afm_core::clip::clip)
}

pub fn a4_with(clip: ClipFn) -> Check {
    let checks = clip_checks(clip, 10_000);
    let ok = checks.iter().all(|c| c.passed);
    let detail = checks
        .iter()
        .map(|c| c.detail.clone())
        .collect::<Vec<_>>()
        .join("; ");
    Check::new("A4", ok, detail)
}

fn a5_run(p: &dyn Problem, method: Method, seed: u64) -> (f64, f64, RunStatus) {
    let mut spec = RunSpec::new(
        method,
        StepSchedule::power(0.05, 0.6).expect("valid"),
        20_000,
    );
    spec.noise = NoiseModel::Stable {
        alpha: 1.1,
        beta: 1.0,
        scale: 0.2,
    };
    spec.seed = seed;
    spec.stride = 0;
    match run(p, &spec) {
        Ok(out) => (
            problems::objective(p, &out.final_state.x).unwrap_or(f64::INFINITY),
            out.max_x_inf,
            out.status,
        ),
        Err(_) => (f64::INFINITY, f64::INFINITY, RunStatus::Diverged),
    }
}

pub fn a5() -> Check {
    timed("A5", 120.0, || {
        let p = NoisyLinear::synthetic(20, 200, 1.0, 0x11EA).expect("nonsingular");
        let opt = p.optimum_value();
        let clip = ClipSchedule::new(10.0).expect("valid");
        let sgd = SgdcConfig {
            tau1: 1.0,
            alpha: 0.0,
        };
        let methods = [
            Method::AdamC {
                cfg: AdamcConfig::default(),
                region: ClipRegion::Ball,
                clip,
                scaling: ScalingMode::BiasCorrection,
            },
            Method::SgdC {
                cfg: sgd,
                region: ClipRegion::Ball,
                clip,
            },
            Method::SgdC {
                cfg: sgd,
                region: ClipRegion::Ball,
                clip: ClipSchedule { c0: f64::INFINITY },
            },
        ];
        let results: Vec<Vec<(f64, f64, RunStatus)>> = methods
            .par_iter()
            .map(|m| SEEDS.iter().map(|&s| a5_run(&p, *m, s)).collect())
            .collect();
        let within = |r: &[(f64, f64, RunStatus)]| r.iter().filter(|x| x.0 <= 2.0 * opt).count();
        let adamc = within(&results[0]);
        let sgdc = within(&results[1]);
        let blowup = results[2]
            .iter()
            .zip(&results[1])
            .filter(|(u, c)| u.1 >= 10.0 * c.1)
            .count();
        let ratios = |r: &[(f64, f64, RunStatus)]| {
            r.iter()
                .map(|x| format!("{:.1}", x.0 / opt))
                .collect::<Vec<_>>()
                .join(" ")
        };
        let maxes = results[2]
            .iter()
            .zip(&results[1])
            .map(|(u, c)| format!("{:.1}", u.1 / c.1))
            .collect::<Vec<_>>()
            .join(" ");
        (
            adamc >= 4 && sgdc >= 4 && blowup >= 3,
            format!(
                "f/f* ADAM-C [{}] {adamc}/5, SGD-C [{}] {sgdc}/5 (need <= 2); \
                 max|x| SGD/SGD-C [{maxes}] {blowup}/5 (need >= 10)",
                ratios(&results[0]),
                ratios(&results[1])
            ),
        )
    })
}

pub fn a6() -> Check {
    timed("A6", 10.0, || {
        let p = build("relu_mlp").expect("catalog id");
        let (worst, n) = gradient_error(p.as_ref(), 200, 0xA6);
        (
            n == 200 && worst <= 1e-5,
            format!("worst relative error {worst:.2e} over {n} points"),
        )
    })
}

pub fn a7() -> Check {
    timed("A7", 30.0, || {
        match spurious_avoidance_experiment(&SpuriousConfig::default()) {
            Ok(r) => (
                r.hit_zero == 0 && r.converged_to_spurious == 0 && r.adversarial_fixed,
                format!(
                    "{} runs: hit zero {}, converged to spurious {}, x0=0 stays fixed: {}",
                    r.runs, r.hit_zero, r.converged_to_spurious, r.adversarial_fixed
                ),
            ),
            Err(e) => (false, e.to_string()),
        }
    })
}

pub fn a8() -> Check {
    let tt = TwoTimescale::new(0.25).expect("valid");
    let cs = ClipSchedule::new(1.0).expect("valid");
    let mut parts = Vec::new();
    let mut ok = true;
    for p in [0.6, 1.0] {
        let sched = StepSchedule::power(1.0, p).expect("valid");
        let passed = validate_schedules(&sched, Some(&tt), Some(&cs))
            .map(|r| r.passed())
            .unwrap_or(false);
        ok &= passed;
        parts.push(format!("p={p} {}", if passed { "passes" } else { "fails" }));
    }
    for (sched, name) in [
        (StepSchedule::Constant { eta0: 0.1 }, "eta_log_k_vanishes"),
        (
            StepSchedule::power(1.0, 2.0).expect("valid"),
            "eta_sum_diverges",
        ),
    ] {
        let names = validate_schedules(&sched, None, None)
            .map(|r| r.failure_names())
            .unwrap_or_default();
        let named = names.contains(&name);
        ok &= named;
        parts.push(format!("{sched:?} fails with [{}]", names.join(", ")));
    }
    Check::new("A8", ok, parts.join("; "))
}

/// `q0.5` and `q0.9` of `S(1.1, 1, 0.2)` in the 1-parameterization, from
/// numerical inversion of the characteristic function.
pub const STABLE_QUANTILES: [(f64, f64); 2] =
    [(0.5, -1.1611581370033395), (0.9, -0.10425786011487)];

pub fn a9() -> Check {
    let sigma = 0.7;
    let mut rng = ChaCha8Rng::seed_from_u64(0xA9);
    let gauss = AlphaStable::new(2.0, 0.0, sigma).expect("valid");
    let x: Vec<f64> = (0..1_000_000).map(|_| gauss.sample(&mut rng)).collect();
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (x.len() - 1) as f64;
    let var_err = (var / (2.0 * sigma * sigma) - 1.0).abs();

    let skewed = AlphaStable::new(1.1, 1.0, 0.2).expect("valid");
    let mut y: Vec<f64> = (0..10_000_000).map(|_| skewed.sample(&mut rng)).collect();
    let mut q_errs = Vec::new();
    for (p, q) in STABLE_QUANTILES {
        let idx = (p * y.len() as f64) as usize;
        let emp = *y.select_nth_unstable_by(idx, f64::total_cmp).1;
        q_errs.push(((emp - q) / q).abs());
    }
    Check::new(
        "A9",
        var_err <= 0.05 && q_errs.iter().all(|&e| e <= 0.03),
        format!(
            "variance off by {:.2}% (1e6 draws); q0.5 off {:.2}%, q0.9 off {:.2}% (1e7 draws)",
            100.0 * var_err,
            100.0 * q_errs[0],
            100.0 * q_errs[1]
        ),
    )
}

pub fn acceptance() -> Vec<Check> {
    vec![a1(), a2(), a3(), a4(), a5(), a6(), a7(), a8(), a9()]
}

pub fn invariants(clip: ClipFn) -> Vec<Check> {
    let mut out = core_checks();
    out.extend(problem_checks());
    out.extend(optim_checks());
    out.extend(clip_checks(clip, 10_000));
    out.extend(clipped_method_checks());
    out.extend(schedule_checks());
    out.extend(analysis_checks());
    out.extend(cli_checks());
    out
}
