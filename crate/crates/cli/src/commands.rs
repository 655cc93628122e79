//! The `run`, `sweep` and `simulate-di` subcommands.

use std::path::Path;
use std::time::Instant;

use afm_core::analysis::{simulate_di, DiOutcome, DiSimConfig, RunStatus, Snapshot};
use afm_core::problems::Problem;
use afm_core::runner::{self, RunOutcome, INIT_STREAM};
use afm_core::{OptimizerState, SignSelection};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, GridPoint};
use crate::error::{CliError, Result};
use crate::io;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Serial,
    #[default]
    Parallel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub status: RunStatus,
    pub iterations: u64,
    pub final_f: f64,
    pub final_gap: Option<f64>,
    pub surrogate_gap: Option<f64>,
    pub stationary_dist: Option<f64>,
    pub max_x_inf: f64,
    pub wall_time_s: f64,
    pub trajectory: String,
}

/// Medians over runs that did not diverge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub runs: usize,
    pub diverged: usize,
    pub median_final_f: Option<f64>,
    pub median_final_gap: Option<f64>,
    pub median_stationary_dist: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub config_hash: String,
    pub problem: String,
    pub optimizer: String,
    pub seeds: Vec<SeedResult>,
    pub aggregate: Aggregate,
}

pub fn median(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let mut v: Vec<f64> = values.into_iter().collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    })
}

fn aggregate(results: &[SeedResult]) -> Aggregate {
    let ok: Vec<&SeedResult> = results
        .iter()
        .filter(|r| r.status != RunStatus::Diverged)
        .collect();
    Aggregate {
        runs: results.len(),
        diverged: results.len() - ok.len(),
        median_final_f: median(ok.iter().map(|r| r.final_f)),
        median_final_gap: median(ok.iter().filter_map(|r| r.final_gap.or(r.surrogate_gap))),
        median_stationary_dist: median(ok.iter().filter_map(|r| r.stationary_dist)),
    }
}

fn map_seeds<T: Send>(
    seeds: &[u64],
    exec: Execution,
    f: impl Fn(u64) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    match exec {
        Execution::Serial => seeds.iter().map(|&s| f(s)).collect(),
        Execution::Parallel => seeds.par_iter().map(|&s| f(s)).collect(),
    }
}

fn seed_result(seed: u64, out: &RunOutcome, wall: f64, file: String) -> SeedResult {
    let last: &Snapshot = out
        .trajectory
        .last()
        .expect("a run records its initial state");
    SeedResult {
        seed,
        status: out.status,
        iterations: out.final_state.k,
        final_f: last.f,
        final_gap: last.gap,
        surrogate_gap: last.surrogate_gap,
        stationary_dist: last.stationary_dist,
        max_x_inf: out.max_x_inf,
        wall_time_s: wall,
        trajectory: file,
    }
}

/// Runs every seed of `cfg` without writing anything.
pub fn execute(
    cfg: &ExperimentConfig,
    problem: &dyn Problem,
    exec: Execution,
) -> Result<Vec<(u64, RunOutcome, f64)>> {
    map_seeds(&cfg.seed_list(), exec, |seed| {
        let spec = cfg.run_spec(seed)?;
        let start = Instant::now();
        let out = runner::run(problem, &spec)?;
        Ok((seed, out, start.elapsed().as_secs_f64()))
    })
}

pub fn trajectory_name(seed: u64) -> String {
    format!("trajectory_seed{seed}.jsonl")
}

/// Runs all seeds, writes one trajectory per seed and `summary.json`.
pub fn run(cfg: &ExperimentConfig, exec: Execution) -> Result<RunSummary> {
    let problem = cfg.problem.build()?;
    let outcomes = execute(cfg, problem.as_ref(), exec)?;
    let dir = cfg.out_dir();
    let mut seeds = Vec::with_capacity(outcomes.len());
    for (seed, out, wall) in &outcomes {
        let name = trajectory_name(*seed);
        io::write_trajectory(&dir.join(&name), &out.trajectory)?;
        seeds.push(seed_result(*seed, out, *wall, name));
    }
    let summary = RunSummary {
        config_hash: cfg.hash(),
        problem: cfg.problem.id.clone(),
        optimizer: cfg.optimizer.name(),
        aggregate: aggregate(&seeds),
        seeds,
    };
    io::write_json(&dir.join("summary.json"), &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub eta0: f64,
    pub tau1: Option<f64>,
    pub tau2: Option<f64>,
    pub seed: u64,
    pub status: RunStatus,
    pub final_f: f64,
    pub final_gap: Option<f64>,
    pub surrogate_gap: Option<f64>,
    pub stationary_dist: Option<f64>,
}

/// One row per grid point per seed, written to `sweep.csv`.
pub fn sweep(cfg: &ExperimentConfig, exec: Execution) -> Result<Vec<SweepRow>> {
    let grid = cfg
        .grid
        .as_ref()
        .ok_or_else(|| CliError::config("sweep needs a `grid` block"))?;
    let points = grid.points(cfg)?;
    let problem = cfg.problem.build()?;
    let jobs: Vec<(GridPoint, u64)> = points
        .iter()
        .flat_map(|p| cfg.seed_list().into_iter().map(move |s| (*p, s)))
        .collect();
    let run_one = |(point, seed): &(GridPoint, u64)| -> Result<SweepRow> {
        let spec = cfg.at(point)?.run_spec(*seed)?;
        let out = runner::run(problem.as_ref(), &spec)?;
        let r = seed_result(*seed, &out, 0.0, String::new());
        Ok(SweepRow {
            eta0: point.eta0,
            tau1: point.tau1,
            tau2: point.tau2,
            seed: *seed,
            status: r.status,
            final_f: r.final_f,
            final_gap: r.final_gap,
            surrogate_gap: r.surrogate_gap,
            stationary_dist: r.stationary_dist,
        })
    };
    let rows: Vec<SweepRow> = match exec {
        Execution::Serial => jobs.iter().map(run_one).collect::<Result<_>>()?,
        Execution::Parallel => jobs.par_iter().map(run_one).collect::<Result<_>>()?,
    };
    io::write_csv(&cfg.out_dir().join("sweep.csv"), &rows)?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiResult {
    pub seed: u64,
    pub status: RunStatus,
    pub t_end: Option<f64>,
    pub final_phi: f64,
    pub stationary_dist: Option<f64>,
    /// Snapshot pairs where φ failed to decrease before the stationarity
    /// first dropped below 1e-3.
    pub phi_violations: usize,
    pub trajectory: String,
}

/// Number of consecutive snapshot pairs, up to the first one with
/// stationarity below `tol`, where `phi` does not strictly decrease.
pub fn phi_violations(snaps: &[Snapshot], tol: f64) -> usize {
    if snaps.is_empty() {
        return 0;
    }
    let stop = snaps
        .iter()
        .position(|s| s.stationarity().is_some_and(|d| d < tol))
        .unwrap_or(snaps.len() - 1);
    snaps[..=stop]
        .windows(2)
        .filter(|w| !(w[1].phi < w[0].phi))
        .count()
}

pub fn di_config(cfg: &ExperimentConfig) -> Result<DiSimConfig> {
    let di = cfg
        .di
        .ok_or_else(|| CliError::config("simulate-di needs a `di` block"))?;
    let afm = cfg
        .optimizer
        .afm()
        .ok_or_else(|| CliError::config("simulate-di needs an `afm` optimizer"))?;
    if di.dt > 1e-2 {
        return Err(CliError::config("di.dt must be at most 1e-2"));
    }
    let mut sim = DiSimConfig::new(afm, di.dt, di.horizon);
    sim.policy = cfg.kink_policy;
    sim.sign = SignSelection::new(di.sign_at_zero)?;
    sim.snapshot_every = di.snapshot_every;
    sim.stop_tol = di.stop_tol;
    Ok(sim)
}

pub fn di_initial_state(
    cfg: &ExperimentConfig,
    problem: &dyn Problem,
    seed: u64,
) -> OptimizerState {
    let x = match &cfg.init {
        Some(x) => x.clone().into(),
        None => problem.initial_point(&mut runner::stream(seed, INIT_STREAM)),
    };
    OptimizerState::new(x)
}

pub fn simulate(cfg: &ExperimentConfig, exec: Execution) -> Result<Vec<DiResult>> {
    let sim = di_config(cfg)?;
    let problem = cfg.problem.build()?;
    let outcomes: Vec<(u64, DiOutcome)> = map_seeds(&cfg.seed_list(), exec, |seed| {
        let init = di_initial_state(cfg, problem.as_ref(), seed);
        Ok((seed, simulate_di(problem.as_ref(), &init, &sim)?))
    })?;
    let dir = cfg.out_dir();
    let mut results = Vec::new();
    for (seed, out) in &outcomes {
        let name = format!("di_seed{seed}.jsonl");
        io::write_trajectory(&dir.join(&name), &out.trajectory)?;
        let last = out.trajectory.last().expect("initial snapshot");
        results.push(DiResult {
            seed: *seed,
            status: out.status,
            t_end: last.t,
            final_phi: last.phi,
            stationary_dist: last.stationarity(),
            phi_violations: phi_violations(out.trajectory.snapshots(), 1e-3),
            trajectory: name,
        });
    }
    io::write_json(&dir.join("di_summary.json"), &results)?;
    Ok(results)
}

/// Loads `path` if given; used by commands that need a config.
pub fn require_config(path: Option<&Path>) -> Result<ExperimentConfig> {
    let path = path.ok_or_else(|| CliError::config("this command needs --config PATH"))?;
    ExperimentConfig::load(path)
}
