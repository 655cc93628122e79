//! Experiment configuration: one JSON document, overridable from flags.

use std::path::{Path, PathBuf};

use afm_core::clip::{AdamcConfig, ClipRegion, ClippedVariant, SgdcConfig};
use afm_core::noise::NoiseModel;
use afm_core::optim::{self, AfmConfig, ConfigWarning, ScalingMode, Variant};
use afm_core::problems::{
    self, Dataset, KinkPolicy, L1Center, MaxAffine, Mlp, MlpSpec, NoisyLinear, Problem, Quadratic,
};
use afm_core::runner::{Init, Method, RunSpec, Sampling};
use afm_core::schedule::{
    validate_schedules, ClipSchedule, ScheduleReport, StepSchedule, TwoTimescale,
};
use afm_core::Vector;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};
use crate::io;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    pub optimizer: OptimizerConfig,
    pub schedule: StepSchedule,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub twotimescale: Option<TwoTimescale>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clip: Option<ClipConfig>,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub sampling: Sampling,
    #[serde(default = "default_iterations")]
    pub iterations: u64,
    /// Snapshot stride; 0 keeps only the first and last state.
    #[serde(default = "default_stride")]
    pub stride: u64,
    /// Single seed, merged into `seeds`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub kink_policy: KinkPolicy,
    #[serde(default = "default_converge_tol")]
    pub converge_tol: f64,
    /// Fixed starting point; otherwise drawn per seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Grid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub di: Option<DiConfig>,
}

fn default_iterations() -> u64 {
    1000
}

fn default_stride() -> u64 {
    100
}

fn default_converge_tol() -> f64 {
    1e-2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub id: String,
    #[serde(default)]
    pub params: ProblemParams,
}

/// Optional knobs of the catalog problems; each id accepts a subset.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_noise: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub widths: Option<Vec<usize>>,
    /// CSV file with rows `features..., label`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slopes: Option<Vec<Vec<f64>>>,
}

impl ProblemParams {
    fn set_fields(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        let mut note = |name, set: bool| {
            if set {
                out.push(name)
            }
        };
        note("n", self.n.is_some());
        note("count", self.count.is_some());
        note("seed", self.seed.is_some());
        note("label_noise", self.label_noise.is_some());
        note("widths", self.widths.is_some());
        note("dataset", self.dataset.is_some());
        note("center", self.center.is_some());
        note("slopes", self.slopes.is_some());
        out
    }
}

impl ProblemConfig {
    pub fn build(&self) -> Result<Box<dyn Problem>> {
        let p = &self.params;
        let allowed: &[&str] = match self.id.as_str() {
            "l1_center" => &["n", "count", "seed"],
            "noisy_linear" => &["n", "count", "seed", "label_noise"],
            "relu_mlp" => &["widths", "count", "seed", "dataset"],
            "max_affine" => &["slopes", "center"],
            "quadratic" => &["center"],
            "spurious" => &[],
            other => {
                return Err(CliError::config(format!(
                    "unknown problem id `{other}`; known: {}",
                    problems::CATALOG.join(", ")
                )))
            }
        };
        if let Some(bad) = p.set_fields().into_iter().find(|f| !allowed.contains(f)) {
            return Err(CliError::config(format!(
                "problem `{}` takes no parameter `{bad}`",
                self.id
            )));
        }
        if p.set_fields().is_empty() {
            return Ok(problems::build(&self.id)?);
        }
        Ok(match self.id.as_str() {
            "l1_center" => Box::new(L1Center::synthetic(
                p.n.unwrap_or(10),
                p.count.unwrap_or(5),
                p.seed.unwrap_or(0x11C3),
            )),
            "noisy_linear" => Box::new(NoisyLinear::synthetic(
                p.n.unwrap_or(20),
                p.count.unwrap_or(200),
                p.label_noise.unwrap_or(1.0),
                p.seed.unwrap_or(0x11EA),
            )?),
            "relu_mlp" => {
                let data = match &p.dataset {
                    Some(path) => io::load_dataset(path)?,
                    None => Dataset::two_clusters(p.count.unwrap_or(256), p.seed.unwrap_or(0x5EED)),
                };
                let mut spec = MlpSpec::default_relu();
                if let Some(w) = &p.widths {
                    spec.widths = w.clone();
                }
                Box::new(Mlp::new(spec, data)?)
            }
            "max_affine" => {
                let slopes = p
                    .slopes
                    .as_ref()
                    .ok_or_else(|| CliError::config("max_affine with parameters needs `slopes`"))?;
                let slopes: Vec<Vector> = slopes.iter().map(|s| Vector::from(s.clone())).collect();
                let n = slopes.first().map(|s| s.len()).unwrap_or(0);
                let center = p.center.clone().unwrap_or_else(|| vec![0.0; n]);
                Box::new(MaxAffine::centered(slopes, center.into())?)
            }
            "quadratic" => Box::new(Quadratic::new(p.center.clone().unwrap_or_default().into())),
            _ => unreachable!("ids filtered above"),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case", deny_unknown_fields)]
pub enum OptimizerConfig {
    Afm {
        variant: Variant,
        /// Defaults to the variant's own value (0.1 for NAdam, else 0).
        #[serde(default, skip_serializing_if = "Option::is_none")]
        alpha: Option<f64>,
        #[serde(default = "half")]
        gamma: f64,
        #[serde(default = "default_epsilon")]
        epsilon: f64,
        #[serde(default = "one")]
        tau1: f64,
        #[serde(default = "two")]
        tau2: f64,
        #[serde(default)]
        scaling: ScalingMode,
    },
    SgdC {
        #[serde(default = "one")]
        tau1: f64,
        #[serde(default)]
        alpha: f64,
    },
    AdamC {
        #[serde(default)]
        variant: ClippedVariant,
        #[serde(default = "one")]
        tau1: f64,
        #[serde(default = "two")]
        tau2: f64,
        #[serde(default)]
        alpha: f64,
        #[serde(default = "default_epsilon")]
        epsilon: f64,
        #[serde(default)]
        clip_nesterov: bool,
        #[serde(default)]
        scaling: ScalingMode,
    },
}

fn half() -> f64 {
    0.5
}

fn one() -> f64 {
    1.0
}

fn two() -> f64 {
    2.0
}

fn default_epsilon() -> f64 {
    1e-8
}

impl OptimizerConfig {
    pub fn afm(&self) -> Option<AfmConfig> {
        match *self {
            OptimizerConfig::Afm {
                variant,
                alpha,
                gamma,
                epsilon,
                tau1,
                tau2,
                ..
            } => Some(AfmConfig {
                alpha: alpha.unwrap_or(variant.default_alpha()),
                gamma,
                epsilon,
                tau1,
                tau2,
                kappa: variant.kappa(),
                variant,
            }),
            _ => None,
        }
    }

    pub fn name(&self) -> String {
        match self {
            OptimizerConfig::Afm { variant, .. } => variant.name().to_string(),
            OptimizerConfig::SgdC { .. } => "sgd_c".into(),
            OptimizerConfig::AdamC { .. } => "adam_c".into(),
        }
    }

    fn set(&mut self, key: &str, value: f64) -> Result<()> {
        let slot = match (self, key) {
            (OptimizerConfig::Afm { tau1, .. }, "tau1")
            | (OptimizerConfig::SgdC { tau1, .. }, "tau1")
            | (OptimizerConfig::AdamC { tau1, .. }, "tau1") => tau1,
            (OptimizerConfig::Afm { tau2, .. }, "tau2")
            | (OptimizerConfig::AdamC { tau2, .. }, "tau2") => tau2,
            (o, k) => {
                return Err(CliError::config(format!(
                    "optimizer `{}` has no `{k}`",
                    o.name()
                )))
            }
        };
        *slot = value;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClipConfig {
    pub c0: f64,
    #[serde(default)]
    pub region: ClipRegion,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    #[serde(default = "none_kind")]
    pub kind: String,
    #[serde(default)]
    pub params: NoiseParams,
}

fn none_kind() -> String {
    "none".into()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
}

impl NoiseConfig {
    pub fn model(&self) -> Result<NoiseModel> {
        let p = &self.params;
        let need = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| CliError::config(format!("noise `{}` needs `{name}`", self.kind)))
        };
        let model = match self.kind.as_str() {
            "" | "none" => NoiseModel::None,
            "gaussian" => NoiseModel::Gaussian {
                sigma: need(p.sigma, "sigma")?,
            },
            "uniform" => NoiseModel::Uniform {
                bound: need(p.bound, "bound")?,
            },
            "stable" => NoiseModel::Stable {
                alpha: need(p.alpha, "alpha")?,
                beta: p.beta.unwrap_or(0.0),
                scale: need(p.scale, "scale")?,
            },
            other => return Err(CliError::config(format!("unknown noise kind `{other}`"))),
        };
        model.validate()?;
        Ok(model)
    }
}

/// Sweep axes; an absent axis keeps the configured value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau1: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau2: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridPoint {
    pub eta0: f64,
    pub tau1: Option<f64>,
    pub tau2: Option<f64>,
}

impl Grid {
    /// Cartesian product of the axes, `eta0` varying slowest.
    pub fn points(&self, base: &ExperimentConfig) -> Result<Vec<GridPoint>> {
        let axes = [&self.eta0, &self.tau1, &self.tau2];
        if axes.iter().all(|a| a.is_none()) {
            return Err(CliError::config("sweep grid has no axes"));
        }
        if axes
            .iter()
            .any(|a| a.as_ref().is_some_and(|v| v.is_empty()))
        {
            return Err(CliError::config("sweep grid has an empty axis"));
        }
        let lift = |a: &Option<Vec<f64>>| match a {
            Some(v) => v.iter().map(|&x| Some(x)).collect(),
            None => vec![None],
        };
        let eta0s: Vec<f64> = self
            .eta0
            .clone()
            .unwrap_or_else(|| vec![base.schedule.eta0()]);
        let tau1s: Vec<Option<f64>> = lift(&self.tau1);
        let tau2s: Vec<Option<f64>> = lift(&self.tau2);
        let mut out = Vec::new();
        for &eta0 in &eta0s {
            for &tau1 in &tau1s {
                for &tau2 in &tau2s {
                    out.push(GridPoint { eta0, tau1, tau2 });
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiConfig {
    pub dt: f64,
    pub horizon: f64,
    #[serde(default = "default_snapshot_every")]
    pub snapshot_every: f64,
    #[serde(default = "default_stop_tol")]
    pub stop_tol: f64,
    /// Value of `sign(0)` inside `U`.
    #[serde(default = "one")]
    pub sign_at_zero: f64,
}

fn default_snapshot_every() -> f64 {
    0.1
}

fn default_stop_tol() -> f64 {
    1e-6
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seeds: Option<Vec<u64>>,
    pub out: Option<PathBuf>,
}

/// Problems found while validating a config that do not stop a run unless
/// strict mode is on.
#[derive(Debug, Clone, Default)]
pub struct Validation {
    pub warnings: Vec<ConfigWarning>,
    pub schedule: Option<ScheduleReport>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| CliError::config(format!("invalid config: {e}")))
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = &o.seeds {
            self.seeds = s.clone();
            self.seed = None;
        }
        if let Some(out) = &o.out {
            self.out = Some(out.clone());
        }
    }

    pub fn seed_list(&self) -> Vec<u64> {
        let mut seeds: Vec<u64> = self.seed.into_iter().collect();
        for s in &self.seeds {
            if !seeds.contains(s) {
                seeds.push(*s);
            }
        }
        if seeds.is_empty() {
            seeds.push(0);
        }
        seeds
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    /// SHA-256 of the config without seeds and output location, so every
    /// seed of one experiment shares it.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.seed = None;
        c.seeds.clear();
        c.out = None;
        let text = serde_json::to_string(&c).expect("config serializes");
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    fn clip_schedule(&self) -> Result<Option<ClipSchedule>> {
        self.clip.map(|c| Ok(ClipSchedule::new(c.c0)?)).transpose()
    }

    pub fn method(&self) -> Result<Method> {
        let clip = self
            .clip_schedule()?
            .unwrap_or(ClipSchedule { c0: f64::INFINITY });
        let region = self.clip.map(|c| c.region).unwrap_or_default();
        let method = match self.optimizer {
            OptimizerConfig::Afm { scaling, .. } => {
                if self.clip.is_some() {
                    return Err(CliError::config(
                        "`clip` applies only to sgd_c and adam_c optimizers",
                    ));
                }
                Method::Afm {
                    cfg: self.optimizer.afm().expect("afm optimizer"),
                    scaling,
                }
            }
            OptimizerConfig::SgdC { tau1, alpha } => Method::SgdC {
                cfg: SgdcConfig { tau1, alpha },
                region,
                clip,
            },
            OptimizerConfig::AdamC {
                variant,
                tau1,
                tau2,
                alpha,
                epsilon,
                clip_nesterov,
                scaling,
            } => Method::AdamC {
                cfg: AdamcConfig {
                    tau1,
                    tau2,
                    alpha,
                    epsilon,
                    variant,
                    clip_nesterov,
                },
                region,
                clip,
                scaling,
            },
        };
        Ok(method)
    }

    /// Checks everything that can be checked without running. Schedule
    /// failures are errors unless `override_schedule_check`; optimizer
    /// warnings are errors in `strict` mode.
    pub fn validate(&self, override_schedule_check: bool, strict: bool) -> Result<Validation> {
        self.schedule.validate()?;
        self.kink_policy.validate()?;
        self.noise.model()?;
        self.method()?;
        if self.iterations == 0 {
            return Err(CliError::config("`iterations` must be positive"));
        }
        if !(self.converge_tol >= 0.0) {
            return Err(CliError::config("`converge_tol` must be nonnegative"));
        }
        let mut v = Validation::default();
        if let Some(afm) = self.optimizer.afm() {
            v.warnings = optim::validate_config(&afm)?.warnings;
        }
        let report = validate_schedules(
            &self.schedule,
            self.twotimescale.as_ref(),
            self.clip_schedule()?.as_ref(),
        )?;
        if !report.passed() && !override_schedule_check {
            return Err(CliError::config(format!(
                "schedule check failed: {}\n{report}(pass --override-schedule-check to run anyway)",
                report.failure_names().join(", ")
            )));
        }
        v.schedule = Some(report);
        if strict && !v.warnings.is_empty() {
            let msgs: Vec<String> = v.warnings.iter().map(|w| w.to_string()).collect();
            return Err(CliError::config(format!(
                "strict mode: {}",
                msgs.join("; ")
            )));
        }
        Ok(v)
    }

    pub fn run_spec(&self, seed: u64) -> Result<RunSpec> {
        let mut spec = RunSpec::new(self.method()?, self.schedule, self.iterations);
        spec.noise = self.noise.model()?;
        spec.sampling = self.sampling;
        spec.stride = self.stride;
        spec.policy = self.kink_policy;
        spec.init = match &self.init {
            Some(x) => Init::Point(x.clone().into()),
            None => Init::Random,
        };
        spec.seed = seed;
        spec.converge_tol = self.converge_tol;
        spec.config_hash = self.hash();
        Ok(spec)
    }

    /// This config with one grid point substituted.
    pub fn at(&self, point: &GridPoint) -> Result<Self> {
        let mut c = self.clone();
        c.grid = None;
        c.schedule = self.schedule.with_eta0(point.eta0);
        if let Some(t) = point.tau1 {
            c.optimizer.set("tau1", t)?;
        }
        if let Some(t) = point.tau2 {
            c.optimizer.set("tau2", t)?;
        }
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "problem": {"id": "l1_center"},
        "optimizer": {"method": "afm", "variant": "adam"},
        "schedule": {"family": "power", "eta0": 0.05, "p": 0.6}
    }"#;

    #[test]
    fn defaults_fill_in() {
        let c = ExperimentConfig::from_json(MINIMAL).unwrap();
        assert_eq!(c.iterations, 1000);
        assert_eq!(c.seed_list(), [0]);
        let afm = c.optimizer.afm().unwrap();
        assert_eq!((afm.tau1, afm.tau2, afm.gamma), (1.0, 2.0, 0.5));
        assert!(c.validate(false, true).unwrap().warnings.is_empty());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = MINIMAL.replace("\"adam\"}", "\"adam\", \"beta1\": 0.9}");
        assert!(ExperimentConfig::from_json(&text).is_err());
        let text = MINIMAL.replace(
            "l1_center\"}",
            "l1_center\", \"params\": {\"label_noise\": 1}}",
        );
        let c = ExperimentConfig::from_json(&text).unwrap();
        assert!(c.problem.build().is_err());
    }

    #[test]
    fn flags_take_precedence() {
        let mut c = ExperimentConfig::from_json(&MINIMAL.replace(
            "\"schedule\"",
            "\"seeds\": [1, 2], \"out\": \"a\", \"schedule\"",
        ))
        .unwrap();
        c.apply(&Overrides {
            seeds: Some(vec![7]),
            out: Some("b".into()),
        });
        assert_eq!(c.seed_list(), [7]);
        assert_eq!(c.out_dir(), PathBuf::from("b"));
    }

    #[test]
    fn hash_ignores_seeds_only() {
        let a = ExperimentConfig::from_json(MINIMAL).unwrap();
        let mut b = a.clone();
        b.seeds = vec![3, 4];
        assert_eq!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
        b.iterations = 5;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn schedule_check_and_strict_mode() {
        let constant = MINIMAL.replace(
            r#"{"family": "power", "eta0": 0.05, "p": 0.6}"#,
            r#"{"family": "constant", "eta0": 0.01}"#,
        );
        let c = ExperimentConfig::from_json(&constant).unwrap();
        match c.validate(false, false) {
            Err(CliError::Config(msg)) => assert!(msg.contains("eta_log_k_vanishes"), "{msg}"),
            other => panic!("{other:?}"),
        }
        assert!(c.validate(true, false).is_ok());

        let loose = MINIMAL.replace("\"adam\"}", "\"adam\", \"tau2\": 5.0}");
        let c = ExperimentConfig::from_json(&loose).unwrap();
        assert_eq!(c.validate(false, false).unwrap().warnings.len(), 1);
        assert_eq!(c.validate(false, true).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn grid_cardinality() {
        let c = ExperimentConfig::from_json(MINIMAL).unwrap();
        let g = Grid {
            eta0: Some(vec![0.01, 0.05, 0.1]),
            tau1: Some(vec![1.0, 2.0]),
            tau2: None,
        };
        assert_eq!(g.points(&c).unwrap().len(), 6);
        assert!(Grid::default().points(&c).is_err());
        let empty = Grid {
            eta0: Some(vec![]),
            ..Grid::default()
        };
        assert!(empty.points(&c).is_err());
    }

    #[test]
    fn noise_blocks() {
        let n = NoiseConfig {
            kind: "stable".into(),
            params: NoiseParams {
                alpha: Some(1.1),
                beta: Some(1.0),
                scale: Some(0.2),
                ..NoiseParams::default()
            },
        };
        assert!(matches!(n.model().unwrap(), NoiseModel::Stable { .. }));
        let bad = NoiseConfig {
            kind: "stable".into(),
            params: NoiseParams {
                alpha: Some(0.9),
                scale: Some(1.0),
                ..NoiseParams::default()
            },
        };
        assert!(bad.model().is_err());
        assert_eq!(NoiseConfig::default().model().unwrap(), NoiseModel::None);
    }
}
