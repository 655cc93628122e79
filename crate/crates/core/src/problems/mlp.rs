//! A small fully connected network whose per-sample loss is differentiated
//! by the reverse-mode [`Tape`](super::tape::Tape).

use alloc::vec::Vec;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::tape::{Tape, Var};
use super::{KinkPolicy, Problem};
use crate::{Error, Result, Vector};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(rename_all = "snake_case")
)]
pub enum Activation {
    Relu,
    LeakyRelu { slope: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(rename_all = "snake_case")
)]
pub enum Loss {
    /// `½‖z − onehot(y)‖²`.
    Squared,
    /// Softmax cross-entropy `logsumexp(z) − z_y`.
    Logistic,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MlpSpec {
    /// Layer widths from input to output, e.g. `[2, 16, 2]`.
    pub widths: Vec<usize>,
    pub activation: Activation,
    pub loss: Loss,
}

impl MlpSpec {
    /// 2–16–2 ReLU network with logistic loss.
    pub fn default_relu() -> Self {
        MlpSpec {
            widths: alloc::vec![2, 16, 2],
            activation: Activation::Relu,
            loss: Loss::Logistic,
        }
    }

    pub fn num_params(&self) -> usize {
        self.widths.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }
}

/// Feature rows with integer class labels in `0..classes`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<Vector>,
    labels: Vec<usize>,
    classes: usize,
}

impl Dataset {
    pub fn new(features: Vec<Vector>, labels: Vec<usize>) -> Result<Self> {
        let d = features.first().map(|f| f.len()).unwrap_or(0);
        if d == 0 || features.iter().any(|f| f.len() != d) {
            return Err(Error::param(
                "features",
                "rows must share a positive dimension",
            ));
        }
        if features.iter().any(|f| !f.is_finite()) {
            return Err(Error::param("features", "entries must be finite"));
        }
        if labels.len() != features.len() {
            return Err(Error::param("labels", "one label per row"));
        }
        let classes = labels.iter().copied().max().unwrap_or(0) + 1;
        Ok(Dataset {
            features,
            labels,
            classes: classes.max(2),
        })
    }

    /// Two Gaussian clusters in the plane centred at `(-1, -1)` and `(1, 1)`
    /// with unit variance, classes alternating.
    pub fn two_clusters(count: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut features = Vec::with_capacity(count);
        let mut labels = Vec::with_capacity(count);
        for i in 0..count {
            let class = i % 2;
            let mu = if class == 0 { -1.0 } else { 1.0 };
            features.push(Vector::from_fn(2, |_| {
                mu + rng.sample::<f64, _>(StandardNormal)
            }));
            labels.push(class);
        }
        Dataset::new(features, labels).expect("synthetic data is valid")
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.features[0].len()
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn features(&self) -> &[Vector] {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }
}

/// Parameters are packed layer by layer as the row-major weight matrix
/// (`out × in`) followed by the bias.
#[derive(Debug, Clone)]
pub struct Mlp {
    spec: MlpSpec,
    data: Dataset,
    n_params: usize,
}

impl Mlp {
    pub fn new(spec: MlpSpec, data: Dataset) -> Result<Self> {
        if spec.widths.len() < 2 || spec.widths.contains(&0) {
            return Err(Error::param(
                "widths",
                "need at least input and output layers, all nonzero",
            ));
        }
        if spec.widths[0] != data.feature_dim() {
            return Err(Error::param(
                "widths",
                "input width must match the feature dimension",
            ));
        }
        if *spec.widths.last().unwrap() < data.classes() {
            return Err(Error::param(
                "widths",
                "output width must cover every class",
            ));
        }
        if let Activation::LeakyRelu { slope } = spec.activation {
            if !(0.0..1.0).contains(&slope) {
                return Err(Error::param("slope", "leaky slope must lie in [0, 1)"));
            }
        }
        let n_params = spec.num_params();
        Ok(Mlp {
            spec,
            data,
            n_params,
        })
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    fn activate(&self, t: f64) -> f64 {
        match self.spec.activation {
            Activation::Relu => t.max(0.0),
            Activation::LeakyRelu { slope } => {
                if t >= 0.0 {
                    t
                } else {
                    slope * t
                }
            }
        }
    }

    /// Plain forward pass; calls `on_pre` with every hidden pre-activation.
    fn forward(&self, x: &[f64], input: &[f64], mut on_pre: impl FnMut(f64)) -> Vec<f64> {
        let mut h: Vec<f64> = input.to_vec();
        let mut offset = 0;
        let layers = self.spec.widths.len() - 1;
        for (l, w) in self.spec.widths.windows(2).enumerate() {
            let (fan_in, fan_out) = (w[0], w[1]);
            let weights = &x[offset..offset + fan_in * fan_out];
            let bias = &x[offset + fan_in * fan_out..offset + fan_in * fan_out + fan_out];
            offset += fan_in * fan_out + fan_out;
            let z: Vec<f64> = (0..fan_out)
                .map(|r| {
                    weights[r * fan_in..(r + 1) * fan_in]
                        .iter()
                        .zip(&h)
                        .map(|(a, b)| a * b)
                        .sum::<f64>()
                        + bias[r]
                })
                .collect();
            h = if l + 1 < layers {
                z.into_iter()
                    .map(|t| {
                        on_pre(t);
                        self.activate(t)
                    })
                    .collect()
            } else {
                z
            };
        }
        h
    }

    fn loss(&self, z: &[f64], label: usize) -> f64 {
        match self.spec.loss {
            Loss::Squared => {
                0.5 * z
                    .iter()
                    .enumerate()
                    .map(|(j, &v)| {
                        let t = if j == label { 1.0 } else { 0.0 };
                        (v - t) * (v - t)
                    })
                    .sum::<f64>()
            }
            Loss::Logistic => {
                let top = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                top + libm::log(z.iter().map(|&v| libm::exp(v - top)).sum::<f64>()) - z[label]
            }
        }
    }

    fn taped_loss(
        &self,
        tape: &mut Tape,
        params: &[Var],
        input: &[f64],
        label: usize,
        policy: &KinkPolicy,
    ) -> Var {
        let layers = self.spec.widths.len() - 1;
        let mut offset = 0;
        // First layer multiplies parameters by constants.
        let mut h: Vec<Var> = Vec::new();
        for (l, w) in self.spec.widths.windows(2).enumerate() {
            let (fan_in, fan_out) = (w[0], w[1]);
            let mut z = Vec::with_capacity(fan_out);
            for r in 0..fan_out {
                let row = offset + r * fan_in;
                let mut acc = params[offset + fan_in * fan_out + r];
                for c in 0..fan_in {
                    let term = if l == 0 {
                        tape.scale(params[row + c], input[c])
                    } else {
                        tape.mul(params[row + c], h[c])
                    };
                    acc = tape.add(acc, term);
                }
                z.push(acc);
            }
            offset += fan_in * fan_out + fan_out;
            h = if l + 1 < layers {
                z.into_iter()
                    .map(|t| match self.spec.activation {
                        Activation::Relu => tape.relu(t, policy),
                        Activation::LeakyRelu { slope } => tape.leaky_relu(t, slope, policy),
                    })
                    .collect()
            } else {
                z
            };
        }
        match self.spec.loss {
            Loss::Squared => {
                let terms: Vec<Var> = h
                    .iter()
                    .enumerate()
                    .map(|(j, &v)| {
                        let t = if j == label { 1.0 } else { 0.0 };
                        let d = tape.add_const(v, -t);
                        tape.square(d)
                    })
                    .collect();
                let s = tape.sum(&terms);
                tape.scale(s, 0.5)
            }
            Loss::Logistic => {
                // The shift is a constant; logsumexp is shift-invariant.
                let top = h
                    .iter()
                    .map(|v| v.value())
                    .fold(f64::NEG_INFINITY, f64::max);
                let exps: Vec<Var> = h
                    .iter()
                    .map(|&v| {
                        let s = tape.add_const(v, -top);
                        tape.exp(s)
                    })
                    .collect();
                let total = tape.sum(&exps);
                let lse = tape.ln(total);
                let lse = tape.add_const(lse, top);
                tape.sub(lse, h[label])
            }
        }
    }
}

impl Problem for Mlp {
    fn name(&self) -> &str {
        "relu_mlp"
    }

    fn dim(&self) -> usize {
        self.n_params
    }

    fn num_components(&self) -> usize {
        self.data.len()
    }

    fn component_value(&self, i: usize, x: &[f64]) -> f64 {
        let z = self.forward(x, &self.data.features[i], |_| {});
        self.loss(&z, self.data.labels[i])
    }

    fn component_subgrad(&self, i: usize, x: &[f64], policy: &KinkPolicy) -> Vector {
        let mut tape = Tape::with_capacity(4 * self.n_params + 64);
        let params: Vec<Var> = x.iter().map(|&p| tape.leaf(p)).collect();
        let out = self.taped_loss(
            &mut tape,
            &params,
            &self.data.features[i],
            self.data.labels[i],
            policy,
        );
        let adj = tape.gradient(out);
        params.iter().map(|p| adj[p.index()]).collect()
    }

    fn kink_margin(&self, i: usize, x: &[f64]) -> f64 {
        let mut margin = f64::INFINITY;
        self.forward(x, &self.data.features[i], |t| margin = margin.min(t.abs()));
        margin
    }

    /// Weights uniform in `±1/√fan_in`, biases uniform in `±0.1`.
    fn initial_point(&self, rng: &mut dyn RngCore) -> Vector {
        let mut out = Vec::with_capacity(self.n_params);
        for w in self.spec.widths.windows(2) {
            let bound = 1.0 / libm::sqrt(w[0] as f64);
            for _ in 0..w[0] * w[1] {
                out.push(rng.random_range(-bound..bound));
            }
            for _ in 0..w[1] {
                out.push(rng.random_range(-0.1..0.1));
            }
        }
        out.into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{finite_diff, subgrad};

    fn tiny(loss: Loss, activation: Activation) -> Mlp {
        let spec = MlpSpec {
            widths: alloc::vec![2, 3, 2],
            activation,
            loss,
        };
        Mlp::new(spec, Dataset::two_clusters(8, 3)).unwrap()
    }

    #[test]
    fn param_count() {
        assert_eq!(
            MlpSpec::default_relu().num_params(),
            2 * 16 + 16 + 16 * 2 + 2
        );
    }

    #[test]
    fn shape_validation() {
        let spec = MlpSpec {
            widths: alloc::vec![3, 4, 2],
            ..MlpSpec::default_relu()
        };
        assert!(Mlp::new(spec, Dataset::two_clusters(4, 0)).is_err());
        assert!(Dataset::new(alloc::vec![Vector::from([1.0])], alloc::vec![]).is_err());
    }

    #[test]
    fn tape_matches_finite_differences_away_from_kinks() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for (loss, act) in [
            (Loss::Squared, Activation::Relu),
            (Loss::Logistic, Activation::Relu),
            (Loss::Logistic, Activation::LeakyRelu { slope: 0.1 }),
        ] {
            let p = tiny(loss, act);
            let mut checked = 0;
            while checked < 20 {
                let x = p.initial_point(&mut rng);
                let i = rng.random_range(0..p.num_components());
                if p.kink_margin(i, &x) < 1e-3 {
                    continue;
                }
                let g = subgrad(&p, i, &x, &KinkPolicy::default()).unwrap();
                let fd = finite_diff(&p, i, &x, 1e-6).unwrap();
                let err = g.sub(&fd).unwrap().norm2() / (1.0 + fd.norm2());
                assert!(err <= 1e-5, "{loss:?} {act:?}: {err}");
                checked += 1;
            }
        }
    }

    #[test]
    fn dead_unit_at_kink_uses_policy() {
        // Zero first layer puts every pre-activation exactly at the kink;
        // the second layer (entries 9..15) is nonzero so signal flows back.
        let p = tiny(Loss::Squared, Activation::Relu);
        let mut x = Vector::zeros(p.dim());
        x[9..15].fill(1.0);
        assert_eq!(p.kink_margin(0, &x), 0.0);
        let g0 = subgrad(&p, 0, &x, &KinkPolicy::with_relu_at_zero(0.0).unwrap()).unwrap();
        let g1 = subgrad(&p, 0, &x, &KinkPolicy::with_relu_at_zero(1.0).unwrap()).unwrap();
        assert!(g0[..9].iter().all(|&v| v == 0.0));
        assert!(g1[..9].iter().any(|&v| v != 0.0));
    }
}
