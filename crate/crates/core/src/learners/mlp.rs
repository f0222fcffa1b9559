//! Single-hidden-layer network trained one instance at a time.
//!
//! Inputs are standardized with running per-attribute mean and variance.
//! Parameters live in one flat buffer laid out as
//! `[W1 (hidden × d), b1 (hidden), W2 (classes × hidden), b2 (classes)]`,
//! which is also the layout of [`Mlp::loss_and_gradient`]'s gradient.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ClassScores;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpConfig {
    pub hidden: usize,
    pub optimizer: Optimizer,
    pub learning_rate: f64,
    pub seed: u64,
    pub activation: Activation,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            hidden: 16,
            optimizer: Optimizer::Adam,
            learning_rate: 5e-3,
            seed: 0,
            activation: Activation::Relu,
        }
    }
}

impl MlpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 {
            return Err(Error::InvalidConfig("mlp hidden must be at least 1".into()));
        }
        // zero is accepted so that a frozen network can be expressed
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "mlp learning_rate {} must be positive",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum OptimizerState {
    Sgd,
    Adam { m: Vec<f64>, v: Vec<f64>, t: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RunningScaler {
    n: u64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl RunningScaler {
    fn new(d: usize) -> Self {
        Self {
            n: 0,
            mean: vec![0.0; d],
            m2: vec![0.0; d],
        }
    }

    fn observe(&mut self, x: &[f64]) {
        self.n += 1;
        let n = self.n as f64;
        for ((mean, m2), &v) in self.mean.iter_mut().zip(&mut self.m2).zip(x) {
            let delta = v - *mean;
            *mean += delta / n;
            *m2 += delta * (v - *mean);
        }
    }

    fn transform(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n as f64;
        x.iter()
            .zip(self.mean.iter().zip(&self.m2))
            .map(|(&v, (&mean, &m2))| {
                let var = if self.n > 1 { m2 / n } else { 0.0 };
                if var > 1e-12 {
                    (v - mean) / var.sqrt()
                } else {
                    v - mean
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    config: MlpConfig,
    dims: usize,
    classes: usize,
    params: Vec<f64>,
    optimizer: OptimizerState,
    scaler: RunningScaler,
}

struct Forward {
    pre: Vec<f64>,
    hidden: Vec<f64>,
    probs: Vec<f64>,
}

impl Mlp {
    pub fn new(config: MlpConfig, dims: usize, classes: usize) -> Self {
        let h = config.hidden;
        let n_params = h * dims + h + classes * h + classes;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut params = vec![0.0; n_params];
        let limit1 = (6.0 / (dims + h) as f64).sqrt();
        for w in &mut params[..h * dims] {
            *w = rng.random_range(-limit1..=limit1);
        }
        let limit2 = (6.0 / (h + classes) as f64).sqrt();
        let w2 = h * dims + h;
        for w in &mut params[w2..w2 + classes * h] {
            *w = rng.random_range(-limit2..=limit2);
        }
        let optimizer = match config.optimizer {
            Optimizer::Sgd => OptimizerState::Sgd,
            Optimizer::Adam => OptimizerState::Adam {
                m: vec![0.0; n_params],
                v: vec![0.0; n_params],
                t: 0,
            },
        };
        Self {
            config,
            dims,
            classes,
            params,
            optimizer,
            scaler: RunningScaler::new(dims),
        }
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn config(&self) -> &MlpConfig {
        &self.config
    }

    pub fn parameters(&self) -> &[f64] {
        &self.params
    }

    pub fn parameters_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn parameter_count(&self) -> usize {
        self.params.len()
    }

    /// Parameter count times eight bytes; Adam triples it for its two moment buffers.
    pub fn size_bytes(&self) -> usize {
        let base = self.params.len() * 8;
        match self.optimizer {
            OptimizerState::Sgd => base,
            OptimizerState::Adam { .. } => base * 3,
        }
    }

    /// Inputs as the network sees them under the current running statistics.
    pub fn standardize(&self, x: &[f64]) -> Vec<f64> {
        self.scaler.transform(x)
    }

    fn activate(&self, z: f64) -> f64 {
        match self.config.activation {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
        }
    }

    fn activation_grad(&self, z: f64, a: f64) -> f64 {
        match self.config.activation {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
        }
    }

    fn forward(&self, x: &[f64]) -> Forward {
        let (d, h, c) = (self.dims, self.config.hidden, self.classes);
        let (w1, rest) = self.params.split_at(h * d);
        let (b1, rest) = rest.split_at(h);
        let (w2, b2) = rest.split_at(c * h);
        let mut pre = Vec::with_capacity(h);
        let mut hidden = Vec::with_capacity(h);
        for j in 0..h {
            let row = &w1[j * d..(j + 1) * d];
            let z = b1[j] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
            pre.push(z);
            hidden.push(self.activate(z));
        }
        let mut logits: Vec<f64> = (0..c)
            .map(|k| {
                b2[k]
                    + w2[k * h..(k + 1) * h]
                        .iter()
                        .zip(&hidden)
                        .map(|(w, a)| w * a)
                        .sum::<f64>()
            })
            .collect();
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for l in &mut logits {
            *l = (*l - max).exp();
            total += *l;
        }
        logits.iter_mut().for_each(|p| *p /= total);
        Forward {
            pre,
            hidden,
            probs: logits,
        }
    }

    /// Softmax cross-entropy of already-standardized input `x`.
    pub fn loss(&self, x: &[f64], label: usize) -> f64 {
        -self.forward(x).probs[label].max(f64::MIN_POSITIVE).ln()
    }

    /// Loss and its gradient with respect to the flat parameter buffer.
    pub fn loss_and_gradient(&self, x: &[f64], label: usize) -> (f64, Vec<f64>) {
        let (d, h, c) = (self.dims, self.config.hidden, self.classes);
        let fw = self.forward(x);
        let loss = -fw.probs[label].max(f64::MIN_POSITIVE).ln();
        let mut grad = vec![0.0; self.params.len()];
        let w2_off = h * d + h;
        let b2_off = w2_off + c * h;
        let mut dhidden = vec![0.0; h];
        for k in 0..c {
            let dlogit = fw.probs[k] - if k == label { 1.0 } else { 0.0 };
            grad[b2_off + k] = dlogit;
            for j in 0..h {
                grad[w2_off + k * h + j] = dlogit * fw.hidden[j];
                dhidden[j] += self.params[w2_off + k * h + j] * dlogit;
            }
        }
        for j in 0..h {
            let dz = dhidden[j] * self.activation_grad(fw.pre[j], fw.hidden[j]);
            grad[h * d + j] = dz;
            for i in 0..d {
                grad[j * d + i] = dz * x[i];
            }
        }
        (loss, grad)
    }

    pub(crate) fn train(&mut self, x: &[f64], label: usize) {
        self.scaler.observe(x);
        let xs = self.scaler.transform(x);
        let (_, grad) = self.loss_and_gradient(&xs, label);
        let lr = self.config.learning_rate;
        match &mut self.optimizer {
            OptimizerState::Sgd => {
                for (p, g) in self.params.iter_mut().zip(&grad) {
                    *p -= lr * g;
                }
            }
            OptimizerState::Adam { m, v, t } => {
                *t += 1;
                let bc1 = 1.0 - BETA1.powi(*t as i32);
                let bc2 = 1.0 - BETA2.powi(*t as i32);
                for (((p, g), m), v) in self
                    .params
                    .iter_mut()
                    .zip(&grad)
                    .zip(m.iter_mut())
                    .zip(v.iter_mut())
                {
                    *m = BETA1 * *m + (1.0 - BETA1) * g;
                    *v = BETA2 * *v + (1.0 - BETA2) * g * g;
                    let m_hat = *m / bc1;
                    let v_hat = *v / bc2;
                    *p -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
                }
            }
        }
    }

    pub(crate) fn score(&self, x: &[f64]) -> ClassScores {
        let xs = self.scaler.transform(x);
        ClassScores::from_unnormalized(self.forward(&xs).probs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::{Learner, LearnerConfig};
    use crate::mdp::Instance;
    use rand::Rng;

    fn net(
        d: usize,
        hidden: usize,
        classes: usize,
        optimizer: Optimizer,
        lr: f64,
        seed: u64,
    ) -> Mlp {
        Mlp::new(
            MlpConfig {
                hidden,
                optimizer,
                learning_rate: lr,
                seed,
                activation: Activation::Relu,
            },
            d,
            classes,
        )
    }

    #[test]
    fn size_formula() {
        assert_eq!(
            net(4, 16, 2, Optimizer::Sgd, 0.1, 0).size_bytes(),
            (4 * 16 + 16 + 16 * 2 + 2) * 8
        );
        assert_eq!(net(4, 16, 2, Optimizer::Sgd, 0.1, 0).size_bytes(), 912);
        assert_eq!(net(4, 16, 2, Optimizer::Adam, 0.1, 0).size_bytes(), 912 * 3);
    }

    #[test]
    fn zero_learning_rate_freezes_weights() {
        for opt in [Optimizer::Sgd, Optimizer::Adam] {
            let mut n = net(3, 5, 2, opt, 0.0, 9);
            let before = n.parameters().to_vec();
            n.train(&[0.3, -2.0, 7.0], 1);
            n.train(&[1.3, 2.0, -7.0], 0);
            assert_eq!(n.parameters(), &before[..]);
        }
    }

    #[test]
    fn untrained_prediction_is_deterministic() {
        let cfg = LearnerConfig::Mlp(MlpConfig {
            hidden: 8,
            seed: 3,
            ..MlpConfig::default()
        });
        let a = Learner::new(&cfg, 4, 3).unwrap();
        let b = Learner::new(&cfg, 4, 3).unwrap();
        let x = [0.1, 0.2, -0.3, 0.4];
        assert_eq!(a.predict(&x).unwrap(), a.predict(&x).unwrap());
        assert_eq!(a.score(&x).unwrap(), b.score(&x).unwrap());
    }

    #[test]
    fn softmax_sums_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for seed in 0..20 {
            let n = net(5, 7, 4, Optimizer::Adam, 0.01, seed);
            let x: Vec<f64> = (0..5).map(|_| rng.random_range(-3.0..3.0)).collect();
            let s = n.score(&x);
            assert!((s.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-6);
            assert!(s.as_slice().iter().all(|p| *p >= 0.0));
        }
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for seed in 0..10 {
            let d = rng.random_range(1..=5);
            let h = rng.random_range(1..=8);
            let c = rng.random_range(2..=4);
            let mut n = net(d, h, c, Optimizer::Sgd, 0.1, seed);
            let x: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
            let y = rng.random_range(0..c);
            let (_, analytic) = n.loss_and_gradient(&x, y);
            let step = 1e-6;
            let mut diff = 0.0;
            let mut norm = 0.0;
            for i in 0..n.parameter_count() {
                let orig = n.params[i];
                n.params[i] = orig + step;
                let up = n.loss(&x, y);
                n.params[i] = orig - step;
                let down = n.loss(&x, y);
                n.params[i] = orig;
                let numeric = (up - down) / (2.0 * step);
                diff += (numeric - analytic[i]).powi(2);
                norm += numeric.abs() + analytic[i].abs();
            }
            assert!(diff.sqrt() / norm.max(1e-12) < 1e-4);
        }
    }

    #[test]
    fn learns_a_linear_concept() {
        let cfg = LearnerConfig::Mlp(MlpConfig {
            hidden: 8,
            learning_rate: 0.01,
            ..MlpConfig::default()
        });
        let mut l = Learner::new(&cfg, 2, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut correct = 0;
        for t in 0..4000 {
            let x = vec![rng.random_range(0.0..100.0), rng.random_range(-1.0..1.0)];
            let y = usize::from(x[0] > 50.0);
            if t >= 3000 && l.predict(&x).unwrap() == y {
                correct += 1;
            }
            l.train(&Instance::new(x, y)).unwrap();
        }
        assert!(correct > 900, "accuracy {correct}/1000");
    }
}
