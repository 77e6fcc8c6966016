//! Label-only and demographics-only reference classifiers.

use rand::distr::weighted::WeightedIndex;
use rand::distr::{Distribution, Uniform};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::corpus::{ClassLabel, Demographics, Gender, NUM_CLASSES};
use crate::ensemble::softmax;

/// I.i.d. draws from the empirical class distribution of `train_labels`.
pub fn random_baseline(train_labels: &[ClassLabel], test_size: usize, seed: u64) -> Result<Vec<ClassLabel>, EvalError> {
    if train_labels.is_empty() {
        return Err(EvalError::EmptyTraining);
    }
    let mut counts = [0usize; NUM_CLASSES];
    train_labels.iter().for_each(|l| counts[l.index()] += 1);
    let dist = WeightedIndex::new(counts).expect("at least one positive count");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..test_size)
        .map(|_| ClassLabel::ALL[dist.sample(&mut rng)])
        .collect())
}

/// Decade bins: 18–29, 30–39, 40–49, 50+.
pub fn age_bin(age_years: u32) -> usize {
    match age_years {
        0..=29 => 0,
        30..=39 => 1,
        40..=49 => 2,
        _ => 3,
    }
}

/// Features: one-hot gender, one-hot diagnosis (diagnoses seen in training;
/// an unseen diagnosis encodes as all zeros) and the z-scored age bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemographicEncoder {
    pub diagnoses: Vec<String>,
    pub age_mean: f64,
    pub age_std: f64,
}

impl DemographicEncoder {
    pub fn fit(train: &[&Demographics]) -> Result<DemographicEncoder, EvalError> {
        if train.is_empty() {
            return Err(EvalError::EmptyTraining);
        }
        let mut diagnoses: Vec<String> = train.iter().map(|d| d.diagnosis.clone()).collect();
        diagnoses.sort();
        diagnoses.dedup();
        let bins: Vec<f64> = train.iter().map(|d| age_bin(d.age_years) as f64).collect();
        let n = bins.len() as f64;
        let age_mean = bins.iter().sum::<f64>() / n;
        let std = (bins.iter().map(|b| (b - age_mean).powi(2)).sum::<f64>() / n).sqrt();
        Ok(DemographicEncoder {
            diagnoses,
            age_mean,
            age_std: if std > 0.0 { std } else { 1.0 },
        })
    }

    pub fn width(&self) -> usize {
        2 + self.diagnoses.len() + 1
    }

    pub fn encode(&self, d: &Demographics) -> Vec<f64> {
        let mut x = vec![0.0; self.width()];
        x[if d.gender == Gender::Male { 0 } else { 1 }] = 1.0;
        if let Ok(i) = self.diagnoses.binary_search(&d.diagnosis) {
            x[2 + i] = 1.0;
        }
        x[self.width() - 1] = (age_bin(d.age_years) as f64 - self.age_mean) / self.age_std;
        x
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpConfig {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub adam: AdamConfig,
    /// Minibatch size, reshuffled every epoch. `None` trains full-batch
    /// (one step per epoch), which at this learning rate underfits in 30 epochs.
    pub batch_size: Option<usize>,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            hidden: vec![64, 32],
            epochs: 30,
            adam: AdamConfig::default(),
            batch_size: Some(8),
        }
    }
}

/// Fully connected ReLU network with a softmax output. Parameters live in one
/// flat vector: per layer, an `out × in` row-major weight block then the bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub sizes: Vec<usize>,
    pub params: Vec<f64>,
}

/// Gradient in the same layout as [`Mlp::params`].
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGradients(pub Vec<f64>);

impl Mlp {
    /// He-uniform weights, zero biases.
    pub fn new(sizes: Vec<usize>, rng: &mut ChaCha8Rng) -> Mlp {
        let mut params = Vec::new();
        for w in sizes.windows(2) {
            let (n_in, n_out) = (w[0], w[1]);
            let bound = (6.0 / n_in.max(1) as f64).sqrt();
            let u = Uniform::new_inclusive(-bound, bound).expect("finite bound");
            params.extend((0..n_in * n_out).map(|_| u.sample(rng)));
            params.extend(std::iter::repeat_n(0.0, n_out));
        }
        Mlp { sizes, params }
    }

    fn offsets(&self) -> Vec<(usize, usize, usize, usize)> {
        let mut out = Vec::new();
        let mut off = 0;
        for w in self.sizes.windows(2) {
            let (n_in, n_out) = (w[0], w[1]);
            out.push((off, off + n_in * n_out, n_in, n_out));
            off += n_in * n_out + n_out;
        }
        out
    }

    /// Pre-activations of every layer.
    fn forward(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let layers = self.offsets();
        let mut zs = Vec::with_capacity(layers.len());
        let mut a = x.to_vec();
        for (l, &(w, b, n_in, n_out)) in layers.iter().enumerate() {
            let z: Vec<f64> = (0..n_out)
                .map(|o| {
                    self.params[b + o]
                        + self.params[w + o * n_in..w + (o + 1) * n_in]
                            .iter()
                            .zip(&a)
                            .map(|(p, x)| p * x)
                            .sum::<f64>()
                })
                .collect();
            if l + 1 < layers.len() {
                a = z.iter().map(|v| v.max(0.0)).collect();
            }
            zs.push(z);
        }
        zs
    }

    pub fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        softmax(self.forward(x).last().expect("at least one layer"))
    }

    /// Mean cross-entropy and its gradient.
    pub fn loss_and_gradients(&self, xs: &[Vec<f64>], ys: &[usize]) -> (f64, MlpGradients) {
        let layers = self.offsets();
        let mut grad = vec![0.0; self.params.len()];
        let mut loss = 0.0;
        let n = xs.len() as f64;
        for (x, &y) in xs.iter().zip(ys) {
            let zs = self.forward(x);
            let p = softmax(zs.last().expect("at least one layer"));
            loss -= p[y].max(1e-300).ln();
            let mut delta: Vec<f64> = p.iter().enumerate().map(|(c, pc)| pc - if c == y { 1.0 } else { 0.0 }).collect();
            for l in (0..layers.len()).rev() {
                let (w, b, n_in, n_out) = layers[l];
                let input: Vec<f64> = if l == 0 {
                    x.clone()
                } else {
                    zs[l - 1].iter().map(|v| v.max(0.0)).collect()
                };
                for o in 0..n_out {
                    grad[b + o] += delta[o] / n;
                    for i in 0..n_in {
                        grad[w + o * n_in + i] += delta[o] * input[i] / n;
                    }
                }
                if l > 0 {
                    delta = (0..n_in)
                        .map(|i| {
                            if zs[l - 1][i] <= 0.0 {
                                return 0.0;
                            }
                            (0..n_out).map(|o| self.params[w + o * n_in + i] * delta[o]).sum()
                        })
                        .collect();
                }
            }
        }
        (loss / n, MlpGradients(grad))
    }
}

struct Adam {
    config: AdamConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn new(config: AdamConfig, n: usize) -> Adam {
        Adam {
            config,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        self.t += 1;
        let c1 = 1.0 - beta1.powi(self.t);
        let c2 = 1.0 - beta2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * grad[i];
            self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * grad[i] * grad[i];
            params[i] -= learning_rate * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + epsilon);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemographicModel {
    pub encoder: DemographicEncoder,
    pub mlp: Mlp,
    /// Mean training loss after each epoch.
    pub loss_history: Vec<f64>,
}

impl DemographicModel {
    pub fn fit(
        train: &[(Demographics, ClassLabel)],
        config: &MlpConfig,
        seed: u64,
    ) -> Result<DemographicModel, EvalError> {
        let demos: Vec<&Demographics> = train.iter().map(|(d, _)| d).collect();
        let encoder = DemographicEncoder::fit(&demos)?;
        let xs: Vec<Vec<f64>> = demos.iter().map(|d| encoder.encode(d)).collect();
        let ys: Vec<usize> = train.iter().map(|(_, y)| y.index()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sizes = vec![encoder.width()];
        sizes.extend(&config.hidden);
        sizes.push(NUM_CLASSES);
        let mut mlp = Mlp::new(sizes, &mut rng);
        let mut adam = Adam::new(config.adam, mlp.params.len());
        let mut order: Vec<usize> = (0..xs.len()).collect();
        let batch = config.batch_size.unwrap_or(xs.len()).clamp(1, xs.len());
        let mut loss_history = Vec::with_capacity(config.epochs);
        for _ in 0..config.epochs {
            if batch < xs.len() {
                order.shuffle(&mut rng);
            }
            for idx in order.chunks(batch) {
                let bx: Vec<Vec<f64>> = idx.iter().map(|&i| xs[i].clone()).collect();
                let by: Vec<usize> = idx.iter().map(|&i| ys[i]).collect();
                let (_, g) = mlp.loss_and_gradients(&bx, &by);
                adam.step(&mut mlp.params, &g.0);
            }
            loss_history.push(mlp.loss_and_gradients(&xs, &ys).0);
        }
        Ok(DemographicModel {
            encoder,
            mlp,
            loss_history,
        })
    }

    pub fn predict(&self, demographics: &[Demographics]) -> Vec<ClassLabel> {
        demographics
            .iter()
            .map(|d| {
                let p = self.mlp.predict_proba(&self.encoder.encode(d));
                let best = (1..p.len()).fold(0, |b, i| if p[i] > p[b] { i } else { b });
                ClassLabel::ALL[best]
            })
            .collect()
    }

    pub fn accuracy(&self, data: &[(Demographics, ClassLabel)]) -> f64 {
        let demos: Vec<Demographics> = data.iter().map(|(d, _)| d.clone()).collect();
        let hits = self
            .predict(&demos)
            .iter()
            .zip(data)
            .filter(|(p, (_, y))| *p == y)
            .count();
        hits as f64 / data.len().max(1) as f64
    }
}

/// Trains on `train` and predicts `test`.
pub fn demographic_baseline(
    train: &[(Demographics, ClassLabel)],
    test: &[Demographics],
    config: &MlpConfig,
    seed: u64,
) -> Result<Vec<ClassLabel>, EvalError> {
    Ok(DemographicModel::fit(train, config, seed)?.predict(test))
}
