use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

use super::{StyleLabel, StyleObservation};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Optimizer {
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
    Sgd,
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub optimizer: Optimizer,
    /// Fraction of each class held out for validation.
    pub validation_fraction: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            learning_rate: 1e-3,
            batch_size: 32,
            epochs: 50,
            seed: 0,
            optimizer: Optimizer::default(),
            validation_fraction: 0.2,
        }
    }
}

/// Softmax-regression head over frozen embeddings. Rows of `weights` follow
/// the canonical order of [`StyleLabel::PREDICTED`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearProbe<T> {
    pub weights: Vec<Vec<T>>,
    pub bias: Vec<T>,
}

/// Gradient of the mean cross-entropy with respect to the probe parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient<T> {
    pub weights: Vec<Vec<T>>,
    pub bias: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeMetrics {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedProbe<T> {
    pub probe: LinearProbe<T>,
    pub train: ProbeMetrics,
    pub validation: Option<ProbeMetrics>,
    /// Mean training loss after each epoch.
    pub loss_history: Vec<f64>,
}

const CLASSES: usize = StyleLabel::PREDICTED.len();

fn class_index(label: StyleLabel) -> Option<usize> {
    StyleLabel::PREDICTED.iter().position(|&l| l == label)
}

impl<T: Real> LinearProbe<T> {
    pub fn zeros(dim: usize) -> Self {
        LinearProbe {
            weights: vec![vec![T::zero(); dim]; CLASSES],
            bias: vec![T::zero(); CLASSES],
        }
    }

    pub fn dim(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    fn check_dim(&self, x: &[T]) -> Result<()> {
        if x.len() == self.dim() {
            Ok(())
        } else {
            Err(Error::Invalid(format!(
                "embedding dimension {} does not match probe dimension {}",
                x.len(),
                self.dim()
            )))
        }
    }

    pub fn logits(&self, x: &[T]) -> Result<Vec<T>> {
        self.check_dim(x)?;
        Ok(self
            .weights
            .iter()
            .zip(&self.bias)
            .map(|(w, &b)| w.iter().zip(x).fold(b, |acc, (&wi, &xi)| acc + wi * xi))
            .collect())
    }

    pub fn probabilities(&self, x: &[T]) -> Result<Vec<T>> {
        Ok(softmax(&self.logits(x)?))
    }

    /// Index of the largest logit; the first (canonical) class wins ties.
    pub fn predict_index(&self, x: &[T]) -> Result<usize> {
        Ok(argmax(&self.logits(x)?))
    }

    pub fn predict(&self, x: &[T]) -> Result<StyleLabel> {
        Ok(StyleLabel::PREDICTED[self.predict_index(x)?])
    }

    /// Labels one embedding and attaches the softmax probabilities.
    pub fn classify(&self, image_id: &str, x: &[T]) -> Result<StyleObservation> {
        let logits = self.logits(x)?;
        let probs = softmax(&logits);
        let label = StyleLabel::PREDICTED[argmax(&logits)];
        Ok(StyleObservation {
            image_id: image_id.to_string(),
            label,
            probs: Some(
                StyleLabel::PREDICTED
                    .iter()
                    .zip(&probs)
                    .map(|(&l, &p)| (l, p.as_f64()))
                    .collect(),
            ),
        })
    }

    /// Mean cross-entropy over `(x, class index)` pairs and its gradient.
    pub fn loss_and_gradient(&self, xs: &[&[T]], ys: &[usize]) -> (T, Gradient<T>) {
        let dim = self.dim();
        let mut grad = Gradient {
            weights: vec![vec![T::zero(); dim]; CLASSES],
            bias: vec![T::zero(); CLASSES],
        };
        let mut loss = T::zero();
        for (x, &y) in xs.iter().zip(ys) {
            let logits = self.logits(x).expect("dimension checked by caller");
            let lse = log_sum_exp(&logits);
            loss += lse - logits[y];
            for (k, &z) in logits.iter().enumerate() {
                let delta = (z - lse).exp() - if k == y { T::one() } else { T::zero() };
                grad.bias[k] += delta;
                for (g, &xi) in grad.weights[k].iter_mut().zip(x.iter()) {
                    *g += delta * xi;
                }
            }
        }
        let n = T::of_count(xs.len().max(1));
        for row in &mut grad.weights {
            row.iter_mut().for_each(|g| *g /= n);
        }
        grad.bias.iter_mut().for_each(|g| *g /= n);
        (loss / n, grad)
    }

    pub fn loss(&self, xs: &[&[T]], ys: &[usize]) -> T {
        self.loss_and_gradient(xs, ys).0
    }
}

fn argmax<T: Real>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

fn log_sum_exp<T: Real>(values: &[T]) -> T {
    let max = values.iter().copied().fold(T::neg_infinity(), T::max);
    max + values.iter().map(|&v| (v - max).exp()).sum::<T>().ln()
}

fn softmax<T: Real>(logits: &[T]) -> Vec<T> {
    let lse = log_sum_exp(logits);
    logits.iter().map(|&z| (z - lse).exp()).collect()
}

struct AdamState<T> {
    m_w: Vec<Vec<T>>,
    v_w: Vec<Vec<T>>,
    m_b: Vec<T>,
    v_b: Vec<T>,
    step: i32,
}

fn adam_update<T: Real>(param: &mut T, m: &mut T, v: &mut T, g: T, lr: T, b1: T, b2: T, eps: T, step: i32) {
    *m = b1 * *m + (T::one() - b1) * g;
    *v = b2 * *v + (T::one() - b2) * g * g;
    let m_hat = *m / (T::one() - b1.powi(step));
    let v_hat = *v / (T::one() - b2.powi(step));
    *param -= lr * m_hat / (v_hat.sqrt() + eps);
}

/// Trains a probe on labeled embeddings with zero-initialized parameters.
///
/// Each class is split into train/validation by `validation_fraction` using a
/// seeded shuffle; mini-batches are reshuffled every epoch from the same seed.
pub fn train_linear_probe<T: Real>(
    vectors: &[Vec<T>],
    labels: &[StyleLabel],
    config: &ProbeConfig,
) -> Result<TrainedProbe<T>> {
    if vectors.len() != labels.len() {
        return Err(Error::Invalid(format!(
            "{} vectors but {} labels",
            vectors.len(),
            labels.len()
        )));
    }
    if config.batch_size == 0 || config.epochs == 0 {
        return Err(Error::Invalid("batch size and epochs must be positive".into()));
    }
    if !(0.0..1.0).contains(&config.validation_fraction) {
        return Err(Error::Invalid("validation fraction must lie in [0, 1)".into()));
    }
    let dim = vectors.first().map_or(0, Vec::len);
    if dim == 0 {
        return Err(Error::Invalid("no training vectors".into()));
    }
    if let Some(bad) = vectors.iter().position(|v| v.len() != dim) {
        return Err(Error::Invalid(format!(
            "vector {bad} has dimension {}, expected {dim}",
            vectors[bad].len()
        )));
    }
    let ys: Vec<usize> = labels
        .iter()
        .map(|&l| class_index(l).ok_or_else(|| Error::Invalid(format!("{l} is not a trainable class"))))
        .collect::<Result<_>>()?;

    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); CLASSES];
    for (i, &y) in ys.iter().enumerate() {
        by_class[y].push(i);
    }
    if let Some(absent) = by_class.iter().position(Vec::is_empty) {
        return Err(Error::Invalid(format!(
            "class {} has no training examples",
            StyleLabel::PREDICTED[absent]
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut train_idx = Vec::new();
    let mut val_idx = Vec::new();
    for members in &mut by_class {
        members.shuffle(&mut rng);
        let held = ((members.len() as f64) * config.validation_fraction).floor() as usize;
        let held = held.min(members.len() - 1);
        val_idx.extend_from_slice(&members[..held]);
        train_idx.extend_from_slice(&members[held..]);
    }
    train_idx.sort_unstable();
    val_idx.sort_unstable();

    let mut probe = LinearProbe::<T>::zeros(dim);
    let mut adam = AdamState {
        m_w: vec![vec![T::zero(); dim]; CLASSES],
        v_w: vec![vec![T::zero(); dim]; CLASSES],
        m_b: vec![T::zero(); CLASSES],
        v_b: vec![T::zero(); CLASSES],
        step: 0,
    };
    let lr = T::of(config.learning_rate);
    let train_x: Vec<&[T]> = train_idx.iter().map(|&i| vectors[i].as_slice()).collect();
    let train_y: Vec<usize> = train_idx.iter().map(|&i| ys[i]).collect();

    let mut order: Vec<usize> = (0..train_idx.len()).collect();
    let mut loss_history = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            let xs: Vec<&[T]> = batch.iter().map(|&i| train_x[i]).collect();
            let bys: Vec<usize> = batch.iter().map(|&i| train_y[i]).collect();
            let (_, grad) = probe.loss_and_gradient(&xs, &bys);
            match config.optimizer {
                Optimizer::Sgd => {
                    for (row, grow) in probe.weights.iter_mut().zip(&grad.weights) {
                        for (w, &g) in row.iter_mut().zip(grow) {
                            *w -= lr * g;
                        }
                    }
                    for (b, &g) in probe.bias.iter_mut().zip(&grad.bias) {
                        *b -= lr * g;
                    }
                }
                Optimizer::Adam { beta1, beta2, epsilon } => {
                    adam.step += 1;
                    let (b1, b2, eps) = (T::of(beta1), T::of(beta2), T::of(epsilon));
                    for k in 0..CLASSES {
                        for j in 0..dim {
                            adam_update(
                                &mut probe.weights[k][j],
                                &mut adam.m_w[k][j],
                                &mut adam.v_w[k][j],
                                grad.weights[k][j],
                                lr,
                                b1,
                                b2,
                                eps,
                                adam.step,
                            );
                        }
                        adam_update(
                            &mut probe.bias[k],
                            &mut adam.m_b[k],
                            &mut adam.v_b[k],
                            grad.bias[k],
                            lr,
                            b1,
                            b2,
                            eps,
                            adam.step,
                        );
                    }
                }
            }
        }
        loss_history.push(probe.loss(&train_x, &train_y).as_f64());
    }

    let train = evaluate(&probe, &train_x, &train_y);
    let validation = (!val_idx.is_empty()).then(|| {
        let xs: Vec<&[T]> = val_idx.iter().map(|&i| vectors[i].as_slice()).collect();
        let ys: Vec<usize> = val_idx.iter().map(|&i| ys[i]).collect();
        evaluate(&probe, &xs, &ys)
    });
    Ok(TrainedProbe {
        probe,
        train,
        validation,
        loss_history,
    })
}

fn evaluate<T: Real>(probe: &LinearProbe<T>, xs: &[&[T]], ys: &[usize]) -> ProbeMetrics {
    let predicted: Vec<usize> = xs
        .iter()
        .map(|x| probe.predict_index(x).expect("dimension checked"))
        .collect();
    let correct = predicted.iter().zip(ys).filter(|(p, y)| p == y).count();
    ProbeMetrics {
        accuracy: correct as f64 / ys.len().max(1) as f64,
        macro_f1: macro_f1(&predicted, ys),
        n: ys.len(),
    }
}

/// Macro-averaged F1 over classes present in either the truth or the
/// predictions.
fn macro_f1(predicted: &[usize], truth: &[usize]) -> f64 {
    let mut tally: BTreeMap<usize, (usize, usize, usize)> = BTreeMap::new();
    for (&p, &t) in predicted.iter().zip(truth) {
        if p == t {
            tally.entry(t).or_default().0 += 1;
        } else {
            tally.entry(p).or_default().1 += 1;
            tally.entry(t).or_default().2 += 1;
        }
    }
    if tally.is_empty() {
        return 0.0;
    }
    let f1s = tally.values().map(|&(tp, fp, fne)| {
        let denom = 2 * tp + fp + fne;
        if denom == 0 {
            0.0
        } else {
            2.0 * tp as f64 / denom as f64
        }
    });
    f1s.sum::<f64>() / tally.len() as f64
}
