use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::LinearSoftmax;
use crate::error::{Error, Result};
use crate::harness::Dataset;
use crate::noise::NoiseModel;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Initial rate; annealed to zero along a half cosine.
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            learning_rate: 0.5,
            batch_size: 64,
            seed: 0,
        }
    }
}

/// Training provenance persisted with a model.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingMeta {
    pub epochs: usize,
    pub learning_rate: f64,
    pub schedule: String,
    pub batch_size: usize,
    pub seed: u64,
    pub data: String,
}

impl TrainingMeta {
    pub fn new(cfg: &TrainConfig, data: &Dataset) -> Self {
        Self {
            epochs: cfg.epochs,
            learning_rate: cfg.learning_rate,
            schedule: "cosine".to_string(),
            batch_size: cfg.batch_size,
            seed: cfg.seed,
            data: data.provenance.clone(),
        }
    }
}

fn cosine_rate(initial: f64, epoch: usize, epochs: usize) -> f64 {
    initial * 0.5 * (1.0 + (PI * epoch as f64 / epochs as f64).cos())
}

fn check_noise(data: &Dataset, noise: &NoiseModel) -> Result<()> {
    match noise {
        NoiseModel::Dssn(spec) if spec.dim() != data.d || spec.q() != data.q => Err(Error::Argument(format!(
            "dataset has (d={}, q={}) but the noise spec has (d={}, q={})",
            data.d,
            data.q,
            spec.dim(),
            spec.q()
        ))),
        NoiseModel::IndependentSsn { q, .. } if *q != data.q => Err(Error::Argument(format!(
            "dataset has q={} but the noise has q={q}",
            data.q
        ))),
        _ => Ok(()),
    }
}

/// Cross-entropy minibatch SGD on noisy copies of the training points.
///
/// Every sample gets a fresh noise draw each epoch (for DSSN, a fresh base
/// split). Starts from all-zero weights; the result is a pure function of
/// `(data, noise, cfg)`.
pub fn train_linear(data: &Dataset, noise: &NoiseModel, cfg: &TrainConfig) -> Result<LinearSoftmax> {
    check_noise(data, noise)?;
    if cfg.batch_size == 0 {
        return Err(Error::Argument("batch size must be positive".into()));
    }
    if !(cfg.learning_rate.is_finite() && cfg.learning_rate >= 0.0) {
        return Err(Error::Argument("learning rate must be finite and non-negative".into()));
    }
    let d = data.d;
    let k = data.classes.len();
    let mut model = LinearSoftmax::zeros(d, k);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut grad_w = vec![0.0; d * k];
    let mut grad_b = vec![0.0; k];
    let mut probs = vec![0.0; k];

    for epoch in 0..cfg.epochs {
        let lr = cosine_rate(cfg.learning_rate, epoch, cfg.epochs);
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            grad_w.iter_mut().for_each(|g| *g = 0.0);
            grad_b.iter_mut().for_each(|g| *g = 0.0);
            for &i in batch {
                let x = noise.sample(&mut rng, &data.points[i]);
                model.logits_into(&x, &mut probs);
                let max = probs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let mut z = 0.0;
                for p in probs.iter_mut() {
                    *p = (*p - max).exp();
                    z += *p;
                }
                for (c, p) in probs.iter_mut().enumerate() {
                    *p /= z;
                    if c == data.labels[i] {
                        *p -= 1.0;
                    }
                    grad_b[c] += *p;
                    let row = &mut grad_w[c * d..(c + 1) * d];
                    for (g, v) in row.iter_mut().zip(&x) {
                        *g += *p * v;
                    }
                }
            }
            let step = lr / batch.len() as f64;
            let (w, b) = model.weights_mut();
            for (wi, g) in w.iter_mut().zip(&grad_w) {
                *wi -= step * g;
            }
            for (bi, g) in b.iter_mut().zip(&grad_b) {
                *bi -= step * g;
            }
        }
    }
    Ok(model)
}
