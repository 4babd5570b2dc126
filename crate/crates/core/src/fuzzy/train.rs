use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{FeatureMatrix, FuzzyModel, ModelDims};
use crate::error::{Error, Result};
use crate::rng;

/// Samples per gradient chunk. Chunk sums are added in index order, so the
/// result does not depend on how rayon schedules the chunks.
const GRAD_CHUNK: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs_max: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub rules: usize,
    pub d_query: usize,
    pub d_value: usize,
    pub d_hidden: usize,
    /// Stop once an epoch's mean training loss falls below this value.
    pub stop_loss: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs_max: 100,
            lr: 1e-3,
            weight_decay: 0.01,
            beta1: 0.9,
            beta2: 0.95,
            eps: 1e-8,
            batch_size: 64,
            seed: 0,
            rules: 5,
            d_query: 32,
            d_value: 32,
            d_hidden: 128,
            stop_loss: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.epochs_max > 0
            && self.lr >= 0.0
            && self.weight_decay >= 0.0
            && self.beta1 > 0.0
            && self.beta1 < 1.0
            && self.beta2 > 0.0
            && self.beta2 < 1.0
            && self.eps > 0.0
            && self.batch_size > 0
            && self.rules > 0
            && self.d_query > 0
            && self.d_value > 0
            && self.d_hidden > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("bad training config: {self:?}")))
        }
    }

    pub fn dims(&self, d_in: usize, n_classes: usize) -> ModelDims {
        ModelDims {
            d_in,
            d_query: self.d_query,
            d_value: self.d_value,
            d_hidden: self.d_hidden,
            n_rules: self.rules,
            n_classes,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: FuzzyModel,
    /// Mean cross-entropy of each epoch, measured during that epoch.
    pub loss_curve: Vec<f64>,
}

/// Inverse RMS of all feature values, so the scaled tokens have unit power.
pub fn input_scale_for(data: &[(FeatureMatrix, usize)]) -> f64 {
    let (sum, n) = data.iter().fold((0.0, 0usize), |(s, n), (x, _)| {
        (
            s + x.data().iter().map(|v| v * v).sum::<f64>(),
            n + x.data().len(),
        )
    });
    let rms = (sum / n.max(1) as f64).sqrt();
    if rms > 0.0 && rms.is_finite() {
        1.0 / rms
    } else {
        1.0
    }
}

struct AdamW {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl AdamW {
    fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], cfg: &TrainConfig) {
        self.t += 1;
        let bc1 = 1.0 - cfg.beta1.powi(self.t);
        let bc2 = 1.0 - cfg.beta2.powi(self.t);
        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grad)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            *p -= cfg.lr * cfg.weight_decay * *p;
            *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
            *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
            let denom = (*v / bc2).sqrt() + cfg.eps;
            *p -= cfg.lr * (*m / bc1) / denom;
        }
    }
}

/// Sum of per-sample gradients and losses over `batch`.
fn batch_gradient(
    model: &FuzzyModel,
    data: &[(FeatureMatrix, usize)],
    batch: &[usize],
) -> Result<(Vec<f64>, f64)> {
    let n = model.params.len();
    let partial: Vec<Result<(Vec<f64>, f64)>> = batch
        .par_chunks(GRAD_CHUNK)
        .map(|chunk| {
            let mut g = vec![0.0; n];
            let mut loss = 0.0;
            for &i in chunk {
                let (x, y) = &data[i];
                loss += model.loss_and_grad(x, *y, &mut g)?;
            }
            Ok((g, loss))
        })
        .collect();
    let mut grad = vec![0.0; n];
    let mut loss = 0.0;
    for part in partial {
        let (g, l) = part?;
        grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
        loss += l;
    }
    Ok((grad, loss))
}

/// Mini-batch AdamW on cross-entropy, starting from `FuzzyModel::init`.
pub fn train(
    data: &[(FeatureMatrix, usize)],
    n_classes: usize,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let first = data
        .first()
        .ok_or_else(|| Error::invalid("empty training set"))?;
    let d_in = first.0.n_cols();
    if data.iter().any(|(x, _)| x.n_cols() != d_in) {
        return Err(Error::Dimension(
            "training samples differ in token length".into(),
        ));
    }
    if let Some((_, y)) = data.iter().find(|(_, y)| *y >= n_classes) {
        return Err(Error::invalid(format!(
            "label {y} outside {n_classes} classes"
        )));
    }
    let mut seen = vec![false; n_classes];
    data.iter().for_each(|(_, y)| seen[*y] = true);
    if seen.iter().filter(|s| **s).count() < 2 {
        return Err(Error::invalid("training set covers fewer than two classes"));
    }
    if cfg.batch_size > data.len() {
        return Err(Error::invalid(format!(
            "batch size {} exceeds {} training samples",
            cfg.batch_size,
            data.len()
        )));
    }

    let mut model = FuzzyModel::init(cfg.dims(d_in, n_classes), cfg.seed)?;
    model.input_scale = input_scale_for(data);
    let mut opt = AdamW::new(model.params.len());
    let mut shuffle = rng::stream("fuzzy-shuffle", cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut loss_curve = Vec::with_capacity(cfg.epochs_max);

    for epoch in 1..=cfg.epochs_max {
        order.shuffle(&mut shuffle);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let (mut grad, loss) = batch_gradient(&model, data, batch)?;
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Diverged { epoch, loss });
            }
            let inv = 1.0 / batch.len() as f64;
            grad.iter_mut().for_each(|g| *g *= inv);
            opt.step(&mut model.params, &grad, cfg);
            total += loss;
        }
        let mean = total / data.len() as f64;
        if model.params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Diverged { epoch, loss: mean });
        }
        log::debug!("epoch {epoch}: loss {mean:.6}");
        loss_curve.push(mean);
        if cfg.stop_loss.is_some_and(|s| mean < s) {
            break;
        }
    }
    Ok(TrainOutcome { model, loss_curve })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    /// Two classes whose tokens differ by a shifted bump.
    fn separable(n_per_class: usize, seed: u64) -> Vec<(FeatureMatrix, usize)> {
        let mut rng = rng::stream("test-data", seed);
        let mut out = Vec::new();
        for i in 0..2 * n_per_class {
            let class = i % 2;
            let data: Vec<f64> = (0..2 * 12)
                .map(|k| {
                    let col = k % 12;
                    let bump = if col == 3 + 5 * class { 4.0 } else { 0.0 };
                    bump + rng.random_range(-0.5..0.5)
                })
                .collect();
            out.push((
                FeatureMatrix::new(data, 2, 12, (0..12).map(|c| c as f64).collect()).unwrap(),
                class,
            ));
        }
        out
    }

    fn small_cfg() -> TrainConfig {
        TrainConfig {
            batch_size: 8,
            rules: 3,
            d_query: 8,
            d_value: 8,
            d_hidden: 16,
            seed: 7,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn separable_problem_is_learned() {
        let data = separable(20, 1);
        let out = train(&data, 2, &small_cfg()).unwrap();
        let correct = data
            .iter()
            .filter(|(x, y)| out.model.predict(x).unwrap().class_index == *y)
            .count();
        assert_eq!(correct, data.len());
        assert_eq!(out.loss_curve.len(), 100);
        assert!(out.loss_curve[99] < out.loss_curve[0]);
    }

    #[test]
    fn same_seed_same_curve() {
        let data = separable(10, 2);
        let cfg = TrainConfig {
            epochs_max: 5,
            ..small_cfg()
        };
        let a = train(&data, 2, &cfg).unwrap();
        let b = train(&data, 2, &cfg).unwrap();
        assert_eq!(a.loss_curve, b.loss_curve);
        assert_eq!(a.model, b.model);
    }

    #[test]
    fn zero_lr_keeps_parameters() {
        let data = separable(10, 3);
        let cfg = TrainConfig {
            epochs_max: 3,
            lr: 0.0,
            weight_decay: 0.0,
            ..small_cfg()
        };
        let out = train(&data, 2, &cfg).unwrap();
        let init = FuzzyModel::init(cfg.dims(12, 2), cfg.seed).unwrap();
        assert_eq!(out.model.params, init.params);
    }

    #[test]
    fn diverging_run_is_reported() {
        let data = separable(10, 4);
        let cfg = TrainConfig {
            lr: 1e300,
            epochs_max: 5,
            ..small_cfg()
        };
        assert!(matches!(train(&data, 2, &cfg), Err(Error::Diverged { .. })));
    }

    #[test]
    fn bad_inputs_are_rejected() {
        let data = separable(4, 5);
        let one_class: Vec<_> = data.iter().filter(|(_, y)| *y == 0).cloned().collect();
        assert!(train(&one_class, 2, &small_cfg()).is_err());
        let cfg = TrainConfig {
            batch_size: 100,
            ..small_cfg()
        };
        assert!(train(&data, 2, &cfg).is_err());
    }
}
