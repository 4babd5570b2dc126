use std::ops::Range;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::FeatureMatrix;
use crate::error::{Error, Result};
use crate::rng;

/// Modified-Laplace membership `exp(−λ |x − m|)`.
pub fn membership(x: f64, m: f64, lambda: f64) -> f64 {
    (-lambda * (x - m).abs()).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    /// Token length (frequency bins).
    pub d_in: usize,
    /// Query / rule-center dimension.
    pub d_query: usize,
    pub d_value: usize,
    pub d_hidden: usize,
    pub n_rules: usize,
    pub n_classes: usize,
}

impl ModelDims {
    pub fn new(d_in: usize, n_rules: usize, n_classes: usize) -> Self {
        Self {
            d_in,
            d_query: 32,
            d_value: 32,
            d_hidden: 128,
            n_rules,
            n_classes,
        }
    }

    fn validate(&self) -> Result<()> {
        let all = [
            self.d_in,
            self.d_query,
            self.d_value,
            self.d_hidden,
            self.n_rules,
            self.n_classes,
        ];
        if all.contains(&0) {
            return Err(Error::invalid(format!(
                "model dimensions must be positive: {self:?}"
            )));
        }
        Ok(())
    }
}

/// Trainable parameter blocks, in storage order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamGroup {
    /// `n_rules × d_query`
    Centers,
    /// `d_query`; λ = exp(log_lambda), shared across rules.
    LogLambda,
    /// `d_in × d_query`
    Query,
    /// `n_rules × d_in × d_value`
    Value,
    /// `d_value × d_hidden`
    Hidden,
    HiddenBias,
    /// `d_hidden × n_classes`
    Output,
    OutputBias,
}

impl ParamGroup {
    pub const ALL: [ParamGroup; 8] = [
        ParamGroup::Centers,
        ParamGroup::LogLambda,
        ParamGroup::Query,
        ParamGroup::Value,
        ParamGroup::Hidden,
        ParamGroup::HiddenBias,
        ParamGroup::Output,
        ParamGroup::OutputBias,
    ];

    fn len(self, d: &ModelDims) -> usize {
        match self {
            ParamGroup::Centers => d.n_rules * d.d_query,
            ParamGroup::LogLambda => d.d_query,
            ParamGroup::Query => d.d_in * d.d_query,
            ParamGroup::Value => d.n_rules * d.d_in * d.d_value,
            ParamGroup::Hidden => d.d_value * d.d_hidden,
            ParamGroup::HiddenBias => d.d_hidden,
            ParamGroup::Output => d.d_hidden * d.n_classes,
            ParamGroup::OutputBias => d.n_classes,
        }
    }
}

/// Class decision with its softmax confidence and the raw logits.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub class_index: usize,
    pub confidence: f64,
    pub logits: Vec<f64>,
}

impl Prediction {
    /// Argmax with ties to the lowest index.
    pub fn from_logits(logits: Vec<f64>) -> Self {
        let mut best = 0;
        for (i, v) in logits.iter().enumerate() {
            if *v > logits[best] {
                best = i;
            }
        }
        let max = logits[best];
        let denom: f64 = logits.iter().map(|v| (v - max).exp()).sum();
        Self {
            class_index: best,
            confidence: 1.0 / denom,
            logits,
        }
    }
}

/// All decoder parameters in one flat vector, plus the fixed scale applied
/// to input features.
#[derive(Debug, Clone, PartialEq)]
pub struct FuzzyModel {
    pub dims: ModelDims,
    pub params: Vec<f64>,
    pub input_scale: f64,
}

/// Intermediate values of one forward pass.
pub(crate) struct Cache {
    pub(crate) x: Vec<f64>,
    pub(crate) q: Vec<f64>,
    pub(crate) log_fire: Vec<f64>,
    pub(crate) pooled: Vec<f64>,
    pub(crate) y: Vec<f64>,
    pub(crate) pre: Vec<f64>,
    pub(crate) hidden: Vec<f64>,
    pub(crate) logits: Vec<f64>,
    pub(crate) n_tokens: usize,
}

fn log_softmax_in_place(v: &mut [f64]) {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
    v.iter_mut().for_each(|x| *x -= lse);
}

impl FuzzyModel {
    /// Centers ~ N(0, 0.1²), log λ = 0, projections U(±1/√fan_in), biases 0.
    pub fn init(dims: ModelDims, seed: u64) -> Result<Self> {
        dims.validate()?;
        let mut rng = rng::stream("fuzzy-init", seed);
        let total: usize = ParamGroup::ALL.iter().map(|g| g.len(&dims)).sum();
        let mut model = Self {
            dims,
            params: vec![0.0; total],
            input_scale: 1.0,
        };
        let normal = Normal::new(0.0, 0.1).expect("valid sigma");
        for v in model.group_mut(ParamGroup::Centers) {
            *v = normal.sample(&mut rng);
        }
        let fan_in = [
            (ParamGroup::Query, dims.d_in),
            (ParamGroup::Value, dims.d_in),
            (ParamGroup::Hidden, dims.d_value),
            (ParamGroup::Output, dims.d_hidden),
        ];
        for (group, fan) in fan_in {
            let bound = 1.0 / (fan as f64).sqrt();
            for v in model.group_mut(group) {
                *v = rng.random_range(-bound..bound);
            }
        }
        Ok(model)
    }

    pub fn from_params(dims: ModelDims, params: Vec<f64>, input_scale: f64) -> Result<Self> {
        dims.validate()?;
        let total: usize = ParamGroup::ALL.iter().map(|g| g.len(&dims)).sum();
        if params.len() != total {
            return Err(Error::Dimension(format!(
                "{} parameters, expected {total}",
                params.len()
            )));
        }
        if params.iter().any(|v| !v.is_finite()) || !input_scale.is_finite() {
            return Err(Error::NonFinite("model parameters"));
        }
        Ok(Self {
            dims,
            params,
            input_scale,
        })
    }

    pub fn group_range(&self, group: ParamGroup) -> Range<usize> {
        let mut start = 0;
        for g in ParamGroup::ALL {
            let len = g.len(&self.dims);
            if g == group {
                return start..start + len;
            }
            start += len;
        }
        unreachable!("every group is listed in ALL")
    }

    pub fn group(&self, group: ParamGroup) -> &[f64] {
        &self.params[self.group_range(group)]
    }

    pub fn group_mut(&mut self, group: ParamGroup) -> &mut [f64] {
        let r = self.group_range(group);
        &mut self.params[r]
    }

    pub fn lambdas(&self) -> Vec<f64> {
        self.group(ParamGroup::LogLambda)
            .iter()
            .map(|v| v.exp())
            .collect()
    }

    /// Rounds every parameter to single precision, matching what a
    /// checkpoint stores.
    pub fn round_to_f32(&mut self) {
        self.params.iter_mut().for_each(|v| *v = *v as f32 as f64);
        self.input_scale = self.input_scale as f32 as f64;
    }

    fn check_input(&self, x: &FeatureMatrix) -> Result<()> {
        if x.n_cols() != self.dims.d_in {
            return Err(Error::Dimension(format!(
                "tokens of length {}, model expects {}",
                x.n_cols(),
                self.dims.d_in
            )));
        }
        Ok(())
    }

    /// Query projection `q_i = W_Q^T x_i` of every (scaled) token.
    fn queries(&self, x: &[f64], n_tokens: usize) -> Vec<f64> {
        let ModelDims { d_in, d_query, .. } = self.dims;
        let w = self.group(ParamGroup::Query);
        let mut q = vec![0.0; n_tokens * d_query];
        for i in 0..n_tokens {
            let qi = &mut q[i * d_query..(i + 1) * d_query];
            for (k, xv) in x[i * d_in..(i + 1) * d_in].iter().enumerate() {
                if *xv == 0.0 {
                    continue;
                }
                for (qd, wd) in qi.iter_mut().zip(&w[k * d_query..(k + 1) * d_query]) {
                    *qd += xv * wd;
                }
            }
        }
        q
    }

    /// Rule logits `−Σ_d λ_d |q_id − m_rd|`, `n_tokens × n_rules`, shifted
    /// per token by the rule-0 logit. Only softmax-normalised values are
    /// used downstream, so the shift is free; it lets each term be formed
    /// as `|q − m_r| − |q − m_0|`, which is exactly `±(m_0 − m_r)` when
    /// both differences share a sign. A query outside every center in a
    /// dimension then has no rounding-level effect on the firing.
    fn rule_logits(&self, q: &[f64], n_tokens: usize) -> Vec<f64> {
        let ModelDims {
            d_query, n_rules, ..
        } = self.dims;
        let centers = self.group(ParamGroup::Centers);
        let lambdas = self.lambdas();
        let m0 = &centers[..d_query];
        let mut out = vec![0.0; n_tokens * n_rules];
        for i in 0..n_tokens {
            let qi = &q[i * d_query..(i + 1) * d_query];
            for r in 1..n_rules {
                let m = &centers[r * d_query..(r + 1) * d_query];
                out[i * n_rules + r] = -(0..d_query)
                    .map(|d| {
                        let (a, b) = (qi[d] - m[d], qi[d] - m0[d]);
                        let rel = if (a >= 0.0) == (b >= 0.0) {
                            if a >= 0.0 {
                                m0[d] - m[d]
                            } else {
                                m[d] - m0[d]
                            }
                        } else {
                            a.abs() - b.abs()
                        };
                        lambdas[d] * rel
                    })
                    .sum::<f64>();
            }
        }
        out
    }

    pub(crate) fn forward_cached(&self, input: &FeatureMatrix) -> Result<Cache> {
        self.check_input(input)?;
        let ModelDims {
            d_in,
            d_value,
            d_hidden,
            n_rules,
            n_classes,
            ..
        } = self.dims;
        let n_tokens = input.n_rows();
        let x: Vec<f64> = input.data().iter().map(|v| v * self.input_scale).collect();
        let q = self.queries(&x, n_tokens);
        let mut log_fire = self.rule_logits(&q, n_tokens);
        for row in log_fire.chunks_exact_mut(n_rules) {
            log_softmax_in_place(row);
        }

        // Σ_i Σ_r ln f_ir W_r^T x_i / T, pooled per rule before projecting.
        let inv_t = 1.0 / n_tokens as f64;
        let mut pooled = vec![0.0; n_rules * d_in];
        for i in 0..n_tokens {
            let xi = &x[i * d_in..(i + 1) * d_in];
            for r in 0..n_rules {
                let w = log_fire[i * n_rules + r] * inv_t;
                for (p, xv) in pooled[r * d_in..(r + 1) * d_in].iter_mut().zip(xi) {
                    *p += w * xv;
                }
            }
        }
        let value = self.group(ParamGroup::Value);
        let mut y = vec![0.0; d_value];
        for r in 0..n_rules {
            for k in 0..d_in {
                let p = pooled[r * d_in + k];
                if p == 0.0 {
                    continue;
                }
                let row = &value[(r * d_in + k) * d_value..(r * d_in + k + 1) * d_value];
                for (yv, wv) in y.iter_mut().zip(row) {
                    *yv += p * wv;
                }
            }
        }

        let w1 = self.group(ParamGroup::Hidden);
        let mut pre = self.group(ParamGroup::HiddenBias).to_vec();
        for (v, yv) in y.iter().enumerate() {
            for (p, w) in pre.iter_mut().zip(&w1[v * d_hidden..(v + 1) * d_hidden]) {
                *p += yv * w;
            }
        }
        let hidden: Vec<f64> = pre.iter().map(|v| v.max(0.0)).collect();
        let w2 = self.group(ParamGroup::Output);
        let mut logits = self.group(ParamGroup::OutputBias).to_vec();
        for (h, hv) in hidden.iter().enumerate() {
            if *hv == 0.0 {
                continue;
            }
            for (z, w) in logits
                .iter_mut()
                .zip(&w2[h * n_classes..(h + 1) * n_classes])
            {
                *z += hv * w;
            }
        }
        Ok(Cache {
            x,
            q,
            log_fire,
            pooled,
            y,
            pre,
            hidden,
            logits,
            n_tokens,
        })
    }

    /// Output of the fuzzy attention block (before the MLP head).
    pub fn aic_forward(&self, input: &FeatureMatrix) -> Result<Vec<f64>> {
        self.forward_cached(input).map(|c| c.y)
    }

    /// `W2 · relu(W1 · y + b1) + b2`.
    pub fn mlp_forward(&self, y: &[f64]) -> Result<Vec<f64>> {
        let ModelDims {
            d_value,
            d_hidden,
            n_classes,
            ..
        } = self.dims;
        if y.len() != d_value {
            return Err(Error::Dimension(format!(
                "head input {} vs {d_value}",
                y.len()
            )));
        }
        let w1 = self.group(ParamGroup::Hidden);
        let w2 = self.group(ParamGroup::Output);
        let mut pre = self.group(ParamGroup::HiddenBias).to_vec();
        for (v, yv) in y.iter().enumerate() {
            for (p, w) in pre.iter_mut().zip(&w1[v * d_hidden..(v + 1) * d_hidden]) {
                *p += yv * w;
            }
        }
        let mut logits = self.group(ParamGroup::OutputBias).to_vec();
        for (h, p) in pre.iter().enumerate() {
            let hv = p.max(0.0);
            for (z, w) in logits
                .iter_mut()
                .zip(&w2[h * n_classes..(h + 1) * n_classes])
            {
                *z += hv * w;
            }
        }
        Ok(logits)
    }

    pub fn logits(&self, input: &FeatureMatrix) -> Result<Vec<f64>> {
        self.forward_cached(input).map(|c| c.logits)
    }

    pub fn predict(&self, input: &FeatureMatrix) -> Result<Prediction> {
        self.logits(input).map(Prediction::from_logits)
    }

    /// Cross-entropy loss; gradients are added into `grad`.
    pub fn loss_and_grad(
        &self,
        input: &FeatureMatrix,
        class: usize,
        grad: &mut [f64],
    ) -> Result<f64> {
        if class >= self.dims.n_classes {
            return Err(Error::invalid(format!("class {class} outside model")));
        }
        if grad.len() != self.params.len() {
            return Err(Error::Dimension("gradient buffer size".into()));
        }
        let cache = self.forward_cached(input)?;
        let loss = self.backward(&cache, class, grad);
        Ok(loss)
    }

    pub fn loss(&self, input: &FeatureMatrix, class: usize) -> Result<f64> {
        let mut z = self.logits(input)?;
        log_softmax_in_place(&mut z);
        Ok(-z[class])
    }

    fn backward(&self, c: &Cache, class: usize, grad: &mut [f64]) -> f64 {
        let ModelDims {
            d_in,
            d_query,
            d_value,
            d_hidden,
            n_rules,
            n_classes,
        } = self.dims;
        let t = c.n_tokens;

        let mut log_probs = c.logits.clone();
        log_softmax_in_place(&mut log_probs);
        let loss = -log_probs[class];
        let mut dz: Vec<f64> = log_probs.iter().map(|v| v.exp()).collect();
        dz[class] -= 1.0;

        // Head.
        let w2 = self.group(ParamGroup::Output);
        let r = self.group_range(ParamGroup::OutputBias);
        for (g, d) in grad[r].iter_mut().zip(&dz) {
            *g += d;
        }
        let r = self.group_range(ParamGroup::Output);
        let mut dpre = vec![0.0; d_hidden];
        for h in 0..d_hidden {
            let row = &w2[h * n_classes..(h + 1) * n_classes];
            if c.hidden[h] != 0.0 {
                for (g, d) in grad[r.start + h * n_classes..r.start + (h + 1) * n_classes]
                    .iter_mut()
                    .zip(&dz)
                {
                    *g += c.hidden[h] * d;
                }
            }
            if c.pre[h] > 0.0 {
                dpre[h] = row.iter().zip(&dz).map(|(w, d)| w * d).sum();
            }
        }
        let r = self.group_range(ParamGroup::HiddenBias);
        for (g, d) in grad[r].iter_mut().zip(&dpre) {
            *g += d;
        }
        let w1 = self.group(ParamGroup::Hidden);
        let r = self.group_range(ParamGroup::Hidden);
        let mut dy = vec![0.0; d_value];
        for v in 0..d_value {
            let row = &w1[v * d_hidden..(v + 1) * d_hidden];
            dy[v] = row.iter().zip(&dpre).map(|(w, d)| w * d).sum();
            let yv = c.y[v];
            if yv != 0.0 {
                for (g, d) in grad[r.start + v * d_hidden..r.start + (v + 1) * d_hidden]
                    .iter_mut()
                    .zip(&dpre)
                {
                    *g += yv * d;
                }
            }
        }

        // Value projections: y = Σ_r W_r^T pooled_r.
        let value = self.group(ParamGroup::Value);
        let r = self.group_range(ParamGroup::Value);
        let mut dpooled = vec![0.0; n_rules * d_in];
        for rule in 0..n_rules {
            for k in 0..d_in {
                let idx = (rule * d_in + k) * d_value;
                let row = &value[idx..idx + d_value];
                dpooled[rule * d_in + k] = row.iter().zip(&dy).map(|(w, d)| w * d).sum();
                let p = c.pooled[rule * d_in + k];
                if p != 0.0 {
                    for (g, d) in grad[r.start + idx..r.start + idx + d_value]
                        .iter_mut()
                        .zip(&dy)
                    {
                        *g += p * d;
                    }
                }
            }
        }

        // Log-softmax over rules, then the Laplace distances.
        let lambdas = self.lambdas();
        let centers = self.group(ParamGroup::Centers);
        let inv_t = 1.0 / t as f64;
        let mut dlambda = vec![0.0; d_query];
        let mut dcenters = vec![0.0; n_rules * d_query];
        let mut dq = vec![0.0; t * d_query];
        let mut dlog = vec![0.0; n_rules];
        for i in 0..t {
            let xi = &c.x[i * d_in..(i + 1) * d_in];
            for rule in 0..n_rules {
                dlog[rule] = inv_t
                    * xi.iter()
                        .zip(&dpooled[rule * d_in..(rule + 1) * d_in])
                        .map(|(a, b)| a * b)
                        .sum::<f64>();
            }
            let total: f64 = dlog.iter().sum();
            let qi = &c.q[i * d_query..(i + 1) * d_query];
            let dqi = &mut dq[i * d_query..(i + 1) * d_query];
            for rule in 0..n_rules {
                let dlogit = dlog[rule] - c.log_fire[i * n_rules + rule].exp() * total;
                let m = &centers[rule * d_query..(rule + 1) * d_query];
                for d in 0..d_query {
                    let diff = qi[d] - m[d];
                    let s = if diff > 0.0 {
                        1.0
                    } else if diff < 0.0 {
                        -1.0
                    } else {
                        0.0
                    };
                    dlambda[d] -= diff.abs() * dlogit;
                    dqi[d] -= lambdas[d] * s * dlogit;
                    dcenters[rule * d_query + d] += lambdas[d] * s * dlogit;
                }
            }
        }
        let r = self.group_range(ParamGroup::Centers);
        for (g, d) in grad[r].iter_mut().zip(&dcenters) {
            *g += d;
        }
        let r = self.group_range(ParamGroup::LogLambda);
        for ((g, d), l) in grad[r].iter_mut().zip(&dlambda).zip(&lambdas) {
            *g += d * l;
        }
        let r = self.group_range(ParamGroup::Query);
        for i in 0..t {
            let dqi = &dq[i * d_query..(i + 1) * d_query];
            for k in 0..d_in {
                let xv = c.x[i * d_in + k];
                if xv == 0.0 {
                    continue;
                }
                let base = r.start + k * d_query;
                for (g, d) in grad[base..base + d_query].iter_mut().zip(dqi) {
                    *g += xv * d;
                }
            }
        }
        loss
    }

    /// Signs of every `q − m` term and every hidden pre-activation; two
    /// parameter points with equal signatures lie in the same smooth piece.
    pub(crate) fn kink_signature(&self, input: &FeatureMatrix) -> Result<Vec<i8>> {
        let c = self.forward_cached(input)?;
        let ModelDims {
            d_query, n_rules, ..
        } = self.dims;
        let centers = self.group(ParamGroup::Centers);
        let mut sig = Vec::new();
        for qi in c.q.chunks_exact(d_query) {
            for r in 0..n_rules {
                for d in 0..d_query {
                    sig.push((qi[d] - centers[r * d_query + d]).signum() as i8);
                }
            }
        }
        sig.extend(c.pre.iter().map(|p| (*p > 0.0) as i8));
        Ok(sig)
    }
}

/// Normalised firing strengths `softmax_r(−Σ_d λ_d |q_id − m_rd|)` per token.
pub fn firing_strengths(input: &FeatureMatrix, model: &FuzzyModel) -> Result<Vec<Vec<f64>>> {
    let c = model.forward_cached(input)?;
    Ok(c.log_fire
        .chunks_exact(model.dims.n_rules)
        .map(|row| row.iter().map(|v| v.exp()).collect())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_dims() -> ModelDims {
        ModelDims {
            d_in: 1,
            d_query: 1,
            d_value: 1,
            d_hidden: 2,
            n_rules: 2,
            n_classes: 2,
        }
    }

    fn matrix(rows: usize, cols: usize, f: impl Fn(usize) -> f64) -> FeatureMatrix {
        FeatureMatrix::new(
            (0..rows * cols).map(f).collect(),
            rows,
            cols,
            (0..cols).map(|c| c as f64).collect(),
        )
        .unwrap()
    }

    #[test]
    fn membership_values() {
        assert_eq!(membership(2.0, 2.0, 5.0), 1.0);
        assert_eq!(membership(-3.0, 2.0, 0.0), 1.0);
        assert!((membership(3.0, 2.0, 1.0) - 0.367879).abs() < 1e-6);
        assert_eq!(membership(1.0, 2.0, 1.0), membership(3.0, 2.0, 1.0));
        assert!(membership(4.0, 2.0, 1.0) < membership(3.0, 2.0, 1.0));
    }

    #[test]
    fn firing_softmax_of_known_logits() {
        // One token with q = 0, centers 1, 2, 3 on a single dimension, λ = 1.
        let dims = ModelDims {
            n_rules: 3,
            ..tiny_dims()
        };
        let mut m = FuzzyModel::init(dims, 1).unwrap();
        m.group_mut(ParamGroup::Query)[0] = 0.0;
        m.group_mut(ParamGroup::Centers)
            .copy_from_slice(&[1.0, 2.0, 3.0]);
        let f = firing_strengths(&matrix(1, 1, |_| 1.0), &m).unwrap();
        let expected = [0.66524, 0.24473, 0.09003];
        for (a, b) in f[0].iter().zip(expected) {
            assert!((a - b).abs() < 1e-5);
        }
    }

    #[test]
    fn equidistant_centers_fire_uniformly_and_exact_match_dominates() {
        let dims = ModelDims {
            n_rules: 4,
            ..tiny_dims()
        };
        let mut m = FuzzyModel::init(dims, 1).unwrap();
        m.group_mut(ParamGroup::Query)[0] = 1.0;
        m.group_mut(ParamGroup::Centers)
            .copy_from_slice(&[0.5, 0.5, 0.5, 0.5]);
        let f = firing_strengths(&matrix(1, 1, |_| 1.0), &m).unwrap();
        assert!(f[0].iter().all(|v| (v - 0.25).abs() < 1e-12));

        m.group_mut(ParamGroup::Centers)
            .copy_from_slice(&[1.0, 3.0, -2.0, 5.0]);
        m.group_mut(ParamGroup::LogLambda)[0] = 50f64.ln();
        let f = firing_strengths(&matrix(1, 1, |_| 1.0), &m).unwrap();
        assert!(f[0][0] >= 0.999);
    }

    #[test]
    fn aic_forward_degenerate_cases() {
        let dims = ModelDims::new(6, 1, 3);
        let m = FuzzyModel::init(dims, 3).unwrap();
        let x = matrix(4, 6, |i| (i as f64 * 0.37).sin());
        assert!(m.aic_forward(&x).unwrap().iter().all(|v| *v == 0.0));

        let mut m = FuzzyModel::init(ModelDims::new(6, 3, 3), 3).unwrap();
        m.group_mut(ParamGroup::Value)
            .iter_mut()
            .for_each(|v| *v = 0.0);
        assert!(m.aic_forward(&x).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn aic_forward_matches_scalar_oracle() {
        let mut m = FuzzyModel::init(tiny_dims(), 1).unwrap();
        m.input_scale = 1.0;
        m.group_mut(ParamGroup::Query)[0] = 0.8;
        m.group_mut(ParamGroup::Centers)
            .copy_from_slice(&[0.1, 1.5]);
        m.group_mut(ParamGroup::LogLambda)[0] = 0.7f64.ln();
        m.group_mut(ParamGroup::Value).copy_from_slice(&[2.0, -0.5]);
        let x = 1.25;
        // Independent recomputation: q = 1.0, logits −0.7·0.9, −0.7·0.5.
        let q = 0.8 * x;
        let (l1, l2) = (-0.7 * (q - 0.1f64).abs(), -0.7 * (q - 1.5f64).abs());
        let lse = (l1.exp() + l2.exp()).ln();
        let expected = (l1 - lse) * 2.0 * x + (l2 - lse) * -0.5 * x;
        let got = m.aic_forward(&matrix(1, 1, |_| x)).unwrap();
        assert!((got[0] - expected).abs() < 1e-12);
    }

    #[test]
    fn mlp_forward_cases() {
        let dims = ModelDims {
            d_in: 1,
            d_query: 1,
            d_value: 2,
            d_hidden: 2,
            n_rules: 2,
            n_classes: 2,
        };
        let mut m = FuzzyModel::init(dims, 1).unwrap();
        m.group_mut(ParamGroup::Hidden)
            .iter_mut()
            .for_each(|v| *v = 0.0);
        m.group_mut(ParamGroup::Output)
            .iter_mut()
            .for_each(|v| *v = 0.0);
        m.group_mut(ParamGroup::OutputBias)
            .copy_from_slice(&[0.3, -0.2]);
        assert_eq!(m.mlp_forward(&[1.0, 2.0]).unwrap(), vec![0.3, -0.2]);

        m.group_mut(ParamGroup::Hidden)
            .copy_from_slice(&[1.0, -1.0, 0.5, 2.0]);
        m.group_mut(ParamGroup::HiddenBias)
            .copy_from_slice(&[0.1, -0.4]);
        m.group_mut(ParamGroup::Output)
            .copy_from_slice(&[1.0, 2.0, -3.0, 0.5]);
        // y = 0: relu(b1) = (0.1, 0).
        let z = m.mlp_forward(&[0.0, 0.0]).unwrap();
        assert!((z[0] - (0.1 + 0.3)).abs() < 1e-12 && (z[1] - (0.2 - 0.2)).abs() < 1e-12);
        // y = (1, 2): pre = (1 + 1 + 0.1, −1 + 4 − 0.4) = (2.1, 2.6).
        let z = m.mlp_forward(&[1.0, 2.0]).unwrap();
        let (h0, h1) = (2.1, 2.6);
        assert!((z[0] - (h0 * 1.0 + h1 * -3.0 + 0.3)).abs() < 1e-12);
        assert!((z[1] - (h0 * 2.0 + h1 * 0.5 - 0.2)).abs() < 1e-12);
    }

    #[test]
    fn prediction_ties_and_shift_invariance() {
        assert_eq!(Prediction::from_logits(vec![0.0, 3.0, -1.0]).class_index, 1);
        assert_eq!(Prediction::from_logits(vec![2.0, 2.0, 2.0]).class_index, 0);
        let a = Prediction::from_logits(vec![0.5, 1.5, -2.0]);
        let b = Prediction::from_logits(vec![10.5, 11.5, 8.0]);
        assert_eq!(a.class_index, b.class_index);
        assert!((a.confidence - b.confidence).abs() < 1e-12);
    }

    #[test]
    fn rule_permutation_leaves_output_unchanged() {
        let dims = ModelDims {
            d_in: 5,
            d_query: 3,
            d_value: 4,
            d_hidden: 6,
            n_rules: 3,
            n_classes: 2,
        };
        let m = FuzzyModel::init(dims, 9).unwrap();
        let x = matrix(4, 5, |i| ((i * 7) % 11) as f64 / 5.0 - 1.0);
        let mut p = m.clone();
        let perm = [2usize, 0, 1];
        let (cr, vr) = (
            m.group_range(ParamGroup::Centers),
            m.group_range(ParamGroup::Value),
        );
        for (new, &old) in perm.iter().enumerate() {
            let c = &m.params[cr.start + old * 3..cr.start + (old + 1) * 3];
            p.params[cr.start + new * 3..cr.start + (new + 1) * 3].copy_from_slice(c);
            let blk = 5 * 4;
            let v = &m.params[vr.start + old * blk..vr.start + (old + 1) * blk];
            p.params[vr.start + new * blk..vr.start + (new + 1) * blk].copy_from_slice(v);
        }
        let (fa, fb) = (
            firing_strengths(&x, &m).unwrap(),
            firing_strengths(&x, &p).unwrap(),
        );
        for (ra, rb) in fa.iter().zip(&fb) {
            assert!((ra.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for (new, &old) in perm.iter().enumerate() {
                assert!((rb[new] - ra[old]).abs() < 1e-12);
            }
        }
        let (ya, yb) = (m.aic_forward(&x).unwrap(), p.aic_forward(&x).unwrap());
        for (a, b) in ya.iter().zip(&yb) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let m = FuzzyModel::init(ModelDims::new(6, 3, 3), 1).unwrap();
        assert!(matches!(
            m.predict(&matrix(2, 5, |_| 0.0)),
            Err(Error::Dimension(_))
        ));
    }
}
