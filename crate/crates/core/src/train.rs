//! Adam training on cross-entropy and F1 evaluation.

use std::path::Path;

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::data::{batches, Dataset};
use crate::error::{Error, Result};
use crate::network::{Gradients, MaskedNetwork};
use crate::seed::child_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            epochs: 30,
            batch_size: 128,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let rates_ok = self.learning_rate > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.adam_eps > 0.0;
        if !rates_ok {
            return Err(Error::InvalidParameter(format!("invalid optimizer settings {self:?}")));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidParameter("batch size must be at least 1".into()));
        }
        Ok(())
    }
}

/// One Adam update with bias correction on flat slices. `t` is the step
/// number after incrementing (first step is 1).
pub fn adam_update(params: &mut [f64], grads: &[f64], m: &mut [f64], v: &mut [f64], t: u64, cfg: &TrainConfig) {
    let bc1 = 1.0 - cfg.beta1.powi(t as i32);
    let bc2 = 1.0 - cfg.beta2.powi(t as i32);
    for i in 0..params.len() {
        let g = grads[i];
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        params[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.adam_eps);
    }
}

/// First and second moment estimates for every tensor of a network.
#[derive(Debug, Clone)]
pub struct AdamState {
    t: u64,
    m_w: Vec<Array2<f64>>,
    v_w: Vec<Array2<f64>>,
    m_b: Vec<Array1<f64>>,
    v_b: Vec<Array1<f64>>,
}

impl AdamState {
    pub fn new(net: &MaskedNetwork) -> Self {
        let w: Vec<Array2<f64>> = net.groups().iter().map(|g| Array2::zeros(g.weights().raw_dim())).collect();
        let b: Vec<Array1<f64>> = net.biases().iter().map(|b| Array1::zeros(b.len())).collect();
        Self {
            t: 0,
            m_w: w.clone(),
            v_w: w,
            m_b: b.clone(),
            v_b: b,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// Applies one Adam step, then re-zeroes masked weights.
    pub fn step(&mut self, net: &mut MaskedNetwork, grads: &Gradients, cfg: &TrainConfig) {
        self.t += 1;
        let t = self.t;
        let (m_w, v_w, m_b, v_b) = (&mut self.m_w, &mut self.v_w, &mut self.m_b, &mut self.v_b);
        net.for_each_param_mut(
            |i, w, mask| {
                adam_update(
                    w.as_slice_mut().expect("standard layout"),
                    grads.weights[i].as_slice().expect("standard layout"),
                    m_w[i].as_slice_mut().unwrap(),
                    v_w[i].as_slice_mut().unwrap(),
                    t,
                    cfg,
                );
                w.zip_mut_with(mask, |v, &keep| {
                    if !keep {
                        *v = 0.0;
                    }
                });
            },
            |i, b| {
                adam_update(
                    b.as_slice_mut().unwrap(),
                    grads.biases[i].as_slice().unwrap(),
                    m_b[i].as_slice_mut().unwrap(),
                    v_b[i].as_slice_mut().unwrap(),
                    t,
                    cfg,
                );
            },
        );
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
}

impl TrainHistory {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for rec in &self.epochs {
            w.serialize(rec)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Mini-batch Adam for `cfg.epochs` epochs with a fresh optimizer state.
pub fn train(net: &mut MaskedNetwork, train_set: &Dataset, cfg: &TrainConfig) -> Result<TrainHistory> {
    let mut state = AdamState::new(net);
    train_with_state(net, train_set, cfg, &mut state)
}

/// Mini-batch Adam continuing from an existing optimizer state.
pub fn train_with_state(
    net: &mut MaskedNetwork,
    train_set: &Dataset,
    cfg: &TrainConfig,
    state: &mut AdamState,
) -> Result<TrainHistory> {
    cfg.validate()?;
    if train_set.feature_dim() != net.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: net.input_dim(),
            got: train_set.feature_dim(),
        });
    }
    let mut history = TrainHistory::default();
    for epoch in 0..cfg.epochs {
        let order = batches(train_set.len(), cfg.batch_size, child_seed(cfg.seed, "epoch", epoch as u64))?;
        let (mut loss_sum, mut correct) = (0.0, 0usize);
        for (bi, idx) in order.iter().enumerate() {
            let x = train_set.gather_columns(idx);
            let labels: Vec<usize> = idx.iter().map(|&i| train_set.label(i)).collect();
            let cache = net.forward_batch(x.view())?;
            let grads = net.backward_params(&cache, &labels)?;
            if !grads.loss.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    batch: bi,
                    loss: grads.loss,
                });
            }
            loss_sum += grads.loss * idx.len() as f64;
            correct += cache.predictions().iter().zip(&labels).filter(|(p, y)| p == y).count();
            state.step(net, &grads, cfg);
        }
        net.check_masks()?;
        let n = train_set.len().max(1) as f64;
        history.epochs.push(EpochRecord {
            epoch,
            loss: loss_sum / n,
            accuracy: correct as f64 / n,
        });
    }
    Ok(history)
}

/// Class probabilities (`output_dim x n`) for a whole dataset.
pub fn predict_proba(net: &MaskedNetwork, ds: &Dataset) -> Result<Array2<f64>> {
    const CHUNK: usize = 1000;
    let mut out = Array2::zeros((net.output_dim(), ds.len()));
    let all: Vec<usize> = (0..ds.len()).collect();
    for (c, idx) in all.chunks(CHUNK).enumerate() {
        let probs = net.predict_proba(ds.gather_columns(idx).view())?;
        out.slice_mut(ndarray::s![.., c * CHUNK..c * CHUNK + idx.len()]).assign(&probs);
    }
    Ok(out)
}

/// Argmax predictions for a whole dataset.
pub fn predict(net: &MaskedNetwork, ds: &Dataset) -> Result<Vec<usize>> {
    let probs = predict_proba(net, ds)?;
    Ok(probs
        .axis_iter(Axis(1))
        .map(|c| crate::network::argmax_of(c.iter().copied()))
        .collect())
}

/// Classification quality summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    pub f1: Vec<f64>,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
    /// Classes that appear neither in the truth nor in the predictions;
    /// their F1 is 0 and still enters the macro average.
    pub absent_classes: Vec<usize>,
}

impl EvalReport {
    pub fn from_predictions(truth: &[usize], predicted: &[usize], num_classes: usize) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::DimensionMismatch {
                expected: truth.len(),
                got: predicted.len(),
            });
        }
        let mut confusion = vec![vec![0usize; num_classes]; num_classes];
        for (&t, &p) in truth.iter().zip(predicted) {
            if t >= num_classes || p >= num_classes {
                return Err(Error::InvalidParameter(format!("class out of range: {t} / {p}")));
            }
            confusion[t][p] += 1;
        }
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let mut precision = Vec::with_capacity(num_classes);
        let mut recall = Vec::with_capacity(num_classes);
        let mut f1 = Vec::with_capacity(num_classes);
        let mut absent_classes = Vec::new();
        for c in 0..num_classes {
            let tp = confusion[c][c];
            let support: usize = confusion[c].iter().sum();
            let predicted_c: usize = confusion.iter().map(|row| row[c]).sum();
            if support == 0 && predicted_c == 0 {
                absent_classes.push(c);
            }
            let p = ratio(tp, predicted_c);
            let r = ratio(tp, support);
            precision.push(p);
            recall.push(r);
            f1.push(if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 });
        }
        let correct: usize = (0..num_classes).map(|c| confusion[c][c]).sum();
        Ok(Self {
            accuracy: ratio(correct, truth.len()),
            macro_f1: f1.iter().sum::<f64>() / num_classes.max(1) as f64,
            precision,
            recall,
            f1,
            confusion,
            absent_classes,
        })
    }
}

pub fn evaluate_f1(net: &MaskedNetwork, test_set: &Dataset) -> Result<EvalReport> {
    let predicted = predict(net, test_set)?;
    EvalReport::from_predictions(test_set.labels(), &predicted, net.output_dim())
}
