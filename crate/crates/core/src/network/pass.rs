//! Forward and backward passes.
//!
//! Activations are stored feature-major: a batch of `b` inputs is an
//! `input_dim x b` matrix and each hidden layer holds a `units x b` matrix.

use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2, ArrayView2, Axis};

use super::{LayerRef, MaskedNetwork};
use crate::error::{Error, Result};

/// Everything the backward pass needs from a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    input: Array2<f64>,
    hidden: Vec<Array2<f64>>,
    logits: Array2<f64>,
    probabilities: Array2<f64>,
    key: (u64, u64),
}

impl ForwardCache {
    pub fn batch_size(&self) -> usize {
        self.input.ncols()
    }

    /// `output_dim x batch` logits.
    pub fn logits(&self) -> &Array2<f64> {
        &self.logits
    }

    /// `output_dim x batch` softmax probabilities.
    pub fn probabilities(&self) -> &Array2<f64> {
        &self.probabilities
    }

    /// Post-ReLU activations of every hidden layer.
    pub fn hidden_activations(&self) -> &[Array2<f64>] {
        &self.hidden
    }

    /// Probabilities of the `i`-th batch element.
    pub fn probs_of(&self, i: usize) -> Vec<f64> {
        self.probabilities.column(i).to_vec()
    }

    /// Argmax class per batch element (ties go to the lower class).
    pub fn predictions(&self) -> Vec<usize> {
        self.probabilities.columns().into_iter().map(|c| argmax(c.iter().copied())).collect()
    }

    /// Mean categorical cross-entropy against `labels`.
    pub fn loss(&self, labels: &[usize]) -> f64 {
        let b = labels.len() as f64;
        labels
            .iter()
            .enumerate()
            .map(|(i, &y)| -log_softmax_at(self.logits.column(i).iter().copied(), y))
            .sum::<f64>()
            / b
    }
}

/// Gradients of the mean cross-entropy loss.
#[derive(Debug, Clone)]
pub struct Gradients {
    /// Per group, same shape as its weights; zero at masked positions.
    pub weights: Vec<Array2<f64>>,
    /// Hidden layers then output.
    pub biases: Vec<Array1<f64>>,
    /// `input_dim x batch` (empty when not requested).
    pub input: Array2<f64>,
    pub loss: f64,
}

pub(crate) fn argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

fn log_softmax_at(logits: impl Iterator<Item = f64> + Clone, y: usize) -> f64 {
    let max = logits.clone().fold(f64::NEG_INFINITY, f64::max);
    let lse = logits.clone().map(|z| (z - max).exp()).sum::<f64>().ln() + max;
    logits.clone().nth(y).expect("label in range") - lse
}

impl MaskedNetwork {
    fn source_activation<'a>(
        &self,
        source: LayerRef,
        input: &'a Array2<f64>,
        hidden: &'a [Array2<f64>],
    ) -> &'a Array2<f64> {
        match source {
            LayerRef::Input => input,
            LayerRef::Hidden(s) => &hidden[s],
            LayerRef::Output => unreachable!("output never feeds a group"),
        }
    }

    /// Forward pass over a batch (`input_dim x batch`).
    pub fn forward_batch(&self, x: ArrayView2<'_, f64>) -> Result<ForwardCache> {
        if x.nrows() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                got: x.nrows(),
            });
        }
        let batch = x.ncols();
        let input = x.to_owned();
        let depth = self.depth();
        let mut hidden: Vec<Array2<f64>> = Vec::with_capacity(depth);
        for l in 0..depth {
            let mut pre = bias_block(&self.biases[l], batch);
            for &gi in &self.incoming[l] {
                let g = &self.groups[gi];
                let z = self.source_activation(g.source, &input, &hidden);
                general_mat_mul(1.0, &g.weights, z, 1.0, &mut pre);
            }
            pre.mapv_inplace(|v| if v > 0.0 { v } else { 0.0 });
            hidden.push(pre);
        }
        let mut logits = bias_block(&self.biases[depth], batch);
        for &gi in &self.incoming[depth] {
            let g = &self.groups[gi];
            let z = self.source_activation(g.source, &input, &hidden);
            general_mat_mul(1.0, &g.weights, z, 1.0, &mut logits);
        }
        let probabilities = softmax_columns(&logits);
        Ok(ForwardCache {
            input,
            hidden,
            logits,
            probabilities,
            key: self.version_key(),
        })
    }

    /// Forward pass for one input vector.
    pub fn forward(&self, x: &[f64]) -> Result<ForwardCache> {
        let view = ArrayView2::from_shape((x.len(), 1), x).expect("column view");
        self.forward_batch(view)
    }

    /// Class probabilities for a batch.
    pub fn predict_proba(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        Ok(self.forward_batch(x)?.probabilities)
    }

    /// Gradients of the mean cross-entropy over the cached batch.
    pub fn backward(&self, cache: &ForwardCache, labels: &[usize]) -> Result<Gradients> {
        self.backward_inner(cache, labels, true)
    }

    /// Like [`backward`](Self::backward) but skips the input gradient, which
    /// is left as an empty matrix.
    pub fn backward_params(&self, cache: &ForwardCache, labels: &[usize]) -> Result<Gradients> {
        self.backward_inner(cache, labels, false)
    }

    fn backward_inner(&self, cache: &ForwardCache, labels: &[usize], with_input: bool) -> Result<Gradients> {
        if cache.key != self.version_key() {
            return Err(Error::StaleCache);
        }
        let batch = cache.batch_size();
        if labels.len() != batch {
            return Err(Error::DimensionMismatch {
                expected: batch,
                got: labels.len(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= self.output_dim) {
            return Err(Error::InvalidParameter(format!("label {bad} out of range")));
        }
        let depth = self.depth();
        let scale = 1.0 / batch as f64;

        let mut delta_out = cache.probabilities.clone();
        for (i, &y) in labels.iter().enumerate() {
            delta_out[(y, i)] -= 1.0;
        }
        delta_out.mapv_inplace(|v| v * scale);

        // deltas[l] = dLoss / d(pre-activation of hidden layer l)
        let mut deltas: Vec<Option<Array2<f64>>> = vec![None; depth];
        for l in (0..depth).rev() {
            let mut upstream = Array2::<f64>::zeros((self.layer_units[l], batch));
            for &gi in &self.outgoing[l] {
                let g = &self.groups[gi];
                let d = match g.target {
                    LayerRef::Hidden(t) => deltas[t].as_ref().expect("later layers done first"),
                    LayerRef::Output => &delta_out,
                    LayerRef::Input => unreachable!(),
                };
                general_mat_mul(1.0, &g.weights.t(), d, 1.0, &mut upstream);
            }
            upstream.zip_mut_with(&cache.hidden[l], |g, &z| {
                if z <= 0.0 {
                    *g = 0.0;
                }
            });
            deltas[l] = Some(upstream);
        }

        let delta_of = |target: LayerRef| -> &Array2<f64> {
            match target {
                LayerRef::Hidden(t) => deltas[t].as_ref().unwrap(),
                LayerRef::Output => &delta_out,
                LayerRef::Input => unreachable!(),
            }
        };

        let mut weight_grads = Vec::with_capacity(self.groups.len());
        let mut input_grad = if with_input {
            Array2::<f64>::zeros((self.input_dim, batch))
        } else {
            Array2::<f64>::zeros((0, 0))
        };
        for g in &self.groups {
            let d = delta_of(g.target);
            let z = self.source_activation(g.source, &cache.input, &cache.hidden);
            let mut gw = d.dot(&z.t());
            gw.zip_mut_with(&g.mask, |v, &m| {
                if !m {
                    *v = 0.0;
                }
            });
            weight_grads.push(gw);
            if with_input && g.source == LayerRef::Input {
                general_mat_mul(1.0, &g.weights.t(), d, 1.0, &mut input_grad);
            }
        }
        let mut bias_grads: Vec<Array1<f64>> =
            deltas.iter().map(|d| d.as_ref().unwrap().sum_axis(Axis(1))).collect();
        bias_grads.push(delta_out.sum_axis(Axis(1)));

        Ok(Gradients {
            weights: weight_grads,
            biases: bias_grads,
            input: input_grad,
            loss: cache.loss(labels),
        })
    }
}

fn bias_block(bias: &Array1<f64>, batch: usize) -> Array2<f64> {
    let mut out = Array2::zeros((bias.len(), batch));
    for (mut row, &b) in out.rows_mut().into_iter().zip(bias.iter()) {
        row.fill(b);
    }
    out
}

fn softmax_columns(logits: &Array2<f64>) -> Array2<f64> {
    let mut p = logits.clone();
    for mut col in p.columns_mut() {
        let max = col.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        col.mapv_inplace(|z| (z - max).exp());
        let sum = col.sum();
        col.mapv_inplace(|e| e / sum);
    }
    p
}
