use ndarray::{Array2, ArrayView1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::AdversarialExample;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::network::{argmax_of, MaskedNetwork};

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `clip(x + eps * sign(grad), 0, 1)`.
fn perturb(x: ArrayView1<'_, f64>, grad_sign: &[f64], eps: f64) -> Vec<f64> {
    x.iter().zip(grad_sign).map(|(&v, &s)| (v + eps * s).clamp(0.0, 1.0)).collect()
}

fn input_gradient_signs(net: &MaskedNetwork, x: &Array2<f64>, labels: &[usize]) -> Result<Array2<f64>> {
    let cache = net.forward_batch(x.view())?;
    let grads = net.backward(&cache, labels)?;
    Ok(grads.input.mapv(sign))
}

fn example_from(
    index: usize,
    label: usize,
    image: Vec<f64>,
    probs: ArrayView1<'_, f64>,
    epsilon_used: Option<f64>,
) -> AdversarialExample {
    let predicted = argmax_of(probs.iter().copied());
    AdversarialExample {
        original_index: index,
        perturbed_image: image,
        original_label: label,
        predicted_label: predicted,
        success: predicted != label,
        confidence: probs[predicted],
        epsilon_used,
        candidate: None,
        generations_used: None,
    }
}

/// Fast gradient sign method on a single image. The returned example has
/// `original_index` 0; use [`fgsm_batch`] to attack dataset rows.
pub fn fgsm(net: &MaskedNetwork, x: &[f64], y: usize, eps: f64) -> Result<AdversarialExample> {
    if eps < 0.0 {
        return Err(Error::InvalidParameter(format!("negative epsilon {eps}")));
    }
    let col = Array2::from_shape_vec((x.len(), 1), x.to_vec()).expect("column");
    let signs = input_gradient_signs(net, &col, &[y])?;
    let signs: Vec<f64> = signs.column(0).to_vec();
    let adv = perturb(col.column(0), &signs, eps);
    let probs = net.forward(&adv)?.probabilities().column(0).to_owned();
    Ok(example_from(0, y, adv, probs.view(), None))
}

/// FGSM over selected dataset rows, processed in parallel chunks.
pub fn fgsm_batch(net: &MaskedNetwork, ds: &Dataset, indices: &[usize], eps: f64) -> Result<Vec<AdversarialExample>> {
    if eps < 0.0 {
        return Err(Error::InvalidParameter(format!("negative epsilon {eps}")));
    }
    let chunks: Vec<Result<Vec<AdversarialExample>>> = indices
        .par_chunks(256)
        .map(|chunk| {
            let x = ds.gather_columns(chunk);
            let labels: Vec<usize> = chunk.iter().map(|&i| ds.label(i)).collect();
            let signs = input_gradient_signs(net, &x, &labels)?;
            let mut adv = Array2::zeros(x.raw_dim());
            for j in 0..chunk.len() {
                let s: Vec<f64> = signs.column(j).to_vec();
                let p = perturb(x.column(j), &s, eps);
                adv.column_mut(j).assign(&ArrayView1::from(&p));
            }
            let probs = net.predict_proba(adv.view())?;
            Ok(chunk
                .iter()
                .enumerate()
                .map(|(j, &i)| example_from(i, labels[j], adv.column(j).to_vec(), probs.column(j), None))
                .collect())
        })
        .collect();
    let mut out = Vec::with_capacity(indices.len());
    for c in chunks {
        out.extend(c?);
    }
    Ok(out)
}

/// Epsilon grid `start, start + step, ...` up to `cap`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsSearchConfig {
    pub start: f64,
    pub step: f64,
    pub cap: f64,
}

impl Default for EpsSearchConfig {
    fn default() -> Self {
        Self {
            start: 0.001,
            step: 0.01,
            cap: 1.0,
        }
    }
}

impl EpsSearchConfig {
    pub fn grid(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut k = 0u32;
        loop {
            let eps = self.start + k as f64 * self.step;
            if eps > self.cap + 1e-12 {
                break;
            }
            out.push(eps);
            k += 1;
        }
        out
    }
}

/// Smallest epsilon on the grid whose FGSM perturbation flips the
/// prediction. The gradient sign is taken once at the clean image. If no
/// grid value up to the cap succeeds the example is censored: `success` is
/// false and `epsilon_used` is `None`.
pub fn fgsm_eps_search(
    net: &MaskedNetwork,
    x: &[f64],
    y: usize,
    cfg: &EpsSearchConfig,
    original_index: usize,
) -> Result<AdversarialExample> {
    if cfg.start < 0.0 || cfg.step <= 0.0 {
        return Err(Error::InvalidParameter(format!("invalid epsilon grid {cfg:?}")));
    }
    let col = Array2::from_shape_vec((x.len(), 1), x.to_vec()).expect("column");
    let cache = net.forward_batch(col.view())?;
    if cache.predictions()[0] != y {
        return Err(Error::Precondition(format!(
            "image {original_index} is already misclassified; epsilon search needs a correct sample"
        )));
    }
    let grads = net.backward(&cache, &[y])?;
    let signs: Vec<f64> = grads.input.column(0).iter().map(|&g| sign(g)).collect();
    let grid = cfg.grid();
    let mut last = None;
    for chunk in grid.chunks(32) {
        let mut batch = Array2::zeros((x.len(), chunk.len()));
        for (j, &eps) in chunk.iter().enumerate() {
            batch.column_mut(j).assign(&ArrayView1::from(&perturb(col.column(0), &signs, eps)));
        }
        let probs = net.predict_proba(batch.view())?;
        for (j, &eps) in chunk.iter().enumerate() {
            let ex = example_from(original_index, y, batch.column(j).to_vec(), probs.column(j), Some(eps));
            if ex.success {
                return Ok(ex);
            }
            last = Some(ex);
        }
    }
    let mut censored = match last {
        Some(ex) => ex,
        None => {
            let probs = cache.probabilities().column(0).to_owned();
            example_from(original_index, y, x.to_vec(), probs.view(), None)
        }
    };
    censored.epsilon_used = None;
    Ok(censored)
}
