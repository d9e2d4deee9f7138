//! One-pixel attack.
//!
//! A candidate `(p_x, p_y, I)` replaces the pixel in column `p_x`, row `p_y`
//! (both 1-indexed) with intensity `I / 255`. Differential evolution
//! (rand/1/bin with greedy selection) maximises `1 - f_y(x(c))`, the
//! probability mass taken away from the true class, and stops early as
//! soon as some member of the population is misclassified.

use ndarray::Array2;
use rand::seq::index::sample;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::AdversarialExample;
use crate::data::IMAGE_SIDE;
use crate::error::{Error, Result};
use crate::network::{argmax_of, MaskedNetwork};
use crate::seed::{rng_from_seed, Rng};

const COORD_MIN: f64 = 1.0;
const COORD_MAX: f64 = IMAGE_SIDE as f64;
const INTENSITY_MAX: f64 = 255.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PixelCandidate {
    /// Column, 1..=28.
    pub p_x: u32,
    /// Row, 1..=28.
    pub p_y: u32,
    /// Replacement intensity, 0..=255.
    pub intensity: u32,
}

impl PixelCandidate {
    fn from_reals(v: [f64; 3]) -> Self {
        Self {
            p_x: v[0].clamp(COORD_MIN, COORD_MAX).round() as u32,
            p_y: v[1].clamp(COORD_MIN, COORD_MAX).round() as u32,
            intensity: v[2].clamp(0.0, INTENSITY_MAX).round() as u32,
        }
    }

    fn to_reals(self) -> [f64; 3] {
        [self.p_x as f64, self.p_y as f64, self.intensity as f64]
    }

    /// Row-major pixel index.
    pub fn pixel_index(self) -> usize {
        (self.p_y as usize - 1) * IMAGE_SIDE + (self.p_x as usize - 1)
    }
}

/// Differential-evolution settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DEConfig {
    pub pop_size: usize,
    pub max_iter: usize,
    /// Differential weight.
    pub f: f64,
    /// Crossover rate.
    pub cr: f64,
    pub seed: u64,
}

impl Default for DEConfig {
    fn default() -> Self {
        Self {
            pop_size: 500,
            max_iter: 500,
            f: 0.5,
            cr: 0.9,
            seed: 0,
        }
    }
}

impl DEConfig {
    pub fn validate(&self) -> Result<()> {
        if self.pop_size < 4 {
            return Err(Error::InvalidParameter(format!(
                "population size {} below 4 (rand/1 needs three distinct partners)",
                self.pop_size
            )));
        }
        if !(self.f > 0.0) || !(0.0..=1.0).contains(&self.cr) {
            return Err(Error::InvalidParameter(format!("invalid F = {} or CR = {}", self.f, self.cr)));
        }
        Ok(())
    }
}

/// Coordinates from `U(1, 28)` rounded, intensity from `N(128, 127)`
/// clamped to `[0, 255]` and rounded.
pub fn random_candidate(rng: &mut Rng) -> PixelCandidate {
    let intensity = Normal::new(128.0, 127.0).expect("valid normal");
    PixelCandidate::from_reals([
        rng.random_range(COORD_MIN..=COORD_MAX),
        rng.random_range(COORD_MIN..=COORD_MAX),
        intensity.sample(rng),
    ])
}

/// Copy of `x` with the candidate's pixel replaced.
pub fn apply_candidate(x: &[f64], c: PixelCandidate) -> Vec<f64> {
    let mut out = x.to_vec();
    out[c.pixel_index()] = c.intensity as f64 / INTENSITY_MAX;
    out
}

/// `1 - f_y`, the objective the attack maximises.
pub fn pixel_fitness(probabilities: &[f64], y: usize) -> f64 {
    1.0 - probabilities[y]
}

/// A population with its fitness values and misclassification flags.
#[derive(Debug, Clone, PartialEq)]
pub struct Generation {
    pub population: Vec<PixelCandidate>,
    pub fitness: Vec<f64>,
    pub flipped: Vec<bool>,
}

impl Generation {
    pub fn best_fitness(&self) -> f64 {
        self.fitness.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Highest-fitness misclassified member if any, otherwise the
    /// highest-fitness member. Ties go to the lower index.
    pub fn champion(&self) -> usize {
        let pick = |only_flipped: bool| {
            let mut best: Option<usize> = None;
            for i in 0..self.population.len() {
                if only_flipped && !self.flipped[i] {
                    continue;
                }
                if best.is_none_or(|b| self.fitness[i] > self.fitness[b]) {
                    best = Some(i);
                }
            }
            best
        };
        pick(true).or_else(|| pick(false)).expect("non-empty population")
    }
}

/// One DE/rand/1/bin generation. For every parent `i` a mutant
/// `a + F (b - c)` is built from three distinct members other than `i`,
/// crossed over binomially with one forced mutant coordinate, clamped and
/// rounded; the child replaces the parent iff its fitness is at least the
/// parent's. `evaluate` scores a slice of candidates, returning fitness and
/// whether the candidate is misclassified.
pub fn de_evolve<E>(current: &Generation, evaluate: &mut E, cfg: &DEConfig, rng: &mut Rng) -> Result<Generation>
where
    E: FnMut(&[PixelCandidate]) -> Result<Vec<(f64, bool)>>,
{
    cfg.validate()?;
    let n = current.population.len();
    if n < 4 {
        return Err(Error::InvalidParameter(format!("population of {n} is below 4")));
    }
    let mut trials = Vec::with_capacity(n);
    for i in 0..n {
        let picks = sample(rng, n - 1, 3);
        let partner = |k: usize| {
            let j = picks.index(k);
            current.population[if j >= i { j + 1 } else { j }].to_reals()
        };
        let (a, b, c) = (partner(0), partner(1), partner(2));
        let parent = current.population[i].to_reals();
        let forced = rng.random_range(0..3);
        let mut trial = parent;
        for d in 0..3 {
            if d == forced || rng.random::<f64>() < cfg.cr {
                trial[d] = a[d] + cfg.f * (b[d] - c[d]);
            }
        }
        trials.push(PixelCandidate::from_reals(trial));
    }
    let scores = evaluate(&trials)?;
    let mut next = current.clone();
    for (i, (trial, (fit, flipped))) in trials.into_iter().zip(scores).enumerate() {
        if fit >= current.fitness[i] {
            next.population[i] = trial;
            next.fitness[i] = fit;
            next.flipped[i] = flipped;
        }
    }
    Ok(next)
}

/// Scores candidates on `x` with true label `y` in one batched forward pass.
fn score_candidates(net: &MaskedNetwork, x: &[f64], y: usize, cands: &[PixelCandidate]) -> Result<Vec<(f64, bool)>> {
    let mut batch = Array2::zeros((x.len(), cands.len()));
    for (j, c) in cands.iter().enumerate() {
        let mut col = batch.column_mut(j);
        col.assign(&ndarray::ArrayView1::from(x));
        col[c.pixel_index()] = c.intensity as f64 / INTENSITY_MAX;
    }
    let probs = net.predict_proba(batch.view())?;
    Ok(probs
        .columns()
        .into_iter()
        .map(|p| (1.0 - p[y], argmax_of(p.iter().copied()) != y))
        .collect())
}

/// One-pixel attack; also returns the best fitness after every generation
/// (index 0 is the initial population).
pub fn one_pixel_traced(
    net: &MaskedNetwork,
    x: &[f64],
    y: usize,
    cfg: &DEConfig,
    original_index: usize,
) -> Result<(AdversarialExample, Vec<f64>)> {
    cfg.validate()?;
    if x.len() != IMAGE_SIDE * IMAGE_SIDE {
        return Err(Error::DimensionMismatch {
            expected: IMAGE_SIDE * IMAGE_SIDE,
            got: x.len(),
        });
    }
    let mut rng = rng_from_seed(cfg.seed);
    let population: Vec<PixelCandidate> = (0..cfg.pop_size).map(|_| random_candidate(&mut rng)).collect();
    let mut evaluate = |c: &[PixelCandidate]| score_candidates(net, x, y, c);
    let scores = evaluate(&population)?;
    let mut current = Generation {
        population,
        fitness: scores.iter().map(|s| s.0).collect(),
        flipped: scores.iter().map(|s| s.1).collect(),
    };
    let mut trace = vec![current.best_fitness()];
    let mut generations = 0;
    while generations < cfg.max_iter && !current.flipped.iter().any(|&f| f) {
        current = de_evolve(&current, &mut evaluate, cfg, &mut rng)?;
        generations += 1;
        trace.push(current.best_fitness());
    }
    let best = current.population[current.champion()];
    let image = apply_candidate(x, best);
    let probs = net.forward(&image)?.probs_of(0);
    let predicted = argmax_of(probs.iter().copied());
    Ok((
        AdversarialExample {
            original_index,
            perturbed_image: image,
            original_label: y,
            predicted_label: predicted,
            success: predicted != y,
            confidence: probs[predicted],
            epsilon_used: None,
            candidate: Some(best),
            generations_used: Some(generations),
        },
        trace,
    ))
}

pub fn one_pixel(net: &MaskedNetwork, x: &[f64], y: usize, cfg: &DEConfig, original_index: usize) -> Result<AdversarialExample> {
    one_pixel_traced(net, x, y, cfg, original_index).map(|(ex, _)| ex)
}
