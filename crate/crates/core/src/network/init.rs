use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use super::MaskedNetwork;
use crate::error::{Error, Result};
use crate::seed::rng_from_seed;

/// The six weight initializations of the study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum InitMethod {
    /// Glorot normal, gain sqrt(2).
    #[serde(rename = "G_N")]
    GlorotNormal,
    /// Glorot uniform, gain sqrt(2).
    #[serde(rename = "G_U")]
    GlorotUniform,
    /// He normal, fan-in mode, gain sqrt(2).
    #[serde(rename = "He_N")]
    HeNormal,
    /// He uniform, fan-in mode, gain sqrt(2).
    #[serde(rename = "He_U")]
    HeUniform,
    /// N(0, 0.1).
    #[serde(rename = "N")]
    Normal,
    /// U(-0.1, 0.1).
    #[serde(rename = "U")]
    Uniform,
}

impl InitMethod {
    pub const ALL: [InitMethod; 6] = [
        InitMethod::GlorotNormal,
        InitMethod::GlorotUniform,
        InitMethod::HeNormal,
        InitMethod::HeUniform,
        InitMethod::Normal,
        InitMethod::Uniform,
    ];

    pub fn code(self) -> &'static str {
        match self {
            InitMethod::GlorotNormal => "G_N",
            InitMethod::GlorotUniform => "G_U",
            InitMethod::HeNormal => "He_N",
            InitMethod::HeUniform => "He_U",
            InitMethod::Normal => "N",
            InitMethod::Uniform => "U",
        }
    }
}

impl fmt::Display for InitMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for InitMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        InitMethod::ALL
            .into_iter()
            .find(|m| m.code().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidParameter(format!("unknown init method {s:?}")))
    }
}

const GAIN: f64 = std::f64::consts::SQRT_2;

enum Sampler {
    Normal(Normal<f64>),
    Uniform(Uniform<f64>),
}

impl Sampler {
    /// Fans follow the dense matrix shape of the group, `rows x cols =
    /// fan_out x fan_in`.
    fn for_shape(method: InitMethod, fan_out: usize, fan_in: usize) -> Self {
        let (fi, fo) = (fan_in.max(1) as f64, fan_out.max(1) as f64);
        let normal = |std: f64| Sampler::Normal(Normal::new(0.0, std).expect("finite std"));
        let uniform = |bound: f64| Sampler::Uniform(Uniform::new_inclusive(-bound, bound).expect("finite bound"));
        match method {
            InitMethod::GlorotNormal => normal(GAIN * (2.0 / (fi + fo)).sqrt()),
            InitMethod::GlorotUniform => uniform(GAIN * (6.0 / (fi + fo)).sqrt()),
            InitMethod::HeNormal => normal(GAIN / fi.sqrt()),
            InitMethod::HeUniform => uniform(GAIN * (3.0 / fi).sqrt()),
            InitMethod::Normal => normal(0.1),
            InitMethod::Uniform => uniform(0.1),
        }
    }

    fn fill(&self, rng: &mut crate::seed::Rng, w: &mut Array2<f64>) {
        match self {
            Sampler::Normal(d) => w.iter_mut().for_each(|v| *v = d.sample(rng)),
            Sampler::Uniform(d) => w.iter_mut().for_each(|v| *v = d.sample(rng)),
        }
    }
}

/// Samples every group's weights, zeroes masked positions and resets biases
/// to zero. Deterministic given `seed`.
pub fn init_weights(net: &mut MaskedNetwork, method: InitMethod, seed: u64) {
    let mut rng = rng_from_seed(seed);
    net.for_each_param_mut(
        |_, w, mask| {
            let (rows, cols) = w.dim();
            Sampler::for_shape(method, rows, cols).fill(&mut rng, w);
            w.zip_mut_with(mask, |v, &m| {
                if !m {
                    *v = 0.0;
                }
            });
        },
        |_, b| b.fill(0.0),
    );
}
