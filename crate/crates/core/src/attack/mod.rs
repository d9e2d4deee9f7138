//! Adversarial attacks: FGSM (fixed epsilon and epsilon search) and the
//! one-pixel attack driven by differential evolution.

mod fgsm;
mod one_pixel;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use fgsm::{fgsm, fgsm_batch, fgsm_eps_search, EpsSearchConfig};
pub use one_pixel::{apply_candidate, de_evolve, one_pixel, one_pixel_traced, pixel_fitness, random_candidate, DEConfig, Generation, PixelCandidate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    Fgsm,
    FgsmSearch,
    OnePixel,
}

impl AttackKind {
    pub const ALL: [AttackKind; 3] = [AttackKind::Fgsm, AttackKind::FgsmSearch, AttackKind::OnePixel];

    pub fn name(self) -> &'static str {
        match self {
            AttackKind::Fgsm => "fgsm",
            AttackKind::FgsmSearch => "fgsm_search",
            AttackKind::OnePixel => "one_pixel",
        }
    }
}

impl std::str::FromStr for AttackKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AttackKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown attack {s:?}")))
    }
}

/// Result of attacking one image.
#[derive(Debug, Clone, PartialEq)]
pub struct AdversarialExample {
    pub original_index: usize,
    pub perturbed_image: Vec<f64>,
    pub original_label: usize,
    pub predicted_label: usize,
    /// `predicted_label != original_label`.
    pub success: bool,
    /// Probability the network assigns to `predicted_label`.
    pub confidence: f64,
    pub epsilon_used: Option<f64>,
    pub candidate: Option<PixelCandidate>,
    pub generations_used: Option<usize>,
}

impl AdversarialExample {
    pub fn outcome(&self) -> AttackOutcome {
        AttackOutcome {
            image_index: self.original_index,
            success: self.success,
            confidence: self.confidence,
            epsilon_used: self.epsilon_used,
            p_x: self.candidate.map(|c| c.p_x),
            p_y: self.candidate.map(|c| c.p_y),
            intensity: self.candidate.map(|c| c.intensity),
            generations_used: self.generations_used,
        }
    }
}

/// One CSV row of per-image attack results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackOutcome {
    pub image_index: usize,
    pub success: bool,
    pub confidence: f64,
    pub epsilon_used: Option<f64>,
    pub p_x: Option<u32>,
    pub p_y: Option<u32>,
    #[serde(rename = "I")]
    pub intensity: Option<u32>,
    pub generations_used: Option<usize>,
}

pub fn write_outcomes_csv(path: &Path, outcomes: &[AttackOutcome]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for o in outcomes {
        w.serialize(o)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_outcomes_csv(path: &Path) -> Result<Vec<AttackOutcome>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}
