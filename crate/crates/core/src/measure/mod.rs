//! Robustness measures over attack outcomes and their rank correlation
//! with graph properties.
//!
//! Outcomes passed to these functions must already be restricted to images
//! the model classified correctly before the attack.

mod stats;
mod table;

use serde::{Deserialize, Serialize};

use crate::attack::{AttackKind, AttackOutcome};
use crate::error::{Error, Result};

pub use stats::{average_ranks, cohen_label, iqr_filter, kendall, quantile_sorted, spearman, CohenLabel, IqrSplit};
pub use table::{
    aggregate_runs, Aggregate, CorrelationCell, CorrelationTable, GraphProperty, MeasureColumn, MeasureKind, OutlierGranularity,
    RunValue,
};

/// Fraction of attacked (originally correct) images whose label flipped.
pub fn error_rate(outcomes: &[AttackOutcome]) -> Result<f64> {
    if outcomes.is_empty() {
        return Err(Error::Undefined("error rate over zero correctly classified images".into()));
    }
    Ok(outcomes.iter().filter(|o| o.success).count() as f64 / outcomes.len() as f64)
}

/// Mean predicted-class probability over successful examples only.
pub fn avg_confidence(outcomes: &[AttackOutcome]) -> Option<f64> {
    mean(outcomes.iter().filter(|o| o.success).map(|o| o.confidence))
}

/// Mean `epsilon_used` over successful searches and the number of censored
/// searches excluded from it.
pub fn avg_epsilon(outcomes: &[AttackOutcome]) -> (Option<f64>, usize) {
    let censored = outcomes.iter().filter(|o| !o.success).count();
    (mean(outcomes.iter().filter(|o| o.success).filter_map(|o| o.epsilon_used)), censored)
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Aggregate measures for one (model, init, attack).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessRecord {
    pub model_id: String,
    pub init_method: String,
    pub attack: AttackKind,
    pub error_rate: f64,
    pub avg_confidence: Option<f64>,
    /// Present only for the epsilon search.
    pub avg_epsilon: Option<f64>,
    pub n_attacked: usize,
    pub n_successful: usize,
    pub n_censored: usize,
}

impl RobustnessRecord {
    pub fn from_outcomes(model_id: &str, init_method: &str, attack: AttackKind, outcomes: &[AttackOutcome]) -> Result<Self> {
        let n_successful = outcomes.iter().filter(|o| o.success).count();
        let (avg_epsilon, n_censored) = match attack {
            AttackKind::FgsmSearch => avg_epsilon(outcomes),
            _ => (None, 0),
        };
        Ok(Self {
            model_id: model_id.to_string(),
            init_method: init_method.to_string(),
            attack,
            error_rate: error_rate(outcomes)?,
            avg_confidence: avg_confidence(outcomes),
            avg_epsilon,
            n_attacked: outcomes.len(),
            n_successful,
            n_censored,
        })
    }

    pub fn measure(&self, kind: MeasureKind) -> Option<f64> {
        match kind {
            MeasureKind::ErrorRate => Some(self.error_rate),
            MeasureKind::Confidence => self.avg_confidence,
            MeasureKind::AvgEpsilon => self.avg_epsilon,
        }
    }
}
