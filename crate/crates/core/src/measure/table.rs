//! Per-model aggregation with outlier filtering, and the property-by-measure
//! correlation table.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::stats::{cohen_label, iqr_filter, kendall, spearman, CohenLabel};
use crate::attack::AttackKind;
use crate::error::{Error, Result};

/// Graph properties entering the correlation analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphProperty {
    Parameters,
    Density,
    AvgPathLength,
    AvgEccentricity,
    AvgBetweenness,
}

impl GraphProperty {
    pub const ALL: [GraphProperty; 5] = [
        GraphProperty::Parameters,
        GraphProperty::Density,
        GraphProperty::AvgPathLength,
        GraphProperty::AvgEccentricity,
        GraphProperty::AvgBetweenness,
    ];

    pub fn key(self) -> &'static str {
        match self {
            GraphProperty::Parameters => "parameters",
            GraphProperty::Density => "density",
            GraphProperty::AvgPathLength => "avg_path_length",
            GraphProperty::AvgEccentricity => "avg_eccentricity",
            GraphProperty::AvgBetweenness => "avg_betweenness",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            GraphProperty::Parameters => "Number of parameters",
            GraphProperty::Density => "Density",
            GraphProperty::AvgPathLength => "Average path length",
            GraphProperty::AvgEccentricity => "Average eccentricity",
            GraphProperty::AvgBetweenness => "Average betweenness",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureKind {
    ErrorRate,
    Confidence,
    AvgEpsilon,
}

/// One robustness column: which attack and which measure of it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MeasureColumn {
    pub attack: AttackKind,
    pub measure: MeasureKind,
}

impl MeasureColumn {
    /// FGSM error rate and confidence come from the fixed-epsilon attack,
    /// the mean epsilon from the search.
    pub const TABLE: [MeasureColumn; 5] = [
        MeasureColumn {
            attack: AttackKind::Fgsm,
            measure: MeasureKind::ErrorRate,
        },
        MeasureColumn {
            attack: AttackKind::Fgsm,
            measure: MeasureKind::Confidence,
        },
        MeasureColumn {
            attack: AttackKind::FgsmSearch,
            measure: MeasureKind::AvgEpsilon,
        },
        MeasureColumn {
            attack: AttackKind::OnePixel,
            measure: MeasureKind::ErrorRate,
        },
        MeasureColumn {
            attack: AttackKind::OnePixel,
            measure: MeasureKind::Confidence,
        },
    ];

    pub fn label(self) -> &'static str {
        match (self.attack, self.measure) {
            (AttackKind::OnePixel, MeasureKind::ErrorRate) => "One Pixel error rate",
            (AttackKind::OnePixel, MeasureKind::Confidence) => "One Pixel confidence",
            (AttackKind::OnePixel, MeasureKind::AvgEpsilon) => "One Pixel eps_bar",
            (_, MeasureKind::ErrorRate) => "FGSM error rate",
            (_, MeasureKind::Confidence) => "FGSM confidence",
            (_, MeasureKind::AvgEpsilon) => "FGSM eps_bar",
        }
    }

    pub fn measure_key(self) -> &'static str {
        match self.measure {
            MeasureKind::ErrorRate => "error_rate",
            MeasureKind::Confidence => "confidence",
            MeasureKind::AvgEpsilon => "avg_epsilon",
        }
    }
}

/// Outlier granularity: drop single runs, or every run of a model that has
/// any outlying run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutlierGranularity {
    #[default]
    Run,
    Model,
}

/// One measure value of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunValue {
    pub model_id: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    /// Mean of surviving runs per model.
    pub means: BTreeMap<String, f64>,
    pub total_runs: usize,
    pub discarded_runs: usize,
    /// Models left with no surviving run.
    pub dropped_models: Vec<String>,
    /// False when fewer than four runs made the fences undefined.
    pub filtered: bool,
}

/// Tukey-filters the pooled run distribution of one measure, then averages
/// the surviving runs per model.
pub fn aggregate_runs(runs: &[RunValue], granularity: OutlierGranularity) -> Result<Aggregate> {
    let values: Vec<f64> = runs.iter().map(|r| r.value).collect();
    let mut keep = vec![true; runs.len()];
    let filtered = runs.len() >= 4;
    if filtered {
        let split = iqr_filter(&values)?;
        match granularity {
            OutlierGranularity::Run => split.outliers.iter().for_each(|&i| keep[i] = false),
            OutlierGranularity::Model => {
                let bad: Vec<&str> = split.outliers.iter().map(|&i| runs[i].model_id.as_str()).collect();
                for (k, r) in keep.iter_mut().zip(runs) {
                    *k = !bad.contains(&r.model_id.as_str());
                }
            }
        }
    } else if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("non-finite run value".into()));
    }
    let mut sums: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for r in runs {
        sums.entry(r.model_id.clone()).or_insert((0.0, 0));
    }
    for (r, _) in runs.iter().zip(&keep).filter(|(_, k)| **k) {
        let e = sums.get_mut(&r.model_id).expect("seeded above");
        e.0 += r.value;
        e.1 += 1;
    }
    let mut means = BTreeMap::new();
    let mut dropped_models = Vec::new();
    for (model, (sum, n)) in sums {
        if n == 0 {
            log::info!("model {model} dropped: every run is an outlier");
            dropped_models.push(model);
        } else {
            means.insert(model, sum / n as f64);
        }
    }
    Ok(Aggregate {
        means,
        total_runs: runs.len(),
        discarded_runs: keep.iter().filter(|k| !**k).count(),
        dropped_models,
        filtered,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationCell {
    pub property: GraphProperty,
    pub column: MeasureColumn,
    pub spearman_rho: Option<f64>,
    pub kendall_tau: Option<f64>,
    pub cohen_label: Option<CohenLabel>,
    pub n: usize,
    /// Why a coefficient is missing.
    pub note: Option<String>,
}

impl CorrelationCell {
    fn compute(property: GraphProperty, column: MeasureColumn, xs: &[f64], ys: &[f64]) -> Self {
        let mut cell = CorrelationCell {
            property,
            column,
            spearman_rho: None,
            kendall_tau: None,
            cohen_label: None,
            n: xs.len(),
            note: None,
        };
        if xs.len() < 3 {
            cell.note = Some(format!("fewer than 3 models ({})", xs.len()));
            return cell;
        }
        match (spearman(xs, ys), kendall(xs, ys)) {
            (Ok(rho), Ok(tau)) => {
                cell.spearman_rho = Some(rho);
                cell.kendall_tau = Some(tau);
                cell.cohen_label = Some(cohen_label(rho));
            }
            (Err(e), _) | (_, Err(e)) => cell.note = Some(e.to_string()),
        }
        cell
    }

    fn table_text(&self) -> String {
        match (self.spearman_rho, self.kendall_tau) {
            (Some(r), Some(t)) => format!("rho={r:.2} tau={t:.2}"),
            _ => format!("flagged: {}", self.note.as_deref().unwrap_or("missing")),
        }
    }
}

/// Rank correlations between every property and every measure column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationTable {
    pub cells: Vec<CorrelationCell>,
}

impl CorrelationTable {
    /// `properties[model][property]` against `measures[column][model]`; each
    /// cell uses the models present in that column.
    pub fn compute(
        properties: &BTreeMap<String, BTreeMap<GraphProperty, f64>>,
        measures: &BTreeMap<MeasureColumn, BTreeMap<String, f64>>,
    ) -> Self {
        let empty = BTreeMap::new();
        let mut cells = Vec::new();
        for property in GraphProperty::ALL {
            for column in MeasureColumn::TABLE {
                let per_model = measures.get(&column).unwrap_or(&empty);
                let (xs, ys): (Vec<f64>, Vec<f64>) = per_model
                    .iter()
                    .filter_map(|(m, &y)| properties.get(m).and_then(|p| p.get(&property)).map(|&x| (x, y)))
                    .unzip();
                cells.push(CorrelationCell::compute(property, column, &xs, &ys));
            }
        }
        Self { cells }
    }

    pub fn cell(&self, property: GraphProperty, column: MeasureColumn) -> Option<&CorrelationCell> {
        self.cells.iter().find(|c| c.property == property && c.column == column)
    }

    /// The `k` properties with the largest |rho| for a column.
    pub fn strongest(&self, column: MeasureColumn, k: usize) -> Vec<&CorrelationCell> {
        let mut defined: Vec<&CorrelationCell> = self
            .cells
            .iter()
            .filter(|c| c.column == column && c.spearman_rho.is_some())
            .collect();
        defined.sort_by(|a, b| {
            let (ra, rb) = (a.spearman_rho.unwrap().abs(), b.spearman_rho.unwrap().abs());
            rb.total_cmp(&ra).then(a.property.cmp(&b.property))
        });
        defined.truncate(k);
        defined
    }

    /// One row per property, one column per measure, cells `rho=.. tau=..`.
    pub fn write_table_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["property".to_string()];
        header.extend(MeasureColumn::TABLE.iter().map(|c| c.label().to_string()));
        w.write_record(&header)?;
        for property in GraphProperty::ALL {
            let mut row = vec![property.label().to_string()];
            for column in MeasureColumn::TABLE {
                row.push(self.cell(property, column).map_or_else(|| "flagged: missing".into(), |c| c.table_text()));
            }
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// One row per cell with full precision.
    pub fn write_long_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["property", "attack", "measure", "spearman_rho", "kendall_tau", "cohen_label", "n", "note"])?;
        let opt = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
        for c in &self.cells {
            w.write_record([
                c.property.key(),
                c.column.attack.name(),
                c.column.measure_key(),
                &opt(c.spearman_rho),
                &opt(c.kendall_tau),
                c.cohen_label.map_or("", |l| l.as_str()),
                &c.n.to_string(),
                c.note.as_deref().unwrap_or(""),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Text summary naming the two strongest properties per measure.
    pub fn write_summary(&self, out: &mut impl Write) -> std::io::Result<()> {
        for column in MeasureColumn::TABLE {
            let top = self.strongest(column, 2);
            if top.is_empty() {
                writeln!(out, "{}: no defined coefficient", column.label())?;
                continue;
            }
            let parts: Vec<String> = top
                .iter()
                .map(|c| {
                    format!(
                        "{} (rho={:.2}, tau={:.2}, {})",
                        c.property.label(),
                        c.spearman_rho.unwrap(),
                        c.kendall_tau.unwrap(),
                        c.cohen_label.unwrap()
                    )
                })
                .collect();
            writeln!(out, "{}: {}", column.label(), parts.join("; "))?;
        }
        Ok(())
    }
}
