use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;

use serde::{Deserialize, Serialize};

use super::graphs::GraphEntry;
use super::manifest::ExperimentManifest;
use super::pruning::PruningStepRecord;
use super::store::{read_jsonl, ResultsStore, RunRecord};
use crate::attack::AttackKind;
use crate::error::{Error, Result};
use crate::measure::{aggregate_runs, CorrelationTable, GraphProperty, MeasureColumn, OutlierGranularity, RunValue};

/// Filtering bookkeeping for one measure column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnAggregate {
    pub column: MeasureColumn,
    pub total_runs: usize,
    pub discarded_runs: usize,
    pub missing_runs: usize,
    pub dropped_models: Vec<String>,
    pub surviving_models: usize,
    pub filtered: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub manifest_hash: String,
    pub granularity: OutlierGranularity,
    pub aggregates: Vec<ColumnAggregate>,
    pub table: CorrelationTable,
}

fn properties_of(graphs: &[GraphEntry]) -> BTreeMap<String, BTreeMap<GraphProperty, f64>> {
    graphs
        .iter()
        .map(|e| (e.id().to_string(), GraphProperty::ALL.iter().map(|&p| (p, e.property(p))).collect()))
        .collect()
}

/// Per-model means of every measure column after outlier filtering,
/// correlated with the graph properties.
pub fn correlate_runs(
    graphs: &[GraphEntry],
    runs: &[RunRecord],
    manifest_hash: &str,
    granularity: OutlierGranularity,
) -> Result<CorrelationReport> {
    let ok: Vec<&RunRecord> = runs.iter().filter(|r| r.manifest_hash == manifest_hash && r.is_ok()).collect();
    let mut measures = BTreeMap::new();
    let mut aggregates = Vec::new();
    for column in MeasureColumn::TABLE {
        let mut values = Vec::new();
        let mut missing = 0;
        for r in &ok {
            match r.robustness(column.attack).and_then(|rec| rec.measure(column.measure)) {
                Some(value) => values.push(RunValue {
                    model_id: r.graph_id.clone(),
                    value,
                }),
                None => missing += 1,
            }
        }
        let agg = aggregate_runs(&values, granularity)?;
        aggregates.push(ColumnAggregate {
            column,
            total_runs: agg.total_runs,
            discarded_runs: agg.discarded_runs,
            missing_runs: missing,
            dropped_models: agg.dropped_models.clone(),
            surviving_models: agg.means.len(),
            filtered: agg.filtered,
        });
        measures.insert(column, agg.means);
    }
    let surviving = aggregates.iter().map(|a| a.surviving_models).max().unwrap_or(0);
    if surviving < 3 {
        return Err(Error::InsufficientData(format!(
            "correlation needs at least 3 surviving models, have {surviving} ({} successful runs)",
            ok.len()
        )));
    }
    let props = properties_of(graphs);
    Ok(CorrelationReport {
        manifest_hash: manifest_hash.to_string(),
        granularity,
        aggregates,
        table: CorrelationTable::compute(&props, &measures),
    })
}

/// Reads the store, correlates, and writes `correlation_table.csv`,
/// `correlation_long.csv` and `correlation.json`.
pub fn correlate(store: &ResultsStore, granularity: Option<OutlierGranularity>) -> Result<CorrelationReport> {
    let m = store.load_manifest()?;
    let (graphs, _) = store.load_graphs()?;
    let runs = store.read_runs()?;
    let report = correlate_runs(&graphs, &runs, &m.hash(), granularity.unwrap_or(m.outlier_granularity))?;
    report.table.write_table_csv(&store.path("correlation_table.csv"))?;
    report.table.write_long_csv(&store.path("correlation_long.csv"))?;
    let path = store.path("correlation.json");
    fs::write(&path, serde_json::to_string_pretty(&report)?).map_err(|e| Error::io(&path, e))?;
    Ok(report)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len().max(1) as f64
}

/// Plain-text summary of everything in the store; written to `report.txt`.
pub fn report(store: &ResultsStore) -> Result<String> {
    let m: ExperimentManifest = store.load_manifest()?;
    let hash = m.hash();
    let mut out = String::new();
    let _ = writeln!(out, "experiment report");
    let _ = writeln!(out, "manifest {hash}, master seed {}, scale {}", m.master_seed, m.scale.mode);
    let _ = writeln!(
        out,
        "training: {} epochs, {} init methods; FGSM eps {} (clipped to [0,1]); DE pop {} iter {}; one-pixel images {}",
        m.epochs(),
        m.init_methods.len(),
        m.attacks.fgsm_eps,
        m.de_config().pop_size,
        m.de_config().max_iter,
        m.one_pixel_images()
    );
    if let Ok((graphs, summary)) = store.load_graphs() {
        let _ = writeln!(
            out,
            "graphs: {} accepted of {} candidates ({} below, {} above the parameter range){}",
            graphs.len(),
            summary.candidates,
            summary.rejected_below,
            summary.rejected_above,
            if summary.exhausted { ", search exhausted" } else { "" }
        );
    }
    let runs: Vec<RunRecord> = store.read_runs()?.into_iter().filter(|r| r.manifest_hash == hash).collect();
    let failed = runs.iter().filter(|r| !r.is_ok()).count();
    let _ = writeln!(out, "runs: {} recorded, {failed} failed", runs.len());
    let mut f1: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for r in runs.iter().filter(|r| r.is_ok()) {
        if let Some(e) = &r.eval {
            f1.entry(r.init_method.code().to_string()).or_default().push(e.macro_f1);
        }
    }
    for (init, v) in &f1 {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let _ = writeln!(out, "  {init}: macro-F1 mean {:.4} range [{lo:.4}, {hi:.4}] over {} runs", mean(v), v.len());
    }
    match (runs.is_empty(), correlate(store, None)) {
        (true, _) => {}
        (false, Ok(c)) => {
            let _ = writeln!(out, "\ncorrelations ({:?}-level outlier filter), strongest two per measure:", c.granularity);
            for a in &c.aggregates {
                let _ = writeln!(
                    out,
                    "  {}: {} models, {} of {} runs discarded, {} missing",
                    a.column.label(),
                    a.surviving_models,
                    a.discarded_runs,
                    a.total_runs,
                    a.missing_runs
                );
            }
            let mut buf = Vec::new();
            c.table.write_summary(&mut buf).map_err(|e| Error::io(store.root(), e))?;
            out.push_str(&String::from_utf8_lossy(&buf));
        }
        (false, Err(e)) => {
            let _ = writeln!(out, "\ncorrelations withheld: {e}");
        }
    }
    let steps: Vec<PruningStepRecord> = read_jsonl(&store.path("pruning/steps.jsonl"))?;
    let steps: Vec<_> = steps.into_iter().filter(|s| s.manifest_hash == hash).collect();
    if !steps.is_empty() {
        let _ = writeln!(out, "\npruning baseline: {} steps", steps.len());
        for s in &steps {
            let _ = writeln!(
                out,
                "  step {:2}: hidden edges {:6}, macro-F1 {:.4}, FGSM error rate {:.4}",
                s.step,
                s.hidden_edges,
                s.eval.macro_f1,
                s.robustness.iter().find(|r| r.attack == AttackKind::Fgsm).map_or(f64::NAN, |r| r.error_rate)
            );
        }
    }
    let path = store.path("report.txt");
    fs::write(&path, &out).map_err(|e| Error::io(&path, e))?;
    Ok(out)
}
