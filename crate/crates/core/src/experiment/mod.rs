//! End-to-end studies: graph dataset search, the (graph, init) training and
//! attack sweep, correlation analysis, the pruning baseline and the text
//! report. All outputs live under one results directory.

mod analysis;
mod graphs;
mod manifest;
mod pruning;
mod store;
mod sweep;

pub use analysis::{correlate, correlate_runs, report, ColumnAggregate, CorrelationReport};
pub use graphs::{build_graph_dataset, property_value, GraphDatasetSummary, GraphEntry};
pub use manifest::{AttackSettings, ExperimentManifest, Grid, PruningConfig, Scale, ScaleMode, MANIFEST_SCHEMA_VERSION};
pub use pruning::{correlate_steps, run_pruning_baseline, PruningResult, PruningStepRecord};
pub use store::{append_jsonl, read_jsonl, JsonlWriter, ResultsStore, RunRecord, RunStatus, TaskSeeds};
pub use sweep::{attack_model, attack_model_with, run_sweep, run_task, task_seeds, AttackReport, Datasets, SweepSummary};

/// Generates the graph dataset and stores it with the manifest.
pub fn gen_graphs(m: &ExperimentManifest, store: &ResultsStore) -> crate::Result<GraphDatasetSummary> {
    let (entries, summary) = build_graph_dataset(m)?;
    store.save_manifest(m)?;
    store.save_graphs(&entries, &summary)?;
    Ok(summary)
}
