use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::graphs::property_value;
use super::manifest::ExperimentManifest;
use super::store::{append_jsonl, read_jsonl, ResultsStore};
use super::sweep::{attack_model, Datasets};
use crate::attack::write_outcomes_csv;
use crate::data::{IMAGE_PIXELS, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::graph::{compute_metrics, GraphMetrics};
use crate::measure::{CorrelationTable, GraphProperty, MeasureColumn, RobustnessRecord};
use crate::network::{init_weights, network_to_graph, prune_random, MaskedNetwork};
use crate::seed::{child_seed, derive_seed};
use crate::train::{train, EvalReport, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruningStepRecord {
    pub manifest_hash: String,
    pub master_seed: u64,
    /// 0 is the fully trained dense model.
    pub step: usize,
    pub hidden_edges: usize,
    pub pruned: usize,
    pub param_count: usize,
    pub metrics: GraphMetrics,
    pub eval: EvalReport,
    pub robustness: Vec<RobustnessRecord>,
    pub elapsed_secs: f64,
}

impl PruningStepRecord {
    pub fn property(&self, p: GraphProperty) -> f64 {
        property_value(&self.metrics, self.param_count, p)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PruningResult {
    pub steps: Vec<PruningStepRecord>,
    /// `None` when fewer than 3 steps make correlation meaningless.
    pub table: Option<CorrelationTable>,
}

fn measure_step(
    net: &MaskedNetwork,
    m: &ExperimentManifest,
    store: &ResultsStore,
    data: &Datasets,
    step: usize,
    pruned: usize,
    started: Instant,
) -> Result<PruningStepRecord> {
    let id = format!("step{step:02}");
    let attack_seed = derive_seed(m.master_seed, &["pruning", "attack", &id]);
    let report = attack_model(net, &data.test, m, attack_seed, &id, m.pruning.init_method.code())?;
    for (kind, rows) in &report.outcomes {
        write_outcomes_csv(&store.path(&format!("pruning/{id}_{}.csv", kind.name())), rows)?;
    }
    let hidden = network_to_graph(net)?.to_undirected();
    Ok(PruningStepRecord {
        manifest_hash: m.hash(),
        master_seed: m.master_seed,
        step,
        hidden_edges: net.hidden_connection_count(),
        pruned,
        param_count: net.param_count(),
        metrics: compute_metrics(&hidden),
        eval: report.eval,
        robustness: report.robustness,
        elapsed_secs: started.elapsed().as_secs_f64(),
    })
}

/// Step-wise properties against step-wise measures; no outlier filtering.
pub fn correlate_steps(steps: &[PruningStepRecord]) -> CorrelationTable {
    let props = steps
        .iter()
        .map(|s| (s.step.to_string(), GraphProperty::ALL.iter().map(|&p| (p, s.property(p))).collect()))
        .collect();
    let mut measures: BTreeMap<MeasureColumn, BTreeMap<String, f64>> = BTreeMap::new();
    for column in MeasureColumn::TABLE {
        let per_step = measures.entry(column).or_default();
        for s in steps {
            let value = s.robustness.iter().find(|r| r.attack == column.attack).and_then(|r| r.measure(column.measure));
            if let Some(v) = value {
                per_step.insert(s.step.to_string(), v);
            }
        }
    }
    CorrelationTable::compute(&props, &measures)
}

/// Trains the dense baseline, then repeatedly prunes a fraction of the
/// hidden-to-hidden connections, retrains with a fresh optimizer, and
/// measures accuracy, robustness and hidden-graph properties after every
/// step (step 0 included). Records go to `pruning/steps.jsonl`, tables to
/// `pruning/correlation_table.csv` and `pruning/correlation_long.csv`.
pub fn run_pruning_baseline(m: &ExperimentManifest, store: &ResultsStore, data: &Datasets) -> Result<PruningResult> {
    m.validate()?;
    let hash = m.hash();
    let log_path = store.path("pruning/steps.jsonl");
    let existing: Vec<PruningStepRecord> = read_jsonl(&log_path)?;
    if existing.iter().any(|s| s.manifest_hash == hash) {
        return Err(Error::Precondition(format!("pruning baseline already recorded for manifest {hash}")));
    }
    let cfg = &m.pruning;
    let mut net = MaskedNetwork::dense(IMAGE_PIXELS, &cfg.hidden, NUM_CLASSES)?;
    init_weights(&mut net, cfg.init_method, derive_seed(m.master_seed, &["pruning", "init"]));
    let train_seed = derive_seed(m.master_seed, &["pruning", "train"]);
    let prune_seed = derive_seed(m.master_seed, &["pruning", "prune"]);
    let started = Instant::now();
    let full = TrainConfig {
        epochs: m.epochs(),
        seed: train_seed,
        ..m.train.clone()
    };
    train(&mut net, &data.train, &full)?;
    let mut steps = vec![measure_step(&net, m, store, data, 0, 0, started)?];
    append_jsonl(&log_path, &steps[0])?;
    for k in 1..=cfg.steps {
        let started = Instant::now();
        let pruned = prune_random(&mut net, cfg.alpha, child_seed(prune_seed, "step", k as u64))?;
        let retrain = TrainConfig {
            epochs: m.retrain_epochs(),
            seed: child_seed(train_seed, "retrain", k as u64),
            ..m.train.clone()
        };
        train(&mut net, &data.train, &retrain)?;
        let record = measure_step(&net, m, store, data, k, pruned, started)?;
        log::info!("pruning step {k}: {} hidden edges, macro-F1 {:.4}", record.hidden_edges, record.eval.macro_f1);
        append_jsonl(&log_path, &record)?;
        steps.push(record);
    }
    let table = (steps.len() >= 3).then(|| correlate_steps(&steps));
    if let Some(t) = &table {
        t.write_table_csv(&store.path("pruning/correlation_table.csv"))?;
        t.write_long_csv(&store.path("pruning/correlation_long.csv"))?;
    }
    Ok(PruningResult { steps, table })
}
