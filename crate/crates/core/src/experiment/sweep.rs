use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::graphs::GraphEntry;
use super::manifest::ExperimentManifest;
use super::store::{model_key, now_unix, JsonlWriter, ResultsStore, RunRecord, RunStatus, TaskSeeds};
use crate::attack::{fgsm_batch, fgsm_eps_search, one_pixel, write_outcomes_csv, AdversarialExample, AttackKind, AttackOutcome, DEConfig};
use crate::data::{load_mnist, Dataset, Split, IMAGE_PIXELS, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::graph::{layer_dag, to_dag};
use crate::measure::RobustnessRecord;
use crate::network::{build_network, init_weights, CheckpointMeta, InitMethod, MaskedNetwork};
use crate::seed::{child_seed, derive_seed};
use crate::train::{predict, train, EvalReport, TrainConfig};

/// Training and test sets after scaling.
#[derive(Debug, Clone)]
pub struct Datasets {
    pub train: Dataset,
    pub test: Dataset,
}

impl Datasets {
    /// Loads MNIST from `dir` and keeps the leading images the manifest's
    /// scale asks for.
    pub fn load(m: &ExperimentManifest, dir: &Path) -> Result<Self> {
        let train = load_mnist(dir, Split::Train)?;
        let test = load_mnist(dir, Split::Test)?;
        Ok(Self::scaled(m, train, test))
    }

    pub fn scaled(m: &ExperimentManifest, train: Dataset, test: Dataset) -> Self {
        let (ntr, nte) = (m.train_images(train.len()), m.test_images(test.len()));
        Self {
            train: train.head(ntr),
            test: test.head(nte),
        }
    }
}

/// Clean evaluation and all three attacks on one trained model.
#[derive(Debug, Clone)]
pub struct AttackReport {
    pub eval: EvalReport,
    pub robustness: Vec<RobustnessRecord>,
    pub outcomes: BTreeMap<AttackKind, Vec<AttackOutcome>>,
    pub one_pixel_subset: Vec<usize>,
}

fn image(ds: &Dataset, i: usize) -> Vec<f64> {
    ds.image(i).to_vec()
}

fn run_attack(
    net: &MaskedNetwork,
    test: &Dataset,
    m: &ExperimentManifest,
    kind: AttackKind,
    correct: &[usize],
    attack_seed: u64,
) -> Result<Vec<AdversarialExample>> {
    match kind {
        AttackKind::Fgsm => fgsm_batch(net, test, correct, m.attacks.fgsm_eps),
        AttackKind::FgsmSearch => correct
            .par_iter()
            .map(|&i| fgsm_eps_search(net, &image(test, i), test.label(i), &m.attacks.eps_search, i))
            .collect(),
        AttackKind::OnePixel => {
            let de = m.de_config();
            correct
                .par_iter()
                .take(m.one_pixel_images())
                .map(|&i| {
                    let cfg = DEConfig {
                        seed: child_seed(attack_seed, "one_pixel", i as u64),
                        ..de
                    };
                    one_pixel(net, &image(test, i), test.label(i), &cfg, i)
                })
                .collect()
        }
    }
}

/// Evaluates `net` on `test`, then runs the requested attacks on the
/// correctly classified images: FGSM and the epsilon search on all of them,
/// the one-pixel attack on the first ones in dataset order. Each one-pixel
/// image gets its own DE stream derived from `attack_seed` and its index.
pub fn attack_model_with(
    net: &MaskedNetwork,
    test: &Dataset,
    m: &ExperimentManifest,
    kinds: &[AttackKind],
    attack_seed: u64,
    model_id: &str,
    init_label: &str,
) -> Result<AttackReport> {
    let predicted = predict(net, test)?;
    let eval = EvalReport::from_predictions(test.labels(), &predicted, NUM_CLASSES)?;
    let correct: Vec<usize> = (0..test.len()).filter(|&i| predicted[i] == test.label(i)).collect();
    if correct.is_empty() {
        return Err(Error::Undefined(format!("model {model_id} classifies no test image correctly")));
    }
    let mut outcomes = BTreeMap::new();
    let mut robustness = Vec::new();
    let mut one_pixel_subset = Vec::new();
    for &kind in kinds {
        let examples = run_attack(net, test, m, kind, &correct, attack_seed)?;
        if kind == AttackKind::OnePixel {
            one_pixel_subset = examples.iter().map(|e| e.original_index).collect();
        }
        let rows: Vec<AttackOutcome> = examples.iter().map(|e| e.outcome()).collect();
        robustness.push(RobustnessRecord::from_outcomes(model_id, init_label, kind, &rows)?);
        outcomes.insert(kind, rows);
    }
    Ok(AttackReport {
        eval,
        robustness,
        outcomes,
        one_pixel_subset,
    })
}

/// [`attack_model_with`] for all three attacks.
pub fn attack_model(
    net: &MaskedNetwork,
    test: &Dataset,
    m: &ExperimentManifest,
    attack_seed: u64,
    model_id: &str,
    init_label: &str,
) -> Result<AttackReport> {
    attack_model_with(net, test, m, &AttackKind::ALL, attack_seed, model_id, init_label)
}

pub fn task_seeds(master: u64, graph_id: &str, init: InitMethod) -> TaskSeeds {
    let s = |stage: &str| derive_seed(master, &[graph_id, init.code(), stage]);
    TaskSeeds {
        init: s("init"),
        train: s("train"),
        attack: s("attack"),
    }
}

struct TaskOutput {
    param_count: usize,
    final_loss: Option<f64>,
    report: AttackReport,
}

fn run_task_inner(
    m: &ExperimentManifest,
    store: &ResultsStore,
    entry: &GraphEntry,
    init: InitMethod,
    data: &Datasets,
    seeds: TaskSeeds,
) -> Result<TaskOutput> {
    let key = model_key(entry.id(), init);
    let ld = layer_dag(&to_dag(&entry.record.graph()?))?;
    let mut net = build_network(&ld, IMAGE_PIXELS, NUM_CLASSES)?;
    init_weights(&mut net, init, seeds.init);
    let cfg = TrainConfig {
        epochs: m.epochs(),
        seed: seeds.train,
        ..m.train.clone()
    };
    let history = train(&mut net, &data.train, &cfg)?;
    history.write_csv(&store.history_path(&key))?;
    let meta = CheckpointMeta {
        seeds: [("init", seeds.init), ("train", seeds.train), ("attack", seeds.attack)]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect(),
        init_method: Some(init.code().to_string()),
    };
    net.save_checkpoint(&store.checkpoint_path(&key), &meta)?;
    let report = attack_model(&net, &data.test, m, seeds.attack, entry.id(), init.code())?;
    for (kind, rows) in &report.outcomes {
        write_outcomes_csv(&store.outcomes_path(&key, *kind), rows)?;
    }
    Ok(TaskOutput {
        param_count: net.param_count(),
        final_loss: history.epochs.last().map(|e| e.loss),
        report,
    })
}

/// Builds, trains, evaluates and attacks one (graph, init) model. Failures
/// are returned as a failed record rather than an error.
pub fn run_task(m: &ExperimentManifest, store: &ResultsStore, entry: &GraphEntry, init: InitMethod, data: &Datasets) -> RunRecord {
    let started = Instant::now();
    let seeds = task_seeds(m.master_seed, entry.id(), init);
    let mut record = RunRecord {
        manifest_hash: m.hash(),
        master_seed: m.master_seed,
        scale_mode: m.scale.mode,
        graph_id: entry.id().to_string(),
        init_method: init,
        seeds,
        status: RunStatus::Ok,
        param_count: None,
        final_loss: None,
        eval: None,
        robustness: Vec::new(),
        one_pixel_subset: Vec::new(),
        started_unix: now_unix(),
        elapsed_secs: 0.0,
    };
    match run_task_inner(m, store, entry, init, data, seeds) {
        Ok(out) => {
            record.param_count = Some(out.param_count);
            record.final_loss = out.final_loss;
            record.eval = Some(out.report.eval);
            record.robustness = out.report.robustness;
            record.one_pixel_subset = out.report.one_pixel_subset;
        }
        Err(e) => {
            log::error!("task {} / {} failed: {e}", entry.id(), init);
            record.status = RunStatus::Failed { error: e.to_string() };
        }
    }
    record.elapsed_secs = started.elapsed().as_secs_f64();
    record
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub executed: usize,
    pub skipped: usize,
    pub failed: usize,
}

/// Runs every (graph, init) task not yet recorded for this manifest on a
/// pool of `workers` threads. Without `resume`, an existing record for the
/// same manifest is an error.
pub fn run_sweep(m: &ExperimentManifest, store: &ResultsStore, data: &Datasets, workers: usize, resume: bool) -> Result<SweepSummary> {
    m.validate()?;
    let hash = m.hash();
    let (graphs, _) = store.load_graphs()?;
    let done = store.completed(&hash)?;
    if !resume && !done.is_empty() {
        return Err(Error::Precondition(format!(
            "{} tasks already recorded for manifest {hash}; pass --resume to continue",
            done.len()
        )));
    }
    let tasks: Vec<(&GraphEntry, InitMethod)> = graphs
        .iter()
        .flat_map(|g| m.init_methods.iter().map(move |&i| (g, i)))
        .filter(|(g, i)| !done.contains(&(g.id().to_string(), *i)))
        .collect();
    let skipped = graphs.len() * m.init_methods.len() - tasks.len();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter(format!("worker pool: {e}")))?;
    let writer = JsonlWriter::<RunRecord>::spawn(store.runs_path());
    let failed = pool.install(|| {
        tasks
            .par_iter()
            .map_with(writer.sender(), |tx, &(g, init)| {
                let record = run_task(m, store, g, init, data);
                let failed = !record.is_ok();
                log::info!("finished {} / {} in {:.1}s", g.id(), init, record.elapsed_secs);
                tx.send(record).expect("writer alive");
                usize::from(failed)
            })
            .sum::<usize>()
    });
    let executed = writer.finish()?;
    Ok(SweepSummary { executed, skipped, failed })
}
