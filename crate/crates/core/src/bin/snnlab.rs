use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use snnlab::attack::{write_outcomes_csv, AttackKind};
use snnlab::experiment::{
    attack_model_with, correlate, gen_graphs, report, run_pruning_baseline, run_sweep, Datasets, ExperimentManifest, ResultsStore, Scale,
};
use snnlab::measure::OutlierGranularity;
use snnlab::network::MaskedNetwork;
use snnlab::seed::derive_seed;
use snnlab::{Error, Result};

#[derive(Parser)]
#[command(name = "snnlab", about = "Graph-prior sparse networks: training, adversarial attacks, correlation studies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment manifest (JSON); defaults to the one stored in the output
    /// directory, or the built-in defaults.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Directory holding the MNIST IDX files.
    #[arg(long, default_value = "data/mnist")]
    data_dir: PathBuf,
    #[arg(long, default_value = "results")]
    out_dir: PathBuf,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    workers: Option<usize>,
    /// Scale preset replacing the manifest's scale: `paper` or `desk`.
    #[arg(long)]
    scale: Option<String>,
    /// Skip tasks already recorded for this manifest.
    #[arg(long)]
    resume: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Search the generator grid for graphs within the parameter range.
    GenGraphs(Common),
    /// Train and attack every (graph, init) model.
    Sweep(Common),
    /// Attack a saved checkpoint.
    Attack {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Attacks to run (fgsm, fgsm_search, one_pixel); all when omitted.
        #[arg(long = "attack")]
        attacks: Vec<String>,
    },
    /// Rank-correlate graph properties with robustness measures.
    Correlate {
        #[command(flatten)]
        common: Common,
        /// Outlier granularity: `run` or `model`.
        #[arg(long)]
        granularity: Option<String>,
    },
    /// Dense 50/100/100/50 network pruned step by step.
    PruneBaseline(Common),
    /// Write the text report.
    Report(Common),
}

impl Common {
    fn store(&self) -> Result<ResultsStore> {
        ResultsStore::open(&self.out_dir)
    }

    /// `--manifest` if given, otherwise the stored one, otherwise defaults;
    /// `--scale` replaces the scale in every case.
    fn manifest(&self, store: &ResultsStore) -> Result<ExperimentManifest> {
        let mut m = match &self.manifest {
            Some(path) => ExperimentManifest::load(path)?,
            None if store.has_manifest() => store.load_manifest()?,
            None => ExperimentManifest::default(),
        };
        if let Some(name) = &self.scale {
            m.scale = Scale::preset(name)?;
        }
        m.validate()?;
        Ok(m)
    }

    fn workers(&self) -> usize {
        self.workers
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
    }
}

/// The sweep must run under the manifest its graphs were generated with.
fn stored_manifest(common: &Common, store: &ResultsStore) -> Result<ExperimentManifest> {
    let stored = store.load_manifest()?;
    let requested = common.manifest(store)?;
    if requested.hash() != stored.hash() {
        return Err(Error::Precondition(format!(
            "manifest {} differs from {} used by gen-graphs in {}",
            requested.hash(),
            stored.hash(),
            common.out_dir.display()
        )));
    }
    Ok(stored)
}

fn parse_granularity(s: &str) -> Result<OutlierGranularity> {
    match s {
        "run" => Ok(OutlierGranularity::Run),
        "model" => Ok(OutlierGranularity::Model),
        other => Err(Error::InvalidParameter(format!("unknown granularity {other:?} (run | model)"))),
    }
}

fn attack_checkpoint(common: &Common, checkpoint: &Path, attacks: &[String]) -> Result<()> {
    let store = common.store()?;
    let m = common.manifest(&store)?;
    let kinds: Vec<AttackKind> = if attacks.is_empty() {
        AttackKind::ALL.to_vec()
    } else {
        attacks.iter().map(|a| a.parse()).collect::<Result<_>>()?
    };
    let (net, meta) = MaskedNetwork::load_checkpoint(checkpoint)?;
    let data = Datasets::load(&m, &common.data_dir)?;
    let id = checkpoint.file_stem().map_or("model".into(), |s| s.to_string_lossy().into_owned());
    let seed = derive_seed(m.master_seed, &[&id, "attack"]);
    let init = meta.init_method.unwrap_or_default();
    let rep = attack_model_with(&net, &data.test, &m, &kinds, seed, &id, &init)?;
    for (kind, rows) in &rep.outcomes {
        write_outcomes_csv(&store.path(&format!("{id}_{}.csv", kind.name())), rows)?;
    }
    println!("clean accuracy {:.4}, macro-F1 {:.4}", rep.eval.accuracy, rep.eval.macro_f1);
    for r in &rep.robustness {
        println!("{}: {}", r.attack.name(), serde_json::to_string(r)?);
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenGraphs(c) => {
            let store = c.store()?;
            let m = c.manifest(&store)?;
            let s = gen_graphs(&m, &store)?;
            println!(
                "{} graphs accepted from {} candidates (manifest {}){}",
                s.accepted.len(),
                s.candidates,
                s.manifest_hash,
                if s.exhausted { "; search exhausted" } else { "" }
            );
        }
        Command::Sweep(c) => {
            let store = c.store()?;
            let m = stored_manifest(&c, &store)?;
            let data = Datasets::load(&m, &c.data_dir)?;
            let s = run_sweep(&m, &store, &data, c.workers(), c.resume)?;
            println!("{} tasks run, {} skipped, {} failed", s.executed, s.skipped, s.failed);
        }
        Command::Attack {
            common,
            checkpoint,
            attacks,
        } => attack_checkpoint(&common, &checkpoint, &attacks)?,
        Command::Correlate { common, granularity } => {
            let store = common.store()?;
            let g = granularity.as_deref().map(parse_granularity).transpose()?;
            let r = correlate(&store, g)?;
            r.table.write_summary(&mut std::io::stdout()).map_err(|e| Error::io(&common.out_dir, e))?;
        }
        Command::PruneBaseline(c) => {
            let store = c.store()?;
            let m = c.manifest(&store)?;
            if !store.has_manifest() {
                store.save_manifest(&m)?;
            }
            let data = Datasets::load(&m, &c.data_dir)?;
            let r = rayon::ThreadPoolBuilder::new()
                .num_threads(c.workers())
                .build()
                .map_err(|e| Error::InvalidParameter(format!("worker pool: {e}")))?
                .install(|| run_pruning_baseline(&m, &store, &data))?;
            let last = r.steps.last().expect("step 0 always present");
            println!("{} steps, final hidden edges {}, macro-F1 {:.4}", r.steps.len() - 1, last.hidden_edges, last.eval.macro_f1);
        }
        Command::Report(c) => {
            let store = c.store()?;
            print!("{}", report(&store)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
