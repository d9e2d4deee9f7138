//! The whole study at toy scale: graph search, sweep, correlation, report.
//!
//! Usage: cargo run --release --example desk_pipeline -- [mnist_dir]

use std::path::PathBuf;

use snnlab::data::{load_mnist, Split};
use snnlab::experiment::{correlate, gen_graphs, report, run_sweep, Datasets, ExperimentManifest, ResultsStore, Scale};
use snnlab::network::InitMethod;

fn main() -> snnlab::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "data/mnist".into()));
    let mut m = ExperimentManifest {
        target_graph_count: 4,
        init_methods: vec![InitMethod::HeUniform],
        scale: Scale {
            train_fraction: 0.05,
            test_fraction: 0.02,
            ..Scale::desk()
        },
        ..ExperimentManifest::default()
    };
    m.attacks.one_pixel_images = 20;
    let out = std::env::temp_dir().join("snnlab_pipeline_example");
    let _ = std::fs::remove_dir_all(&out);
    let store = ResultsStore::open(&out)?;

    let summary = gen_graphs(&m, &store)?;
    println!("{} graphs from {} candidates", summary.accepted.len(), summary.candidates);
    let data = Datasets::scaled(&m, load_mnist(&dir, Split::Train)?, load_mnist(&dir, Split::Test)?);
    let sweep = run_sweep(&m, &store, &data, 1, false)?;
    println!("{} models trained and attacked", sweep.executed);
    let table = correlate(&store, None)?;
    println!("{} correlation cells", table.table.cells.len());
    print!("{}", report(&store)?);
    println!("outputs in {}", out.display());
    Ok(())
}
