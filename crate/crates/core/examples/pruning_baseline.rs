//! Random pruning of a dense 50/100/100/50 network, shortened to a few
//! steps and small data.
//!
//! Usage: cargo run --release --example pruning_baseline -- [mnist_dir]

use std::path::PathBuf;

use snnlab::data::{load_mnist, Split};
use snnlab::experiment::{run_pruning_baseline, Datasets, ExperimentManifest, PruningConfig, ResultsStore, Scale};

fn main() -> snnlab::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "data/mnist".into()));
    let mut m = ExperimentManifest {
        scale: Scale::desk(),
        pruning: PruningConfig {
            steps: 5,
            ..PruningConfig::default()
        },
        ..ExperimentManifest::default()
    };
    m.attacks.one_pixel_images = 10;
    let data = Datasets::scaled(&m, load_mnist(&dir, Split::Train)?, load_mnist(&dir, Split::Test)?);
    let out = std::env::temp_dir().join("snnlab_pruning_example");
    let _ = std::fs::remove_dir_all(&out);
    let store = ResultsStore::open(&out)?;

    let result = run_pruning_baseline(&m, &store, &data)?;
    for s in &result.steps {
        println!(
            "step {}: {:5} hidden edges (pruned {:4}), density {:.4}, avg path {:.3}, macro-F1 {:.4}",
            s.step, s.hidden_edges, s.pruned, s.metrics.density_undirected, s.metrics.avg_path_length, s.eval.macro_f1
        );
    }
    if let Some(t) = &result.table {
        t.write_summary(&mut std::io::stdout()).expect("stdout");
    }
    println!("records in {}", out.display());
    Ok(())
}
