//! Train a WS(300, 2, 0.6) network on MNIST and report macro-F1.
//!
//! Usage: cargo run --release --example train_mnist -- [mnist_dir] [epochs] [train_images]

use std::path::PathBuf;
use std::time::Instant;

use snnlab::data::{load_mnist, Split};
use snnlab::graph::{generate_ws, layer_dag, to_dag};
use snnlab::network::{build_network, init_weights, InitMethod};
use snnlab::train::{evaluate_f1, train, TrainConfig};

fn main() -> snnlab::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let dir = PathBuf::from(args.get(1).map_or("data/mnist", String::as_str));
    let epochs = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(5);
    let n_train = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(10_000);

    let train_set = load_mnist(&dir, Split::Train)?.head(n_train);
    let test_set = load_mnist(&dir, Split::Test)?;
    let ld = layer_dag(&to_dag(&generate_ws(300, 2, 0.6, 1)?))?;
    let mut net = build_network(&ld, 784, 10)?;
    init_weights(&mut net, InitMethod::HeUniform, 7);
    println!("{} parameters, {} hidden layers", net.param_count(), net.depth());

    let cfg = TrainConfig {
        epochs,
        seed: 3,
        ..TrainConfig::default()
    };
    let t = Instant::now();
    let history = train(&mut net, &train_set, &cfg)?;
    for e in &history.epochs {
        println!("epoch {:2}  loss {:.4}  train accuracy {:.4}", e.epoch + 1, e.loss, e.accuracy);
    }
    let report = evaluate_f1(&net, &test_set)?;
    println!("trained in {:.1?}", t.elapsed());
    println!("test accuracy {:.4}, macro-F1 {:.4}", report.accuracy, report.macro_f1);
    Ok(())
}
