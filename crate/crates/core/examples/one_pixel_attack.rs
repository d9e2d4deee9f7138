//! One-pixel attack by differential evolution on a briefly trained dense
//! network.
//!
//! Usage: cargo run --release --example one_pixel_attack -- [mnist_dir]

use std::path::PathBuf;

use snnlab::attack::{one_pixel, DEConfig};
use snnlab::data::{load_mnist, Split};
use snnlab::network::{init_weights, InitMethod, MaskedNetwork};
use snnlab::train::{predict, train, TrainConfig};

fn main() -> snnlab::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "data/mnist".into()));
    let train_set = load_mnist(&dir, Split::Train)?.head(5_000);
    let test_set = load_mnist(&dir, Split::Test)?.head(200);

    let mut net = MaskedNetwork::dense(784, &[50], 10)?;
    init_weights(&mut net, InitMethod::HeUniform, 2);
    train(&mut net, &train_set, &TrainConfig { epochs: 2, ..TrainConfig::default() })?;
    let predicted = predict(&net, &test_set)?;

    let mut flipped = 0;
    let targets: Vec<usize> = (0..test_set.len()).filter(|&i| predicted[i] == test_set.label(i)).take(20).collect();
    for &i in &targets {
        let cfg = DEConfig {
            pop_size: 100,
            max_iter: 100,
            seed: i as u64,
            ..DEConfig::default()
        };
        let ex = one_pixel(&net, &test_set.image(i).to_vec(), test_set.label(i), &cfg, i)?;
        let c = ex.candidate.expect("one-pixel result carries its candidate");
        flipped += usize::from(ex.success);
        println!(
            "image {i:3} label {}: pixel (col {:2}, row {:2}) -> {:3}, predicted {} ({:.3}), {} generations{}",
            ex.original_label,
            c.p_x,
            c.p_y,
            c.intensity,
            ex.predicted_label,
            ex.confidence,
            ex.generations_used.unwrap_or(0),
            if ex.success { "  flipped" } else { "" }
        );
    }
    println!("{flipped} of {} images flipped by one pixel", targets.len());
    Ok(())
}
