//! FGSM at a fixed epsilon and the per-image epsilon search on a briefly
//! trained dense network.
//!
//! Usage: cargo run --release --example fgsm_attack -- [mnist_dir]

use std::path::PathBuf;

use snnlab::attack::{fgsm_batch, fgsm_eps_search, AttackOutcome, EpsSearchConfig};
use snnlab::data::{load_mnist, Split};
use snnlab::measure::{avg_confidence, avg_epsilon, error_rate};
use snnlab::network::{init_weights, InitMethod, MaskedNetwork};
use snnlab::train::{predict, train, TrainConfig};

fn main() -> snnlab::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "data/mnist".into()));
    let train_set = load_mnist(&dir, Split::Train)?.head(10_000);
    let test_set = load_mnist(&dir, Split::Test)?.head(500);

    let mut net = MaskedNetwork::dense(784, &[100, 50, 20], 10)?;
    init_weights(&mut net, InitMethod::HeUniform, 1);
    train(&mut net, &train_set, &TrainConfig { epochs: 3, ..TrainConfig::default() })?;

    let predicted = predict(&net, &test_set)?;
    let correct: Vec<usize> = (0..test_set.len()).filter(|&i| predicted[i] == test_set.label(i)).collect();
    println!("{} of {} test images classified correctly", correct.len(), test_set.len());

    let fixed: Vec<AttackOutcome> = fgsm_batch(&net, &test_set, &correct, 0.1)?.iter().map(|e| e.outcome()).collect();
    println!("FGSM eps=0.1: error rate {:.3}, confidence {:.3}", error_rate(&fixed)?, avg_confidence(&fixed).unwrap_or(f64::NAN));

    let cfg = EpsSearchConfig::default();
    let searched: Vec<AttackOutcome> = correct
        .iter()
        .take(100)
        .map(|&i| fgsm_eps_search(&net, &test_set.image(i).to_vec(), test_set.label(i), &cfg, i).map(|e| e.outcome()))
        .collect::<snnlab::Result<_>>()?;
    let (eps_bar, censored) = avg_epsilon(&searched);
    println!("epsilon search over 100 images: mean epsilon {:.4}, {censored} censored", eps_bar.unwrap_or(f64::NAN));
    for o in searched.iter().take(5) {
        let eps = o.epsilon_used.map_or("censored".to_string(), |e| format!("{e:.3}"));
        println!("  image {:4}: epsilon {eps}, confidence {:.3}", o.image_index, o.confidence);
    }
    Ok(())
}
