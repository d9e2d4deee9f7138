//! Independent oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

use ndarray::Array2;
use rand::Rng;
use snnlab::graph::{layer_dag, Dag, UndirectedGraph};
use snnlab::network::{build_network, init_weights, InitMethod, MaskedNetwork};
use snnlab::seed::rng_from_seed;

pub fn mnist_dir() -> PathBuf {
    std::env::var_os("SNNLAB_MNIST_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist"))
}

pub fn mnist_available() -> bool {
    let d = mnist_dir();
    ["train-images-idx3-ubyte", "t10k-images-idx3-ubyte"]
        .iter()
        .all(|f| d.join(f).exists() || d.join(format!("{f}.gz")).exists())
}

pub fn random_graph(rng: &mut impl Rng, n: usize, p: f64) -> UndirectedGraph {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.random::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    UndirectedGraph::from_edges(n, &edges).unwrap()
}

/// All-pairs distances by Floyd-Warshall; `None` when unreachable.
pub fn floyd_warshall(g: &UndirectedGraph) -> Vec<Vec<Option<usize>>> {
    let n = g.vertex_count();
    let mut d = vec![vec![None; n]; n];
    for u in 0..n {
        d[u][u] = Some(0);
        for v in 0..n {
            if g.has_edge(u, v) {
                d[u][v] = Some(1);
            }
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if let (Some(a), Some(b)) = (d[i][k], d[k][j]) {
                    if d[i][j].is_none_or(|c| a + b < c) {
                        d[i][j] = Some(a + b);
                    }
                }
            }
        }
    }
    d
}

/// Every simple path from `s` to `t` with exactly `len` edges.
pub fn paths_of_length(g: &UndirectedGraph, s: usize, t: usize, len: usize) -> Vec<Vec<usize>> {
    fn walk(g: &UndirectedGraph, path: &mut Vec<usize>, t: usize, len: usize, out: &mut Vec<Vec<usize>>) {
        let u = *path.last().unwrap();
        if path.len() - 1 == len {
            if u == t {
                out.push(path.clone());
            }
            return;
        }
        for w in 0..g.vertex_count() {
            if g.has_edge(u, w) && !path.contains(&w) {
                path.push(w);
                walk(g, path, t, len, out);
                path.pop();
            }
        }
    }
    let mut out = Vec::new();
    walk(g, &mut vec![s], t, len, &mut out);
    out
}

#[derive(Debug, Clone)]
pub struct OracleMetrics {
    pub density: f64,
    pub diameter: usize,
    pub avg_path_length: f64,
    pub avg_eccentricity: f64,
    pub avg_betweenness: f64,
    pub avg_closeness: f64,
    pub component: Vec<usize>,
}

/// Brute-force metrics on the largest component (ties: the one holding the
/// smallest vertex). Betweenness sums, over unordered pairs, the share of
/// enumerated shortest paths through each vertex, normalized by
/// `(k-1)(k-2)/2`.
pub fn oracle_metrics(g: &UndirectedGraph) -> OracleMetrics {
    let n = g.vertex_count();
    let d = floyd_warshall(g);
    let density = if n < 2 { 0.0 } else { g.edge_count() as f64 / (n * (n - 1) / 2) as f64 };

    let mut best: Vec<usize> = Vec::new();
    for v in 0..n {
        let comp: Vec<usize> = (0..n).filter(|&u| d[v][u].is_some()).collect();
        if comp.len() > best.len() {
            best = comp;
        }
    }
    let k = best.len();
    let (mut diameter, mut ecc_sum, mut dist_sum, mut close_sum) = (0, 0, 0, 0.0);
    for &u in &best {
        let row: Vec<usize> = best.iter().map(|&v| d[u][v].unwrap()).collect();
        let ecc = *row.iter().max().unwrap_or(&0);
        let total: usize = row.iter().sum();
        diameter = diameter.max(ecc);
        ecc_sum += ecc;
        dist_sum += total;
        if total > 0 {
            close_sum += (k - 1) as f64 / total as f64;
        }
    }
    let pairs = k * k.saturating_sub(1) / 2;
    let mut between = vec![0.0; n];
    for (a, &s) in best.iter().enumerate() {
        for &t in &best[a + 1..] {
            let paths = paths_of_length(g, s, t, d[s][t].unwrap());
            for &v in &best {
                if v != s && v != t {
                    let through = paths.iter().filter(|p| p.contains(&v)).count();
                    between[v] += through as f64 / paths.len() as f64;
                }
            }
        }
    }
    let norm = if k > 2 { ((k - 1) * (k - 2)) as f64 / 2.0 } else { 1.0 };
    let avg = |x: f64| if k == 0 { 0.0 } else { x / k as f64 };
    OracleMetrics {
        density,
        diameter,
        avg_path_length: if pairs == 0 { 0.0 } else { dist_sum as f64 / 2.0 / pairs as f64 },
        avg_eccentricity: avg(ecc_sum as f64),
        avg_betweenness: if k > 2 { avg(best.iter().map(|&v| between[v]).sum::<f64>() / norm) } else { 0.0 },
        avg_closeness: avg(close_sum),
        component: best,
    }
}

/// Average ranks by counting smaller and equal values.
pub fn counting_ranks(xs: &[f64]) -> Vec<f64> {
    xs.iter()
        .map(|&x| {
            let less = xs.iter().filter(|&&y| y < x).count() as f64;
            let equal = xs.iter().filter(|&&y| y == x).count() as f64;
            less + (equal + 1.0) / 2.0
        })
        .collect()
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

pub fn spearman_oracle(xs: &[f64], ys: &[f64]) -> f64 {
    pearson(&counting_ranks(xs), &counting_ranks(ys))
}

/// Rank-difference formula, valid only without ties.
pub fn spearman_rank_difference(xs: &[f64], ys: &[f64]) -> f64 {
    let (rx, ry) = (counting_ranks(xs), counting_ranks(ys));
    let n = xs.len() as f64;
    let d2: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - b).powi(2)).sum();
    1.0 - 6.0 * d2 / (n * (n * n - 1.0))
}

/// Tau-b from an explicit count over all pairs.
pub fn kendall_pairs(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len();
    let (mut c, mut d, mut tx, mut ty) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for i in 0..n {
        for j in i + 1..n {
            let sx = (xs[i] - xs[j]).signum() * f64::from(xs[i] != xs[j]);
            let sy = (ys[i] - ys[j]).signum() * f64::from(ys[i] != ys[j]);
            match (sx == 0.0, sy == 0.0) {
                (true, true) => {}
                (true, false) => tx += 1.0,
                (false, true) => ty += 1.0,
                (false, false) if sx == sy => c += 1.0,
                (false, false) => d += 1.0,
            }
        }
    }
    (c - d) / ((c + d + tx) * (c + d + ty)).sqrt()
}

pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// Random layered network with `hidden` units (DAG edges kept with
/// probability `p`), initialized with He normal. Resamples until at least
/// one skip group exists.
pub fn random_skip_network(seed: u64, hidden: usize, input: usize, output: usize, p: f64) -> MaskedNetwork {
    let mut rng = rng_from_seed(seed);
    loop {
        let mut edges = Vec::new();
        for u in 0..hidden {
            for v in u + 1..hidden {
                if rng.random::<f64>() < p {
                    edges.push((u, v));
                }
            }
        }
        let dag = Dag::from_edges(hidden, &edges).unwrap();
        let ld = layer_dag(&dag).unwrap();
        let mut net = build_network(&ld, input, output).unwrap();
        if net.groups().iter().any(|g| g.is_skip()) {
            init_weights(&mut net, InitMethod::HeNormal, rng.random());
            for l in 0..=net.depth() {
                let b = net.bias_mut(l);
                b.iter_mut().for_each(|v| *v = rng.random_range(-0.5..0.5));
            }
            return net;
        }
    }
}

pub fn random_batch(seed: u64, dim: usize, batch: usize, classes: usize) -> (Array2<f64>, Vec<usize>) {
    let mut rng = rng_from_seed(seed);
    let x = Array2::from_shape_fn((dim, batch), |_| rng.random::<f64>());
    let y = (0..batch).map(|_| rng.random_range(0..classes)).collect();
    (x, y)
}

fn loss_at(net: &MaskedNetwork, x: &Array2<f64>, y: &[usize]) -> f64 {
    net.forward_batch(x.view()).unwrap().loss(y)
}

/// Largest relative deviation `|a - n| / max(|a|, |n|, 1e-7)` between
/// analytic gradients and central differences over every active weight,
/// every bias and every input entry.
pub fn max_gradient_error(net: &MaskedNetwork, x: &Array2<f64>, y: &[usize], h: f64) -> f64 {
    let cache = net.forward_batch(x.view()).unwrap();
    let grads = net.backward(&cache, y).unwrap();
    let rel = |a: f64, n: f64| (a - n).abs() / a.abs().max(n.abs()).max(1e-7);
    let mut worst: f64 = 0.0;
    for gi in 0..net.groups().len() {
        let mask = net.groups()[gi].mask().clone();
        for ((r, c), &active) in mask.indexed_iter() {
            let analytic = grads.weights[gi][[r, c]];
            if !active {
                assert_eq!(analytic, 0.0, "masked gradient must be zero");
                continue;
            }
            let w = net.groups()[gi].weights()[[r, c]];
            let mut plus = net.clone();
            plus.set_weight(gi, r, c, w + h).unwrap();
            let mut minus = net.clone();
            minus.set_weight(gi, r, c, w - h).unwrap();
            let numeric = (loss_at(&plus, x, y) - loss_at(&minus, x, y)) / (2.0 * h);
            worst = worst.max(rel(analytic, numeric));
        }
    }
    for l in 0..net.biases().len() {
        for i in 0..net.biases()[l].len() {
            let mut plus = net.clone();
            plus.bias_mut(l)[i] += h;
            let mut minus = net.clone();
            minus.bias_mut(l)[i] -= h;
            let numeric = (loss_at(&plus, x, y) - loss_at(&minus, x, y)) / (2.0 * h);
            worst = worst.max(rel(grads.biases[l][i], numeric));
        }
    }
    // the loss is a batch mean, so d loss / d x[:, j] carries the 1/batch factor
    for ((r, c), &analytic) in grads.input.indexed_iter() {
        let mut xp = x.clone();
        xp[[r, c]] += h;
        let mut xm = x.clone();
        xm[[r, c]] -= h;
        let numeric = (loss_at(net, &xp, y) - loss_at(net, &xm, y)) / (2.0 * h);
        worst = worst.max(rel(analytic, numeric));
    }
    worst
}

/// Two inputs copied through ReLU units; logit 1 is their sum, logit 0 is a
/// constant `bias`. On `[0.5, 0.5]` class 0 wins while `bias > 1` and FGSM
/// raises logit 1 by `2 * eps`.
pub fn two_pixel_net(bias: f64) -> MaskedNetwork {
    let mut net = MaskedNetwork::dense(2, &[2], 2).unwrap();
    for (g, r, c, w) in [(0, 0, 0, 1.0), (0, 0, 1, 0.0), (0, 1, 0, 0.0), (0, 1, 1, 1.0), (1, 0, 0, 0.0), (1, 0, 1, 0.0), (1, 1, 0, 1.0), (1, 1, 1, 1.0)] {
        net.set_weight(g, r, c, w).unwrap();
    }
    net.bias_mut(1)[0] = bias;
    net
}

pub const BUMP_CENTRE: (u32, u32) = (17, 9);

/// Frozen 784-input net whose single hidden unit weighs pixel `(p_x, p_y)`
/// by a Gaussian bump peaking at `BUMP_CENTRE` with height 2. Logit 0 is the
/// constant 3 and logit 1 the hidden unit, so a black image stays class 0
/// under any one-pixel change and the fitness has a unique maximum at the
/// bump centre with intensity 255.
pub fn bump_net() -> MaskedNetwork {
    let mut net = MaskedNetwork::dense(784, &[1], 2).unwrap();
    for py in 1..=28u32 {
        for px in 1..=28u32 {
            let (dx, dy) = (px as f64 - BUMP_CENTRE.0 as f64, py as f64 - BUMP_CENTRE.1 as f64);
            let w = 2.0 * (-(dx * dx + dy * dy) / 50.0).exp();
            net.set_weight(0, 0, ((py - 1) * 28 + px - 1) as usize, w).unwrap();
        }
    }
    net.set_weight(1, 0, 0, 0.0).unwrap();
    net.set_weight(1, 1, 0, 1.0).unwrap();
    net.bias_mut(1)[0] = 3.0;
    net
}

/// Best fitness among `n` candidates drawn from the initial-population
/// distribution.
pub fn random_search_best(net: &MaskedNetwork, x: &[f64], y: usize, n: usize, seed: u64) -> f64 {
    use snnlab::attack::{apply_candidate, pixel_fitness, random_candidate};
    let mut rng = rng_from_seed(seed);
    let mut best = f64::NEG_INFINITY;
    let mut remaining = n;
    while remaining > 0 {
        let k = remaining.min(1000);
        let mut batch = Array2::zeros((x.len(), k));
        for j in 0..k {
            let img = apply_candidate(x, random_candidate(&mut rng));
            batch.column_mut(j).assign(&ndarray::ArrayView1::from(&img));
        }
        let probs = net.predict_proba(batch.view()).unwrap();
        for j in 0..k {
            best = best.max(pixel_fitness(&probs.column(j).to_vec(), y));
        }
        remaining -= k;
    }
    best
}
