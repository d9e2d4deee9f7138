//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Criteria that need MNIST fail when it is absent; set
//! `SNNLAB_MNIST_DIR` or run `scripts/fetch_mnist.sh`.

mod common;

use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use common::*;
use rand::Rng;
use snnlab::attack::{fgsm, fgsm_batch, fgsm_eps_search, one_pixel_traced, AttackKind, DEConfig, EpsSearchConfig};
use snnlab::data::{load_mnist, Dataset, Split};
use snnlab::experiment::{read_jsonl, ExperimentManifest, PruningStepRecord, RunRecord};
use snnlab::graph::{compute_metrics, generate_ws, layer_dag, to_dag};
use snnlab::measure::{cohen_label, kendall, spearman, CohenLabel, RobustnessRecord};
use snnlab::network::{build_network, init_weights, network_to_graph, InitMethod, MaskedNetwork};
use snnlab::seed::rng_from_seed;
use snnlab::train::{evaluate_f1, predict, train, TrainConfig};

type Verdict = std::result::Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> std::result::Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(limit: Duration, t: Instant, what: &str) -> std::result::Result<(), String> {
    ensure(t.elapsed() < limit, format!("{what} took {:.1?}, limit {:?}", t.elapsed(), limit))
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn gradients() -> Verdict {
    let t = Instant::now();
    let mut worst: f64 = 0.0;
    for i in 0..20u64 {
        let hidden = 8 + (i as usize * 7) % 23;
        let net = random_skip_network(1000 + i, hidden, 6, 4, 0.3);
        ensure(net.hidden_units() <= 30 && net.groups().iter().any(|g| g.is_skip()), "network shape")?;
        let (x, y) = random_batch(2000 + i, 6, 4, 4);
        worst = worst.max(max_gradient_error(&net, &x, &y, 1e-5));
    }
    within(Duration::from_secs(60), t, "gradient checks")?;
    ensure(worst < 1e-4, format!("max relative error {worst:.3e}"))?;
    Ok(format!("20 networks, max relative error {worst:.2e}"))
}

fn graph_oracles() -> Verdict {
    let t = Instant::now();
    let mut rng = rng_from_seed(42);
    let mut worst: f64 = 0.0;
    for i in 0..200 {
        let n = 1 + i % 8;
        let p = rng.random_range(0.1..0.9);
        let g = random_graph(&mut rng, n, p);
        let (m, o) = (compute_metrics(&g), oracle_metrics(&g));
        ensure(m.diameter == o.diameter, format!("diameter {} vs {}", m.diameter, o.diameter))?;
        for (a, b) in [
            (m.density_undirected, o.density),
            (m.avg_path_length, o.avg_path_length),
            (m.avg_eccentricity, o.avg_eccentricity),
            (m.avg_betweenness, o.avg_betweenness),
            (m.avg_closeness, o.avg_closeness),
        ] {
            worst = worst.max((a - b).abs());
        }
    }
    within(Duration::from_secs(60), t, "graph oracles")?;
    ensure(worst <= 1e-12, format!("max deviation {worst:.3e}"))?;
    Ok(format!("200 graphs, max deviation {worst:.1e}"))
}

fn structure() -> Verdict {
    let t = Instant::now();
    let mut rng = rng_from_seed(7);
    for i in 0..1000u64 {
        let n = rng.random_range(6..120);
        let nei = rng.random_range(1..=(n - 1) / 2).min(6);
        let g = generate_ws(n, nei, rng.random::<f64>(), i).map_err(err)?;
        let d = to_dag(&g);
        ensure(d.topological_order().is_some(), format!("graph {i}: cycle"))?;
        ensure(d.edge_count() == g.edge_count(), format!("graph {i}: edge count"))?;
        let ld = layer_dag(&d).map_err(err)?;
        ensure(d.edges().iter().all(|&(u, v)| ld.layer_index(u) < ld.layer_index(v)), format!("graph {i}: layering"))?;
        let net = build_network(&ld, 5, 3).map_err(err)?;
        let (mut a, mut b) = (network_to_graph(&net).map_err(err)?.edges(), d.edges());
        a.sort();
        b.sort();
        ensure(a == b, format!("graph {i}: edge set not recovered"))?;
    }
    within(Duration::from_secs(60), t, "structural checks")?;
    Ok(format!("1000 WS graphs in {:.1?}", t.elapsed()))
}

fn statistics() -> Verdict {
    let mut count = 0;
    for n in 1..=6 {
        let base: Vec<f64> = (0..n).map(|i| i as f64).collect();
        for p in permutations(n) {
            let ys: Vec<f64> = p.iter().map(|&i| i as f64).collect();
            if n < 3 {
                ensure(spearman(&base, &ys).is_err() && kendall(&base, &ys).is_err(), "n < 3 must be undefined")?;
                continue;
            }
            let rho = spearman(&base, &ys).map_err(err)?;
            let tau = kendall(&base, &ys).map_err(err)?;
            ensure((rho - spearman_rank_difference(&base, &ys)).abs() <= 1e-12, format!("spearman {p:?}"))?;
            ensure((rho - spearman_oracle(&base, &ys)).abs() <= 1e-12, format!("spearman {p:?}"))?;
            ensure((tau - kendall_pairs(&base, &ys)).abs() <= 1e-12, format!("kendall {p:?}"))?;
            count += 1;
        }
    }
    use CohenLabel::*;
    for (v, want) in [(0.09, Negligible), (0.10, Weak), (0.29, Weak), (0.30, Moderate), (0.49, Moderate), (0.50, Large)] {
        ensure(cohen_label(v) == want && cohen_label(-v) == want, format!("cohen_label({v})"))?;
    }
    Ok(format!("{count} permutations (n = 3..6, n < 3 rejected), 6 Cohen boundaries"))
}

struct Mnist {
    train: Dataset,
    test: Dataset,
}

fn load_data() -> std::result::Result<Mnist, String> {
    if !mnist_available() {
        return Err(format!("MNIST not found in {}", mnist_dir().display()));
    }
    Ok(Mnist {
        train: load_mnist(&mnist_dir(), Split::Train).map_err(err)?,
        test: load_mnist(&mnist_dir(), Split::Test).map_err(err)?,
    })
}

fn ws_model(train_set: &Dataset, epochs: usize) -> std::result::Result<MaskedNetwork, String> {
    let ld = layer_dag(&to_dag(&generate_ws(300, 2, 0.6, 1).map_err(err)?)).map_err(err)?;
    let mut net = build_network(&ld, 784, 10).map_err(err)?;
    init_weights(&mut net, InitMethod::HeUniform, 7);
    let cfg = TrainConfig { epochs, seed: 3, ..TrainConfig::default() };
    train(&mut net, train_set, &cfg).map_err(err)?;
    Ok(net)
}

fn training(data: &Mnist, scaled: &mut Option<MaskedNetwork>) -> Verdict {
    let t = Instant::now();
    let net = ws_model(&data.train.head(10_000), 5)?;
    let f1 = evaluate_f1(&net, &data.test).map_err(err)?.macro_f1;
    let scaled_time = t.elapsed();
    *scaled = Some(net);
    ensure(scaled_time < Duration::from_secs(600), format!("scaled run took {scaled_time:.1?}"))?;
    ensure(f1 >= 0.90, format!("scaled macro-F1 {f1:.4} < 0.90"))?;

    let t = Instant::now();
    let full = ws_model(&data.train, 30)?;
    let full_f1 = evaluate_f1(&full, &data.test).map_err(err)?.macro_f1;
    ensure((0.955..=0.985).contains(&full_f1), format!("full-scale macro-F1 {full_f1:.4} outside [0.955, 0.985]"))?;
    Ok(format!(
        "scaled macro-F1 {f1:.4} in {scaled_time:.1?}; full scale macro-F1 {full_f1:.4} in {:.1?}",
        t.elapsed()
    ))
}

fn correct_indices(net: &MaskedNetwork, test: &Dataset) -> std::result::Result<Vec<usize>, String> {
    let pred = predict(net, test).map_err(err)?;
    Ok((0..test.len()).filter(|&i| pred[i] == test.label(i)).collect())
}

fn fgsm_efficacy(net: &MaskedNetwork, test: &Dataset) -> Verdict {
    let correct = correct_indices(net, test)?;
    let clean_error = 1.0 - correct.len() as f64 / test.len() as f64;
    let chosen = &correct[..1000.min(correct.len())];
    ensure(chosen.len() == 1000, "fewer than 1000 correct images")?;
    let adv = fgsm_batch(net, test, chosen, 0.1).map_err(err)?;
    let mut linf: f64 = 0.0;
    for ex in &adv {
        let x = test.image(ex.original_index);
        for (a, b) in ex.perturbed_image.iter().zip(x.iter()) {
            linf = linf.max((a - b).abs());
        }
    }
    let rate = adv.iter().filter(|e| e.success).count() as f64 / adv.len() as f64;
    // one ulp of slack for (x + 0.1) - x in binary floating point
    ensure(linf <= 0.1 + 1e-15, format!("L-inf {linf}"))?;
    ensure(rate >= 5.0 * clean_error, format!("error rate {rate:.4} < 5 x clean {clean_error:.4}"))?;
    Ok(format!("error rate {rate:.4} vs clean {clean_error:.4} ({:.1}x), max L-inf {linf:.6}", rate / clean_error))
}

fn eps_minimality(net: &MaskedNetwork, test: &Dataset) -> Verdict {
    let correct = correct_indices(net, test)?;
    let cfg = EpsSearchConfig::default();
    let mut outcomes = Vec::new();
    let mut retested = 0;
    for &i in &correct[..100] {
        let x = test.image(i).to_vec();
        let y = test.label(i);
        let ex = fgsm_eps_search(net, &x, y, &cfg, i).map_err(err)?;
        if let Some(eps) = ex.epsilon_used {
            let below = eps - cfg.step;
            if below >= cfg.start - 1e-12 {
                ensure(!fgsm(net, &x, y, below).map_err(err)?.success, format!("image {i}: eps {below} already flips"))?;
                retested += 1;
            }
        }
        outcomes.push(ex.outcome());
    }
    let rec = RobustnessRecord::from_outcomes("m", "He_U", AttackKind::FgsmSearch, &outcomes).map_err(err)?;
    let eps: Vec<f64> = outcomes.iter().filter(|o| o.success).filter_map(|o| o.epsilon_used).collect();
    let censored = outcomes.iter().filter(|o| !o.success).count();
    ensure(outcomes.iter().all(|o| o.success == o.epsilon_used.is_some()), "censoring mismatch")?;
    ensure(rec.n_censored == censored, "censored count")?;
    let mean = eps.iter().sum::<f64>() / eps.len() as f64;
    ensure(rec.avg_epsilon.is_some_and(|v| (v - mean).abs() < 1e-12), "avg epsilon over successes")?;
    Ok(format!("100 images, {retested} re-tested one step lower, eps-bar {mean:.4}, {censored} censored"))
}

fn one_pixel_contract(model: Option<&(MaskedNetwork, Dataset)>) -> Verdict {
    let t = Instant::now();
    let net = bump_net();
    let x = vec![0.0; 784];
    let mut wins = 0;
    for run in 0..50u64 {
        let cfg = DEConfig { pop_size: 50, max_iter: 50, seed: 5000 + run, ..DEConfig::default() };
        let (ex, trace) = one_pixel_traced(&net, &x, 0, &cfg, 0).map_err(err)?;
        ensure(trace.windows(2).all(|w| w[1] >= w[0]), format!("run {run}: trace decreases"))?;
        let changed = (0..784).filter(|&i| ex.perturbed_image[i] != x[i]).count();
        ensure(changed == 1, format!("run {run}: {changed} pixels differ"))?;
        if *trace.last().unwrap() >= random_search_best(&net, &x, 0, 10_000, 9000 + run) {
            wins += 1;
        }
    }
    let mut real = String::new();
    if let Some((mnist_net, test)) = model {
        let correct = correct_indices(mnist_net, test)?;
        let mut flipped = 0;
        for (k, &i) in correct[..20].iter().enumerate() {
            let cfg = DEConfig { pop_size: 50, max_iter: 50, seed: 7000 + k as u64, ..DEConfig::default() };
            let img = test.image(i).to_vec();
            let (ex, trace) = one_pixel_traced(mnist_net, &img, test.label(i), &cfg, i).map_err(err)?;
            ensure(trace.windows(2).all(|w| w[1] >= w[0]), format!("MNIST image {i}: trace decreases"))?;
            let target = ex.candidate.map(|c| c.pixel_index());
            let changed: Vec<usize> = (0..784).filter(|&p| ex.perturbed_image[p] != img[p]).collect();
            ensure(changed.iter().all(|&p| Some(p) == target), format!("MNIST image {i}: pixels {changed:?} differ"))?;
            if ex.success {
                ensure(changed.len() == 1, format!("MNIST image {i}: {} pixels differ", changed.len()))?;
                flipped += 1;
            }
        }
        real = format!("; MNIST model: 20 images perturbed at the candidate pixel only, {flipped} flipped");
    }
    within(Duration::from_secs(600), t, "one-pixel checks")?;
    ensure(wins >= 45, format!("DE matched random search in {wins}/50 runs"))?;
    Ok(format!("DE >= best of 10,000 random candidates in {wins}/50 runs{real}"))
}

fn cli(args: &[&str]) -> std::result::Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_snnlab"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .map_err(err)?;
    if !out.status.success() {
        return Err(format!("snnlab {} failed: {}", args.join(" "), String::from_utf8_lossy(&out.stderr)));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn desk_manifest() -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../manifests/desk.json").display().to_string()
}

fn table_rows(path: &Path) -> std::result::Result<Vec<Vec<String>>, String> {
    let mut r = csv::Reader::from_path(path).map_err(err)?;
    let mut rows = vec![r.headers().map_err(err)?.iter().map(String::from).collect()];
    for rec in r.records() {
        rows.push(rec.map_err(err)?.iter().map(String::from).collect());
    }
    Ok(rows)
}

fn check_table(rows: &[Vec<String>]) -> std::result::Result<usize, String> {
    ensure(rows.len() == 6 && rows.iter().all(|r| r.len() == 6), "table is not 5 x 5 plus labels")?;
    let mut flagged = 0;
    for cell in rows[1..].iter().flat_map(|r| &r[1..]) {
        ensure(!cell.is_empty(), "empty cell")?;
        flagged += usize::from(cell.starts_with("flagged"));
    }
    Ok(flagged)
}

fn pipeline_once(dir: &Path, workers: &str) -> std::result::Result<(Vec<Vec<String>>, Vec<RunRecord>), String> {
    let out = dir.to_str().unwrap();
    let data = mnist_dir().display().to_string();
    cli(&["gen-graphs", "--manifest", &desk_manifest(), "--out-dir", out])?;
    cli(&["sweep", "--data-dir", &data, "--out-dir", out, "--workers", workers])?;
    cli(&["correlate", "--out-dir", out])?;
    let report = cli(&["report", "--out-dir", out])?;
    ensure(!report.trim().is_empty() && dir.join("report.txt").exists(), "empty report")?;
    let rows = table_rows(&dir.join("correlation_table.csv"))?;
    let mut runs: Vec<RunRecord> = read_jsonl(&dir.join("runs.jsonl")).map_err(err)?;
    for r in &mut runs {
        r.started_unix = 0;
        r.elapsed_secs = 0.0;
    }
    runs.sort_by_key(|r| r.key());
    Ok((rows, runs))
}

fn pipeline() -> Verdict {
    ensure(mnist_available(), format!("MNIST not found in {}", mnist_dir().display()))?;
    let m = ExperimentManifest::load(Path::new(&desk_manifest())).map_err(err)?;
    ensure(m.target_graph_count == 10 && m.init_methods.len() == 2, "desk manifest is not 10 x 2")?;
    let t = Instant::now();
    let (a, b) = (tempfile::tempdir().map_err(err)?, tempfile::tempdir().map_err(err)?);
    let (rows, runs) = pipeline_once(a.path(), "1")?;
    let first = t.elapsed();
    ensure(runs.len() == 20 && runs.iter().all(|r| r.is_ok()), format!("{} runs recorded", runs.len()))?;
    let flagged = check_table(&rows)?;
    let (rows2, runs2) = pipeline_once(b.path(), "2")?;
    ensure(rows == rows2, "correlation tables differ between identical runs")?;
    ensure(runs == runs2, "run records differ between identical runs")?;
    ensure(first < Duration::from_secs(7200), format!("pipeline took {first:.1?}"))?;
    Ok(format!("20 models, 25 cells ({flagged} flagged), identical on rerun with other worker count; one pass {first:.1?}"))
}

fn pruning() -> Verdict {
    ensure(mnist_available(), format!("MNIST not found in {}", mnist_dir().display()))?;
    let dir = tempfile::tempdir().map_err(err)?;
    let out = dir.path().to_str().unwrap();
    let t = Instant::now();
    cli(&["prune-baseline", "--manifest", &desk_manifest(), "--data-dir", &mnist_dir().display().to_string(), "--out-dir", out])?;
    let m = ExperimentManifest::load(Path::new(&desk_manifest())).map_err(err)?;
    let steps: Vec<PruningStepRecord> = read_jsonl(&dir.path().join("pruning/steps.jsonl")).map_err(err)?;
    ensure(m.pruning.hidden == [50, 100, 100, 50] && m.pruning.alpha == 0.1, "pruning config")?;
    ensure(steps.len() == m.pruning.steps + 1, format!("{} step records", steps.len()))?;
    let mut expected = 50 * 100 + 100 * 100 + 100 * 50;
    for (k, s) in steps.iter().enumerate() {
        ensure(s.step == k && s.hidden_edges == expected, format!("step {k}: {} edges, expected {expected}", s.hidden_edges))?;
        ensure(s.robustness.len() == 3 && s.metrics.edge_count == expected, format!("step {k}: measures missing"))?;
        expected -= (m.pruning.alpha * expected as f64).floor() as usize;
    }
    let flagged = check_table(&table_rows(&dir.path().join("pruning/correlation_table.csv"))?)?;
    Ok(format!(
        "{} -> {} hidden edges over 20 steps, 25 cells ({flagged} flagged), {:.1?}",
        steps[0].hidden_edges,
        steps.last().unwrap().hidden_edges,
        t.elapsed()
    ))
}

fn main() -> ExitCode {
    let mut failed = 0;
    let mut report = |n: u32, name: &str, v: Verdict| {
        match v {
            Ok(detail) => println!("PASS {n:2} {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {n:2} {name}: {why}");
            }
        }
    };
    report(1, "gradient correctness", gradients());
    report(2, "graph-metric oracles", graph_oracles());
    report(3, "structural invariants", structure());
    report(4, "statistics", statistics());

    let data = load_data();
    let mut scaled = None;
    match &data {
        Ok(d) => report(5, "training sanity", training(d, &mut scaled)),
        Err(e) => report(5, "training sanity", Err(e.clone())),
    }
    let model = match (&data, scaled) {
        (Ok(d), Some(net)) => Ok((net, d.test.clone())),
        (Err(e), _) => Err(e.clone()),
        (Ok(_), None) => Err("no model from criterion 5".to_string()),
    };
    report(6, "FGSM efficacy", model.as_ref().map_err(Clone::clone).and_then(|(n, t)| fgsm_efficacy(n, t)));
    report(7, "epsilon-search minimality", model.as_ref().map_err(Clone::clone).and_then(|(n, t)| eps_minimality(n, t)));
    report(8, "one-pixel contract", one_pixel_contract(model.as_ref().ok()));
    drop(data);
    report(9, "pipeline end-to-end", pipeline());
    report(10, "pruning baseline", pruning());

    if failed == 0 {
        println!("acceptance: all 10 criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} criteria failed");
        ExitCode::FAILURE
    }
}
