//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! Run with `cargo test --release -p fedmesh-core --test acceptance`.

#![allow(clippy::needless_range_loop)]

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use fedmesh_core::adversary::AdversarySpec;
use fedmesh_core::config::{parse_config, preset, DatasetSource, Mode, PartitionConfig, SimConfig};
use fedmesh_core::fl::{early_stop, init_seed, run_simulation, train_seed, EarlyStopConfig, Scenario, StopMetric};
use fedmesh_core::kernel::SimTime;
use fedmesh_core::learning::{
    deserialize, evaluate, init_model, loss_and_grad, serialize, train, Compression, Dataset, ModelParams, ModelShape,
    TrainConfig,
};
use fedmesh_core::metrics::{render_csv, summarize, EventKind, MetricsFormat};
use fedmesh_core::net::{route, transfer_time, ChannelState, LossMode, Message, NodeId, TopologyGraph, TopologyKind};
use fedmesh_core::rng::seeded;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn synthetic(rows: usize, features: usize, classes: usize, separation: f64) -> DatasetSource {
    DatasetSource::Synthetic {
        rows,
        features,
        classes,
        separation,
    }
}

/// Last evaluated test accuracy per device.
fn final_accuracy(log: &fedmesh_core::metrics::MetricsLog, n: usize) -> Vec<f64> {
    let mut acc = vec![f64::NAN; n];
    for r in log.of_kind(EventKind::Eval) {
        acc[r.device.0] = r.accuracy.expect("eval rows carry accuracy");
    }
    acc
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn c1_aggregation_oracle() -> Outcome {
    let start = Instant::now();
    let n = 5;
    let mut c = SimConfig::with_defaults(21, n, TopologyKind::Star { center: 0 });
    c.mode = Mode::Centralized { aggregator: 0 };
    c.dataset.source = synthetic(1000, 6, 3, 3.0);
    c.rounds = 4;
    c.epochs_per_round = 2;
    let out = run_simulation(&c).expect("run succeeds");
    let sc = Scenario::build(&c).expect("scenario builds");

    // Every client starts the round from the same global model; the new
    // global model is the coordinate mean of what they trained.
    let mut global = init_model(&sc.shape, init_seed(c.seed, None));
    let mut worst = 0.0f64;
    if out.global_models.len() != c.rounds {
        return outcome(false, format!("{} global models for {} rounds", out.global_models.len(), c.rounds));
    }
    for r in 0..c.rounds {
        let mut sum = vec![0.0; global.weights().len()];
        for i in 0..n {
            let tc = TrainConfig {
                epochs: c.epochs_per_round,
                batch_size: sc.batch[i],
                learning_rate: c.learning_rate,
                seed: train_seed(c.seed, i, r),
            };
            let (m, _) = train(&global, &sc.train[i], &tc).expect("training succeeds");
            for (s, w) in sum.iter_mut().zip(m.weights()) {
                *s += w;
            }
        }
        global = global.with_weights(sum.iter().map(|s| s / n as f64).collect()).unwrap();
        worst = worst.max(out.global_models[r].max_abs_diff(&global));
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(worst <= 1e-12 && secs < 10.0, format!("max diff {worst:.3e} (<= 1e-12), {secs:.2}s (< 10s)"))
}

fn c2_p2p_convergence() -> Outcome {
    let start = Instant::now();
    let mut c = SimConfig::with_defaults(7, 3, TopologyKind::Line);
    c.dataset.source = synthetic(3000, 8, 3, 4.0);
    c.rounds = 5;
    c.epochs_per_round = 5;
    c.learning_rate = 0.1;
    let out = run_simulation(&c).expect("run succeeds");
    let sc = Scenario::build(&c).expect("scenario builds");

    let shards: Vec<&Dataset> = sc.train.iter().collect();
    let pooled = Dataset::concat(&shards).unwrap();
    let tc = TrainConfig {
        epochs: c.rounds * c.epochs_per_round,
        batch_size: c.batch_size,
        learning_rate: c.learning_rate,
        seed: train_seed(c.seed, 0, 0),
    };
    let init = init_model(&sc.shape, init_seed(c.seed, None));
    let (central, _) = train(&init, &pooled, &tc).unwrap();
    let oracle = evaluate(&central, &sc.test).unwrap().accuracy;

    let acc = final_accuracy(&out.log, 3);
    let ok = acc.iter().all(|&a| a >= 0.90 && (a - oracle).abs() <= 0.05);
    let secs = start.elapsed().as_secs_f64();
    outcome(
        ok && secs < 30.0,
        format!("device accuracy {acc:.4?}, pooled oracle {oracle:.4} (>= 0.90, within 0.05), {secs:.2}s (< 30s)"),
    )
}

/// Random connected graph: a random spanning tree plus extra edges.
fn random_connected<R: Rng>(rng: &mut R) -> (usize, Vec<(usize, usize)>) {
    let n = rng.random_range(1..=12);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut edges = Vec::new();
    for k in 1..n {
        let parent = order[rng.random_range(0..k)];
        edges.push((parent, order[k]));
    }
    let density: f64 = rng.random_range(0.0..0.5);
    for a in 0..n {
        for b in a + 1..n {
            if rng.random_bool(density) && !edges.contains(&(a, b)) && !edges.contains(&(b, a)) {
                edges.push((a, b));
            }
        }
    }
    (n, edges)
}

fn floyd_warshall(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    const INF: usize = usize::MAX / 4;
    let mut d = vec![vec![INF; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0;
    }
    for &(a, b) in edges {
        d[a][b] = 1;
        d[b][a] = 1;
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    d
}

fn c3_routing_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = seeded(3);
    let mut pairs = 0;
    for g_idx in 0..200 {
        let (n, edges) = random_connected(&mut rng);
        let g = TopologyGraph::from_edges(n, &edges, 1e6).expect("valid graph");
        let d = floyd_warshall(n, &edges);
        for a in 0..n {
            for b in 0..n {
                if a == b {
                    continue;
                }
                let path = match route(NodeId(a), NodeId(b), &g) {
                    Ok(p) => p,
                    Err(e) => return outcome(false, format!("graph {g_idx}: route {a}->{b} failed: {e}")),
                };
                let walks = path.windows(2).all(|w| g.is_adjacent(w[0], w[1]));
                if !walks || path[0] != NodeId(a) || path[path.len() - 1] != NodeId(b) || path.len() - 1 != d[a][b] {
                    return outcome(false, format!("graph {g_idx}: {a}->{b} path {path:?}, oracle {} hops", d[a][b]));
                }
                pairs += 1;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(secs < 10.0, format!("200 graphs, {pairs} pairs agree, {secs:.2}s (< 10s)"))
}

fn c4_gradient_check() -> Outcome {
    let mut rng = seeded(4);
    let h = 1e-5;
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let input = rng.random_range(1..=8);
        let classes = rng.random_range(2..=3);
        let dims = if rng.random_bool(0.5) {
            vec![input, classes]
        } else {
            vec![input, rng.random_range(1..=5), classes]
        };
        let shape = ModelShape::new(dims).unwrap();
        let params = init_model(&shape, rng.random());
        let batch = rng.random_range(1..=16);
        let x: Vec<f64> = (0..batch * input).map(|_| rng.sample(StandardNormal)).collect();
        let y: Vec<usize> = (0..batch).map(|_| rng.random_range(0..classes)).collect();
        let (_, grad) = loss_and_grad(&params, &x, &y).unwrap();
        for k in 0..grad.len() {
            let mut w = params.weights().to_vec();
            w[k] += h;
            let up = loss_and_grad(&params.with_weights(w.clone()).unwrap(), &x, &y).unwrap().0;
            w[k] -= 2.0 * h;
            let down = loss_and_grad(&params.with_weights(w).unwrap(), &x, &y).unwrap().0;
            let numeric = (up - down) / (2.0 * h);
            let scale = grad[k].abs().max(numeric.abs());
            // Both sides vanish for parameters the batch does not touch.
            let rel = if scale < 1e-10 { 0.0 } else { (grad[k] - numeric).abs() / scale };
            worst = worst.max(rel);
        }
    }
    outcome(worst < 1e-5, format!("max relative error {worst:.3e} (< 1e-5)"))
}

fn c5_transfer_law() -> Outcome {
    let mut rng = seeded(5);
    let msg = Message::new(NodeId(0), NodeId(3), 0, vec![0u8; 40_000], SimTime::ZERO);
    let path = [NodeId(0), NodeId(1), NodeId(2), NodeId(3)];
    let rates = [1e7, 2.5e6, 4e7];
    let delays = [0.001, 0.02, 0.0005];
    let mut details = Vec::new();
    let mut pass = true;
    for p in [0.0, 0.1, 0.3] {
        let channels: Vec<ChannelState> = (0..3)
            .map(|h| ChannelState {
                data_rate: rates[h],
                delay: delays[h],
                loss_prob: p,
            })
            .collect();
        let expected = transfer_time(&msg, &path, &channels, LossMode::Expected, 12_000, &mut rng).unwrap();
        let closed: f64 = (0..3).map(|h| msg.size_bits as f64 / rates[h] / (1.0 - p) + delays[h]).sum();
        let exact = expected == closed;
        let trials = 10_000;
        let total: f64 = (0..trials)
            .map(|_| transfer_time(&msg, &path, &channels, LossMode::Stochastic, 12_000, &mut rng).unwrap())
            .sum();
        let rel = (total / trials as f64 - expected).abs() / expected;
        pass &= exact && rel <= 0.02;
        details.push(format!("p={p}: exact={exact}, stochastic off by {:.3}%", 100.0 * rel));
    }
    outcome(pass, format!("{} (exact, <= 2%)", details.join("; ")))
}

fn scaling_config(degree: usize) -> SimConfig {
    let mut c = SimConfig::with_defaults(6, 100, TopologyKind::RandomRegular { degree });
    c.dataset.source = synthetic(4000, 8, 3, 3.0);
    c.training_graph = fedmesh_core::config::TrainingGraph::Ring;
    c.rounds = 3;
    c.topology.edge_cap = Some(1e7);
    c.channel.delay = 0.005;
    c
}

fn c6_scaling_trend() -> Outcome {
    let start = Instant::now();
    let sparse = summarize(&run_simulation(&scaling_config(3)).expect("run succeeds").log).comm_time;
    let dense = summarize(&run_simulation(&scaling_config(8)).expect("run succeeds").log).comm_time;
    let ratio = sparse / dense;
    let secs = start.elapsed().as_secs_f64();
    outcome(
        ratio >= 1.5 && secs < 300.0,
        format!("comm time degree 3 {sparse:.3}s vs degree 8 {dense:.3}s, ratio {ratio:.3} (>= 1.5), {secs:.2}s (< 300s)"),
    )
}

fn metrics_file(cfg: &SimConfig, dir: &std::path::Path, name: &str) -> Vec<u8> {
    let path = dir.join(name);
    let out = run_simulation(cfg).expect("run succeeds");
    fedmesh_core::metrics::write_metrics(&out.log, &path, MetricsFormat::Csv).unwrap();
    std::fs::read(path).unwrap()
}

fn c7_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut details = Vec::new();
    let mut pass = true;
    for name in ["line3", "star10"] {
        let mut cfg = parse_config(preset(name).unwrap()).unwrap();
        let a = metrics_file(&cfg, dir.path(), "a.csv");
        let b = metrics_file(&cfg, dir.path(), "b.csv");
        cfg.seed += 1;
        let c = metrics_file(&cfg, dir.path(), "c.csv");
        let ok = a == b && a != c;
        pass &= ok;
        details.push(format!("{name}: rerun identical={}, reseeded differs={}", a == b, a != c));
    }
    outcome(pass, details.join("; "))
}

fn c8_adversary_effect() -> Outcome {
    let mut c = SimConfig::with_defaults(2, 4, TopologyKind::Ring);
    c.dataset.source = synthetic(2000, 4, 4, 3.0);
    c.partition = PartitionConfig::Dirichlet { alpha: 0.1 };
    c.rounds = 5;
    c.epochs_per_round = 2;
    let baseline = run_simulation(&c).expect("run succeeds");
    let honest = |log| {
        let acc = final_accuracy(log, 4);
        mean(&acc[1..])
    };
    let base_acc = honest(&baseline.log);

    let mut attacked = c.clone();
    attacked.devices[0].adversary = AdversarySpec::LabelFlip;
    let atk_acc = honest(&run_simulation(&attacked).expect("run succeeds").log);

    // Set the adversary back to Honest explicitly through the config text.
    let mut text = fedmesh_core::config::render_config(&attacked);
    text = text.replace("label_flip", "honest");
    let restored = parse_config(&text).expect("rendered config parses");
    let same = render_csv(&run_simulation(&restored).expect("run succeeds").log) == render_csv(&baseline.log);

    let drop = base_acc - atk_acc;
    outcome(
        drop >= 0.05 && same,
        format!("honest accuracy {base_acc:.4} -> {atk_acc:.4}, drop {drop:.4} (>= 0.05); honest-restored identical={same}"),
    )
}

fn c9_early_stopping() -> Outcome {
    let cfg = EarlyStopConfig {
        patience: 2,
        min_delta: 0.02,
        metric: StopMetric::Loss,
    };
    let seq = [1.0, 0.8, 0.79, 0.79, 0.79];
    let first_stop = (1..=seq.len()).find(|&k| early_stop(&seq[..k], &cfg));
    let exact = first_stop == Some(5);

    // Strictly improving: each step beats the best so far by more than
    // min_delta, and with min_delta 0 any strict decrease counts.
    let mut rng = seeded(9);
    let mut never = true;
    for _ in 0..1000 {
        let min_delta = if rng.random_bool(0.5) { 0.0 } else { rng.random_range(0.0..0.1) };
        let c = EarlyStopConfig {
            patience: rng.random_range(1..=5),
            min_delta,
            metric: StopMetric::Loss,
        };
        let mut v = 10.0;
        let mut hist = Vec::new();
        for _ in 0..30 {
            hist.push(v);
            never &= !early_stop(&hist, &c);
            v -= min_delta + rng.random_range(1e-3..0.2);
        }
    }
    outcome(
        exact && never,
        format!(
            "scripted sequence first stops after entry {:?} (want 5); strictly improving never stops={never}",
            first_stop
        ),
    )
}

fn peak_rss_kib() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    line.split_whitespace().nth(1)?.parse().ok()
}

fn c10_scale_smoke() -> Outcome {
    let start = Instant::now();
    let mut c = SimConfig::with_defaults(10, 450, TopologyKind::RandomRegular { degree: 4 });
    c.dataset.source = synthetic(9000, 8, 3, 3.0);
    c.model.hidden = 16;
    c.rounds = 2;
    let result = run_simulation(&c);
    let secs = start.elapsed().as_secs_f64();
    let peak = peak_rss_kib();
    let mem_ok = peak.is_some_and(|k| k < 2 * 1024 * 1024);
    let detail = format!(
        "{}, {secs:.2}s (< 600s), peak RSS {} (< 2 GiB)",
        match &result {
            Ok(o) => format!("{} records", o.log.len()),
            Err(e) => format!("error: {e}"),
        },
        peak.map(|k| format!("{:.1} MiB", k as f64 / 1024.0)).unwrap_or_else(|| "unknown".into())
    );
    outcome(result.is_ok() && secs < 600.0 && mem_ok, detail)
}

fn c11_compression() -> Outcome {
    let mut rng = seeded(11);
    let mut tensors = 0;
    let mut worst = f64::NEG_INFINITY;
    while tensors < 1000 {
        let shape = ModelShape::new(vec![rng.random_range(1..=20), rng.random_range(2..=10)]).unwrap();
        let spread: f64 = 10f64.powf(rng.random_range(-3.0..3.0));
        let w: Vec<f64> = (0..shape.param_count()).map(|_| spread * rng.sample::<f64, _>(StandardNormal)).collect();
        let p = ModelParams::new(shape.clone(), w).unwrap();
        let back = deserialize(&serialize(&p, Compression::Quantized8), &shape, Compression::Quantized8).unwrap();
        for r in shape.tensor_ranges() {
            let t = &p.weights()[r.clone()];
            let q = &back.weights()[r];
            let lo = t.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = t.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let bound = (hi - lo) / 255.0;
            let err = t.iter().zip(q).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            // Slack for the rounding of `min + code * step` itself.
            worst = worst.max(err - bound - 1e-12 * hi.abs().max(lo.abs()));
            tensors += 1;
        }
    }
    let bound_ok = worst <= 0.0;

    let mut ratios = Vec::new();
    for dims in [vec![100, 10], vec![64, 16], vec![8, 120, 10]] {
        let shape = ModelShape::new(dims).unwrap();
        let p = init_model(&shape, 1);
        let size = |c| Message::new(NodeId(0), NodeId(1), 0, serialize(&p, c), SimTime::ZERO).byte_len();
        ratios.push((shape.param_count(), size(Compression::None) as f64 / size(Compression::Quantized8) as f64));
    }
    let shrink_ok = ratios.iter().all(|&(n, r)| n >= 1000 && r >= 7.0);
    let ratio_text: Vec<String> = ratios.iter().map(|(n, r)| format!("{n} weights {r:.2}x")).collect();
    outcome(
        bound_ok && shrink_ok,
        format!("{tensors} tensors within bound={bound_ok}; shrink {} (>= 7x)", ratio_text.join(", ")),
    )
}

fn main() {
    let criteria: Vec<(u32, fn() -> Outcome)> = vec![
        (1, c1_aggregation_oracle),
        (2, c2_p2p_convergence),
        (3, c3_routing_oracle),
        (4, c4_gradient_check),
        (5, c5_transfer_law),
        (6, c6_scaling_trend),
        (7, c7_determinism),
        (8, c8_adversary_effect),
        (9, c9_early_stopping),
        (10, c10_scale_smoke),
        (11, c11_compression),
    ];
    let mut failed = Vec::new();
    for (n, f) in criteria {
        let start = Instant::now();
        let o = f();
        let secs = start.elapsed().as_secs_f64();
        println!("criterion {n}: {} ({}; {secs:.2}s)", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass {
            failed.push(n);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all criteria pass");
    } else {
        println!("acceptance: failing criteria {failed:?}");
        std::process::exit(1);
    }
}
