//! Acceptance gate. Prints one PASS or FAIL line per criterion.
//!
//! Criteria 5 to 7 train on the synthetic benchmark for three seeds and
//! take tens of minutes on one core. The process exits with status 0 even
//! when a criterion fails, so that the rest of the test suite still runs;
//! set `ACCEPTANCE_STRICT=1` to turn any failure into a nonzero exit.

#[path = "../../core/tests/support/mod.rs"]
mod support;

use std::fmt::Write as _;
use std::path::Path;
use std::time::{Duration, Instant};

use actionspotter::baselines::{
    redraw_detections, read_detections, supervised_actionspotter, uniform_policy, FrameModel, FrameModelKind,
};
use actionspotter::dataset::{
    read_predictions, synth_generate, FeatureSequence, GroundTruthSegment, SpotPrediction,
    SynthConfig, VideoAnnotation,
};
use actionspotter::env::{rollout, BrowseActionSet, Mode, RolloutParams};
use actionspotter::metric::{spotting_map, MapAccumulator};
use actionspotter::nn::{fd_check, ModelParameters, ModelShape};
use actionspotter::seed;
use actionspotter::trainer::{episode_loss, replay, train, EpisodeTargets, LossWeights, SpotterPolicy, TrainOutcome};
use actionspotter_cli::commands::{cmd_eval, train_into, EvalSource, PREDICTIONS_FILE, TRAIN_REPORT_FILE};
use actionspotter_cli::config::TrainConfig;
use actionspotter_cli::Globals;
use rand::Rng;
use support::{brute_force_map, random_annotations, random_spots};

const SEEDS: [u64; 3] = [0, 1, 2];

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn fixture(name: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/golden").join(name)
}

fn metric_oracle() -> Verdict {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for i in 0..1000u64 {
        let mut rng = seed::rng(i, &[1]);
        let gts = random_annotations(&mut rng, 4, 3, 20);
        let preds = random_spots(&mut rng, &gts, 12);
        let lib = spotting_map(&preds, &gts).expect("valid instance");
        worst = worst.max((lib - brute_force_map(&preds, &gts)).abs());
    }
    let took = start.elapsed();
    verdict(
        worst < 1e-9 && took < Duration::from_secs(10),
        format!("max |library - brute force| {worst:.1e} over 1000 instances in {:.2} s", took.as_secs_f64()),
    )
}

fn accumulator() -> Verdict {
    let mut worst: f64 = 0.0;
    for i in 0..100u64 {
        let mut rng = seed::rng(i, &[2]);
        let gts = random_annotations(&mut rng, 4, 3, 80);
        let preds: Vec<SpotPrediction> = (0..200)
            .map(|_| {
                let v = &gts.videos[rng.random_range(0..gts.videos.len())];
                SpotPrediction {
                    video: v.id.clone(),
                    t: rng.random_range(0..v.num_frames),
                    score: rng.random_range(0..40) as f64 / 40.0,
                    label: rng.random_range(0..gts.num_classes),
                }
            })
            .collect();
        let mut acc = MapAccumulator::new(&gts);
        for k in 0..preds.len() {
            let inc = acc.insert(&preds[k]).expect("valid spot");
            let batch = spotting_map(&preds[..=k], &gts).expect("valid spots");
            worst = worst.max((inc - batch).abs());
        }
    }
    verdict(worst <= 1e-12, format!("max |incremental - batch| {worst:.1e} over 100 traces of 200 spots"))
}

fn telescoping() -> Verdict {
    let data = synth_generate(&SynthConfig::default()).expect("benchmark data").train;
    let actions = BrowseActionSet::default();
    let shape = ModelShape { input_dim: 16, hidden: 16, num_classes: 4, num_actions: 3, memory: true };
    let mut worst: f64 = 0.0;
    let mut episodes = 0;
    for (gi, gamma) in [1.0, 0.99, 0.9, 0.5].into_iter().enumerate() {
        let mut rng = seed::rng(gi as u64, &[3]);
        for v in data.videos.iter().take(100) {
            // Fresh random weights per episode so keep rates vary.
            let params = ModelParameters::random(shape, 1.0, &mut rng).expect("shape");
            let mut policy = SpotterPolicy::new(&params);
            let trace = rollout(
                &mut policy,
                &v.features,
                Some(&v.annotation),
                4,
                &actions,
                Mode::Train,
                RolloutParams { gamma, rho: 0.0 },
                &mut rng,
            )
            .expect("rollout");
            let n = trace.len() as i32;
            let sum: f64 = trace.rewards().iter().enumerate().map(|(k, r)| gamma.powi(k as i32 + 1) * r).sum();
            let target = gamma.powi(n + 1) * trace.final_map().expect("rewarded");
            worst = worst.max((sum - target).abs());
            episodes += 1;
        }
    }
    verdict(worst < 1e-9, format!("max residual {worst:.1e} over {episodes} episodes, gamma in {{1, .99, .9, .5}}"))
}

/// Max relative error of the analytic gradient of one random episode, and
/// the number of steps the episode took.
fn episode_fd(shape: ModelShape, actions: &BrowseActionSet, rows: usize, gamma: f64, seed_value: u64, corrupt: bool) -> (f64, usize) {
    let mut rng = seed::rng(seed_value, &[4]);
    let params = ModelParameters::random(shape, 1.0, &mut rng).expect("shape");
    let data: Vec<f64> = (0..rows * shape.input_dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    let features = FeatureSequence::new("v", shape.input_dim, 1, data).expect("features");
    let annotation = VideoAnnotation {
        id: "v".into(),
        num_frames: rows,
        segments: vec![
            GroundTruthSegment { label: 0, start: 1, end: 2 },
            GroundTruthSegment { label: shape.num_classes - 1, start: rows / 2, end: rows - 1 },
        ],
    };
    let mut policy = SpotterPolicy::new(&params);
    let trace = rollout(
        &mut policy,
        &features,
        Some(&annotation),
        shape.num_classes,
        actions,
        Mode::Train,
        RolloutParams { gamma, rho: 0.0 },
        &mut rng,
    )
    .expect("rollout");
    let caches = policy.take_caches();
    let targets = EpisodeTargets::new(&trace, &annotation, shape.num_classes, 1, gamma).expect("targets");
    let weights = LossWeights { cls: 1.0, selector: 0.7, critic: 1.0, actor: 1.0, learned_browse: true };
    let (_, mut grad) = episode_loss(&params, &caches, &trace, &targets, &weights, None).expect("loss");
    if corrupt {
        let i = (0..grad.data.len()).max_by(|&a, &b| grad.data[a].abs().total_cmp(&grad.data[b].abs())).unwrap();
        grad.data[i] *= 2.0;
    }
    let loss = |p: &[f64]| {
        let mut q = params.clone();
        q.data.copy_from_slice(p);
        let caches = replay(&q, &features, &trace).expect("replay");
        episode_loss(&q, &caches, &trace, &targets, &weights, None).expect("loss").0.total
    };
    let samples = if corrupt { usize::MAX } else { 400 };
    (fd_check(&params.data, &grad.data, loss, 1e-5, samples, &mut rng).max_rel_error, trace.len())
}

fn gradients() -> Verdict {
    let mut worst: f64 = 0.0;
    let mut configs = 0;
    let mut seven_steps = false;
    let dims = [(3, 4, 2, 3), (5, 3, 3, 2), (2, 6, 1, 3), (4, 4, 4, 2), (6, 5, 2, 4)];
    for (i, (d, h, c, a)) in dims.into_iter().enumerate() {
        for memory in [true, false] {
            let shape = ModelShape { input_dim: d, hidden: h, num_classes: c, num_actions: a, memory };
            let actions = BrowseActionSet::new((1..=a).collect()).expect("actions");
            let (err, _) = episode_fd(shape, &actions, 8 + i, [1.0, 0.9][i % 2], 10 + i as u64, false);
            worst = worst.max(err);
            configs += 1;
        }
    }
    // Every displacement is one row, so seven rows unroll to exactly seven
    // steps while the browser head still has three outputs to learn.
    let shape = ModelShape { input_dim: 4, hidden: 5, num_classes: 3, num_actions: 3, memory: true };
    let actions = BrowseActionSet::new(vec![1, 1, 1]).expect("actions");
    let (err, steps) = episode_fd(shape, &actions, 7, 1.0, 99, false);
    worst = worst.max(err);
    configs += 1;
    seven_steps |= steps == 7;
    let (control, _) = episode_fd(shape, &actions, 7, 1.0, 99, true);
    verdict(
        worst < 1e-4 && configs >= 10 && seven_steps && control >= 1e-4,
        format!(
            "max relative error {worst:.1e} over {configs} configurations (7-step episode: {seven_steps}); corrupted gradient error {control:.1e}"
        ),
    )
}

/// Exact skip ratio of a fixed stride over `rows` rows.
fn stride_skip(stride: usize, rows: usize) -> f64 {
    let last = rows - 1;
    let visited = last / stride + 1 + usize::from(last % stride != 0);
    1.0 - visited as f64 / rows as f64
}

struct SeedRun {
    seed: u64,
    full: TrainOutcome,
    full_time: Duration,
    discounted: TrainOutcome,
    naive: f64,
    multitask: f64,
    supervised: f64,
    stride: usize,
    uniform: TrainOutcome,
}

fn benchmark_seed(seed: u64, log: &mut String) -> SeedRun {
    let cfg = TrainConfig::benchmark(seed);
    let (tr, va) = cfg.load_data().expect("benchmark data");
    let hp = &cfg.hyper;
    let start = Instant::now();
    let full = train(&tr, &va, &cfg.actions, hp).expect("train");
    let full_time = start.elapsed();
    let hp95 = actionspotter::trainer::HyperParams { gamma: 0.95, ..hp.clone() };
    let discounted = train(&tr, &va, &cfg.actions, &hp95).expect("train");
    let naive = FrameModel::train(FrameModelKind::Naive, &tr, &va, hp).expect("naive").val_map;
    let multitask = FrameModel::train(FrameModelKind::Multitask, &tr, &va, hp).expect("multitask").val_map;
    let supervised = supervised_actionspotter(&tr, &va, hp).expect("supervised").val_map;
    let rows = va.videos[0].features.frames();
    let stride = (1..=8)
        .min_by(|&a, &b| {
            (stride_skip(a, rows) - full.val_skip_ratio)
                .abs()
                .total_cmp(&(stride_skip(b, rows) - full.val_skip_ratio).abs())
        })
        .unwrap();
    let uniform = train(&tr, &va, &uniform_policy(stride).expect("stride"), hp).expect("train");
    let _ = writeln!(
        log,
        "      seed {seed}: full {:.4} (skip {:.3}, {:.0} s) | gamma .95 {:.4} (skip {:.3}) | naive {naive:.4} multitask {multitask:.4} supervised {supervised:.4} | stride {stride} {:.4} (skip {:.3})",
        full.val_map,
        full.val_skip_ratio,
        full_time.as_secs_f64(),
        discounted.val_map,
        discounted.val_skip_ratio,
        uniform.val_map,
        uniform.val_skip_ratio,
    );
    SeedRun { seed, full, full_time, discounted, naive, multitask, supervised, stride, uniform }
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.collect();
    v.iter().sum::<f64>() / v.len() as f64
}

fn end_to_end(runs: &[SeedRun]) -> Verdict {
    let per_seed = runs.iter().all(|r| {
        r.full.val_map >= 0.85 && r.full.val_map - r.naive >= 0.10 && r.full_time < Duration::from_secs(30 * 60)
    });
    let m = |f: fn(&SeedRun) -> f64| mean(runs.iter().map(f));
    let (naive, multi, sup, full) = (m(|r| r.naive), m(|r| r.multitask), m(|r| r.supervised), m(|r| r.full.val_map));
    let ordered = naive < multi && multi < sup && sup < full;
    let maps: Vec<String> = runs.iter().map(|r| format!("{:.4}", r.full.val_map)).collect();
    let slowest = runs.iter().map(|r| r.full_time.as_secs_f64()).fold(0.0, f64::max);
    verdict(
        per_seed && ordered,
        format!(
            "full mAP per seed [{}], slowest {slowest:.0} s; seed means naive {naive:.4} < multitask {multi:.4} < supervised {sup:.4} < full {full:.4}: {ordered}",
            maps.join(", ")
        ),
    )
}

fn gamma_tradeoff(runs: &[SeedRun]) -> Verdict {
    let skip1 = mean(runs.iter().map(|r| r.full.val_skip_ratio));
    let skip95 = mean(runs.iter().map(|r| r.discounted.val_skip_ratio));
    let map1 = mean(runs.iter().map(|r| r.full.val_map));
    let map95 = mean(runs.iter().map(|r| r.discounted.val_map));
    verdict(
        skip95 >= skip1 + 0.05 && map95 <= map1 + 0.01,
        format!("mean skip {skip1:.3} -> {skip95:.3}, mean mAP {map1:.4} -> {map95:.4} (gamma 1 -> .95)"),
    )
}

fn browsing_vs_uniform(runs: &[SeedRun]) -> Verdict {
    let within = runs.iter().all(|r| r.full.val_map >= r.uniform.val_map - 0.01);
    let above = runs.iter().filter(|r| r.full.val_map > r.uniform.val_map).count();
    let parts: Vec<String> = runs
        .iter()
        .map(|r| format!("seed {} learned {:.4} vs stride {} {:.4}", r.seed, r.full.val_map, r.stride, r.uniform.val_map))
        .collect();
    verdict(within && above >= 2, format!("{}; strictly above on {above}/3", parts.join(", ")))
}

fn redraw_golden() -> Verdict {
    let dets = read_detections(fixture("detections.json")).expect("fixture");
    let spots = redraw_detections(&dets).expect("redraw");
    let centers = dets.iter().zip(&spots).all(|(d, s)| s.t == (d.start + d.end) / 2 && d.start <= s.t);
    let scores = dets.iter().zip(&spots).all(|(d, s)| s.score == d.score && s.label == d.label);
    let golden = read_predictions(fixture("predictions.jsonl")).expect("fixture");
    let dir = tempfile::tempdir().expect("tempdir");
    let pred = dir.path().join("redrawn.jsonl");
    actionspotter::dataset::write_predictions(&spots, &pred).expect("write");
    let eval = cmd_eval(&fixture("annotations.json"), &EvalSource::Predictions(pred), &Globals::default()).expect("eval");
    let map = eval.report.map;
    verdict(
        centers && scores && spots == golden && (map - 5.0 / 6.0).abs() < 1e-12,
        format!("centers {centers}, scores passed through {scores}, matches golden {}, eval mAP {map:.12}", spots == golden),
    )
}

fn determinism() -> Verdict {
    let mut cfg = TrainConfig::benchmark(7);
    cfg.hyper.pretrain_epochs = 2;
    cfg.hyper.epochs = 3;
    let dir = tempfile::tempdir().expect("tempdir");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        std::fs::create_dir_all(out).expect("mkdir");
        train_into(&cfg, out).expect("train");
    }
    let same = |f: &str| std::fs::read(a.join(f)).expect("read") == std::fs::read(b.join(f)).expect("read");
    let (report, preds) = (same(TRAIN_REPORT_FILE), same(PREDICTIONS_FILE));
    verdict(report && preds, format!("train report identical {report}, predictions identical {preds}"))
}

fn main() {
    // Keep `cargo test <filter>` for other targets from running this gate.
    if std::env::args().skip(1).any(|a| !a.starts_with('-')) {
        return;
    }
    let mut log = String::new();
    let mut lines = Vec::new();
    let mut report = |id: usize, name: &str, v: Verdict| {
        let line = format!("{} [{id}] {name}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        println!("{line}");
        lines.push(v.pass);
    };
    report(1, "metric oracle equivalence", metric_oracle());
    report(2, "incremental accumulator", accumulator());
    report(3, "telescoping identity", telescoping());
    report(4, "gradient correctness", gradients());
    let runs: Vec<SeedRun> = SEEDS.iter().map(|&s| benchmark_seed(s, &mut log)).collect();
    report(5, "end-to-end learning", end_to_end(&runs));
    report(6, "gamma trade-off", gamma_tradeoff(&runs));
    report(7, "browsing vs uniform subsampling", browsing_vs_uniform(&runs));
    report(8, "redraw golden file", redraw_golden());
    report(9, "determinism", determinism());
    print!("{log}");
    let passed = lines.iter().filter(|p| **p).count();
    println!("acceptance: {passed}/{} criteria passed", lines.len());
    if passed < lines.len() && std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
