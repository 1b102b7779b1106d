//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any failed.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::Rng as _;
use rayon::prelude::*;

use camsight_core::faithfulness::{column_means, consistency, sufficiency, DEFAULT_NOISE_FRAC, DEFAULT_RUNS};
use camsight_core::features::{write_feature_csv, FeatureMatrix};
use camsight_core::metrics::{class_metrics, evaluate, macro_metrics, ConfusionMatrix};
use camsight_core::models::{train, EnsembleOutput, ModelKind, ModelSpec, Node, Tree, TreeEnsemble};
use camsight_core::pcap::{assemble_flows, read_pcap, FlowConfig};
use camsight_core::pipeline::{
    evaluate_pipeline, extract_pcap, read_manifest, rerun_manifest, run_report, split, synth_generate,
    synth_two_stage, LabelSchema, PipelineModel, ReportConfig, SynthSpec, MANIFEST_FILE,
};
use camsight_core::rng::{rng, Rng};
use camsight_core::stats::{mutual_information_with_bins, pca_fit, pearson};
use camsight_core::xai::{
    exact_shapley, kernel_shap, lime_explain, tree_shap, Explainer, LimeConfig, Method, QuartileDiscretizer,
};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(start: Instant, limit: Duration) -> Result<Duration, String> {
    let t = start.elapsed();
    ensure(t < limit, format!("took {t:.1?}, limit {limit:?}"))?;
    Ok(t)
}

// ---------------------------------------------------------------- fixtures

fn random_tree(depth: usize, d: usize, leaf_len: usize, r: &mut Rng) -> Tree {
    fn build(nodes: &mut Vec<Node>, depth: usize, d: usize, leaf_len: usize, r: &mut Rng) -> usize {
        let id = nodes.len();
        // ragged trees: stop early now and then
        if depth == 0 || (nodes.len() > 1 && r.random_bool(0.15)) {
            nodes.push(Node::Leaf {
                value: (0..leaf_len).map(|_| r.random_range(-2.0..2.0)).collect(),
            });
            return id;
        }
        nodes.push(Node::Leaf { value: vec![] });
        let feature = r.random_range(0..d);
        let threshold = r.random_range(-1.0..1.0);
        let left = build(nodes, depth - 1, d, leaf_len, r);
        let right = build(nodes, depth - 1, d, leaf_len, r);
        nodes[id] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }
    let mut nodes = Vec::new();
    build(&mut nodes, depth, d, leaf_len, r);
    Tree { nodes }
}

/// Hand-rolled ensemble: `n_trees` trees over `d` features, either full
/// class vectors or boosting-style per-class scalar leaves.
fn random_ensemble(d: usize, depth: usize, n_trees: usize, n_classes: usize, boosted: bool, r: &mut Rng) -> TreeEnsemble {
    let trees: Vec<Tree> = (0..n_trees)
        .map(|_| random_tree(depth, d, if boosted { 1 } else { n_classes }, r))
        .collect();
    TreeEnsemble {
        n_classes,
        base: (0..n_classes).map(|_| r.random_range(-1.0..1.0)).collect(),
        weights: (0..n_trees).map(|_| r.random_range(0.1..1.5)).collect(),
        targets: (0..n_trees).map(|t| boosted.then_some(t % n_classes)).collect(),
        trees,
        output: if boosted {
            EnsembleOutput::SoftmaxMargin
        } else {
            EnsembleOutput::Probability
        },
    }
}

fn random_rows(n: usize, d: usize, r: &mut Rng) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..d).map(|_| r.random_range(-1.5..1.5)).collect()).collect()
}

/// Gaussian blobs in `d` dimensions; class k is shifted along feature k.
fn blob_matrix(d: usize, classes: usize, n: usize, seed: u64) -> FeatureMatrix {
    let mut r = rng(seed);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for c in 0..classes {
        for _ in 0..n {
            let mut row: Vec<f64> = (0..d).map(|_| r.random_range(-1.0..1.0) + r.random_range(-1.0..1.0)).collect();
            row[c % d] += 1.5;
            rows.push(row);
            labels.push(format!("c{c}"));
        }
    }
    let names = (0..d).map(|j| format!("f{j}")).collect();
    FeatureMatrix::new(names, rows, Some(labels)).unwrap()
}

struct Fixture {
    name: String,
    ensemble: TreeEnsemble,
    d: usize,
    background: Vec<Vec<f64>>,
}

/// Hand-built and trained tree ensembles, all with d <= 12 and depth <= 4.
fn tree_fixtures() -> Vec<Fixture> {
    let mut out = Vec::new();
    let mut r = rng(2024);
    let shapes = [
        (6, 1, 1, false),
        (8, 3, 1, false),
        (8, 4, 3, false),
        (10, 4, 5, false),
        (10, 2, 6, true),
        (12, 3, 4, false),
        (12, 4, 6, true),
        (12, 4, 8, false),
        (9, 4, 9, true),
        (11, 3, 7, false),
        (5, 4, 3, true),
        (12, 2, 12, true),
    ];
    for (i, &(d, depth, n_trees, boosted)) in shapes.iter().enumerate() {
        let classes = 1 + i % 3;
        out.push(Fixture {
            name: format!("hand-{i} d={d} depth={depth} trees={n_trees}"),
            ensemble: random_ensemble(d, depth, n_trees, classes, boosted, &mut r),
            d,
            background: random_rows(16, d, &mut r),
        });
    }
    let kinds = [ModelKind::DT, ModelKind::RF, ModelKind::ET, ModelKind::AB, ModelKind::XGB];
    for (i, &d) in [8usize, 12].iter().enumerate() {
        let m = blob_matrix(d, 3, 80, 31 + i as u64);
        for (j, &kind) in kinds.iter().enumerate() {
            let spec = ModelSpec::new(kind)
                .with_depth(if kind == ModelKind::DT { 4 } else { 3 + j % 2 })
                .with_estimators(6)
                .with_seed(j as u64);
            let model = train(&spec, &m).unwrap();
            let background: Vec<Vec<f64>> = m.rows().iter().step_by(15).take(16).cloned().collect();
            out.push(Fixture {
                name: format!("{kind} d={d}"),
                ensemble: model.trees().unwrap().clone(),
                d,
                background,
            });
        }
    }
    out
}

fn max_depth(e: &TreeEnsemble) -> usize {
    e.trees.iter().map(Tree::depth).max().unwrap_or(0)
}

// ---------------------------------------------------------------- criteria

fn c1_shapley_oracle() -> Outcome {
    let start = Instant::now();
    let fixtures = tree_fixtures();
    ensure(fixtures.len() >= 20, "fewer than 20 fixtures")?;
    let mut worst = 0.0f64;
    for (i, fx) in fixtures.iter().enumerate() {
        ensure(fx.d <= 12 && max_depth(&fx.ensemble) <= 4 && fx.background.len() == 16, format!("{}: shape", fx.name))?;
        let mut r = rng(100 + i as u64);
        let xs = random_rows(100, fx.d, &mut r);
        let err = xs
            .par_iter()
            .enumerate()
            .map(|(n, x)| {
                let class = n % fx.ensemble.n_classes;
                let t = tree_shap(&fx.ensemble, x, class, &fx.background).unwrap();
                let f = |row: &[f64]| fx.ensemble.score(row, class);
                let e = exact_shapley(&f, x, &fx.background).unwrap();
                t.phi.iter().zip(&e.phi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
            })
            .reduce(|| 0.0, f64::max);
        ensure(err <= 1e-9, format!("{}: max |dphi| = {err:e}", fx.name))?;
        worst = worst.max(err);
    }
    let t = within(start, Duration::from_secs(60))?;
    Ok(format!("{} ensembles x 100 instances, max |dphi| = {worst:.1e}, {t:.1?}", fixtures.len()))
}

fn c2_local_accuracy() -> Outcome {
    let mut worst = 0.0f64;
    let mut checked = 0;
    for (i, fx) in tree_fixtures().iter().enumerate() {
        let mut r = rng(500 + i as u64);
        let xs = random_rows(1000, fx.d, &mut r);
        let err = xs
            .par_iter()
            .enumerate()
            .map(|(n, x)| {
                let class = n % fx.ensemble.n_classes;
                let score = fx.ensemble.score(x, class);
                let f = |row: &[f64]| fx.ensemble.score(row, class);
                let t = tree_shap(&fx.ensemble, x, class, &fx.background).unwrap();
                let e = exact_shapley(&f, x, &fx.background).unwrap();
                let gap = |base: f64, phi: &[f64]| (base + phi.iter().sum::<f64>() - score).abs();
                gap(t.base_value, &t.phi).max(gap(e.base_value, &e.phi))
            })
            .reduce(|| 0.0, f64::max);
        ensure(err <= 1e-6, format!("{}: |base + sum phi - f| = {err:e}", fx.name))?;
        worst = worst.max(err);
        checked += 1;
    }
    // the same identity through the model-level explainer (probability / margin outputs)
    let m = blob_matrix(10, 3, 60, 9);
    for kind in [ModelKind::RF, ModelKind::XGB] {
        let model = train(&ModelSpec::new(kind).with_depth(4).with_estimators(8), &m).unwrap();
        for method in [Method::Tree, Method::Exact] {
            let ex = Explainer::from_training(method, &m, 16, 3).unwrap();
            let mut r = rng(77);
            let xs = random_rows(1000, 10, &mut r);
            let err = xs
                .par_iter()
                .enumerate()
                .map(|(n, x)| {
                    let class = n % 3;
                    let a = ex.explain(&model, x, class, n).unwrap();
                    (a.base_value + a.phi.iter().sum::<f64>() - model.explained_output(x, class)).abs()
                })
                .reduce(|| 0.0, f64::max);
            ensure(err <= 1e-6, format!("{kind}/{method}: {err:e}"))?;
            worst = worst.max(err);
            checked += 1;
        }
    }
    Ok(format!("{checked} fixtures x 1000 instances (tree and exact), max gap {worst:.1e}"))
}

fn c3_kernel_shap() -> Outcome {
    let mut r = rng(3);
    // d = 8, full coalition design
    let mut worst_full = 0.0f64;
    for i in 0..4 {
        let e = random_ensemble(8, 4, 5, 2, i % 2 == 1, &mut r);
        let bg = random_rows(16, 8, &mut r);
        for (n, x) in random_rows(25, 8, &mut r).iter().enumerate() {
            let f = |row: &[f64]| e.score(row, n % 2);
            let k = kernel_shap(&f, x, &bg, 1 << 8, n as u64).unwrap();
            let ex = exact_shapley(&f, x, &bg).unwrap();
            let err = k.phi.iter().zip(&ex.phi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            ensure(err <= 1e-9, format!("full design d=8: {err:e}"))?;
            worst_full = worst_full.max(err);
        }
    }
    // d = 12, 4096 sampled coalitions, 10 seeds
    let mut worst_rel = 0.0f64;
    for fixture in 0..3 {
        let e = random_ensemble(12, 4, 6, 1, false, &mut r);
        let bg = random_rows(16, 12, &mut r);
        let f = |row: &[f64]| e.score(row, 0);
        let scores: Vec<f64> = bg.iter().map(|b| f(b)).collect();
        let range = scores.iter().copied().fold(f64::MIN, f64::max) - scores.iter().copied().fold(f64::MAX, f64::min);
        ensure(range > 0.0, "flat background")?;
        for x in random_rows(5, 12, &mut r) {
            let ex = exact_shapley(&f, &x, &bg).unwrap();
            for seed in 0..10u64 {
                let k = kernel_shap(&f, &x, &bg, 4096, seed * 7919 + fixture).unwrap();
                let err = k.phi.iter().zip(&ex.phi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                ensure(err < 0.05 * range, format!("d=12 seed {seed}: {err} vs range {range}"))?;
                worst_rel = worst_rel.max(err / range);
            }
        }
    }
    // 4096 covers all 4094 proper coalitions at d = 12, so the budget is
    // enumerated there; d = 14 runs the same budget through the sampler
    let mut worst_sampled = 0.0f64;
    let e = random_ensemble(14, 4, 6, 1, false, &mut r);
    let bg = random_rows(16, 14, &mut r);
    let f = |row: &[f64]| e.score(row, 0);
    let scores: Vec<f64> = bg.iter().map(|b| f(b)).collect();
    let range = scores.iter().copied().fold(f64::MIN, f64::max) - scores.iter().copied().fold(f64::MAX, f64::min);
    for x in random_rows(3, 14, &mut r) {
        let ex = exact_shapley(&f, &x, &bg).unwrap();
        for seed in 0..10u64 {
            let k = kernel_shap(&f, &x, &bg, 4096, seed).unwrap();
            let err = k.phi.iter().zip(&ex.phi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            ensure(err < 0.05 * range, format!("d=14 seed {seed}: {err} vs range {range}"))?;
            worst_sampled = worst_sampled.max(err / range);
        }
    }
    Ok(format!(
        "d=8 full design max err {worst_full:.1e}; 4096 samples max err {:.2}% of range at d=12, {:.2}% at d=14",
        100.0 * worst_rel,
        100.0 * worst_sampled
    ))
}

fn c4_lime_recovery() -> Outcome {
    let d = 6;
    let names: Vec<String> = (0..d).map(|j| format!("x{j}")).collect();
    let mut r = rng(4);
    let training: Vec<Vec<f64>> = (0..500).map(|_| (0..d).map(|_| r.random_range(0.0..10.0)).collect()).collect();
    let disc = QuartileDiscretizer::fit(&names, &training).unwrap();
    let f = |row: &[f64]| 5.0 * row[3];
    let mut hits = 0;
    for run in 0..100u64 {
        let mut rr = rng(10_000 + run);
        let x: Vec<f64> = (0..d).map(|_| rr.random_range(0.0..10.0)).collect();
        let e = lime_explain(
            &f,
            &x,
            &disc,
            LimeConfig {
                seed: run,
                ..LimeConfig::default()
            },
        )
        .unwrap();
        if e.conditions.first().map(|c| c.feature) == Some(3) {
            hits += 1;
        }
    }
    ensure(hits >= 95, format!("relevant feature first in {hits}/100 runs"))?;
    Ok(format!("relevant feature first in {hits}/100 runs"))
}

fn faithfulness_on(spec: SynthSpec) -> Result<String, String> {
    let name = if spec.classes.len() == 4 { "synth4" } else { "synth6" };
    let data = synth_generate(&spec).unwrap();
    let (train_m, test_m) = split(&data, 0.8, spec.seed + 1, true).unwrap();
    let model = train(&ModelSpec::new(ModelKind::XGB), &train_m).unwrap();
    let train_a = model.align(&train_m).unwrap();
    let test_a = model.align(&test_m).unwrap();
    let rows = &test_a.rows()[..test_a.n_rows().min(200)];
    let ex = Explainer::from_training(Method::Tree, &train_a, 100, 11).unwrap();
    let c = consistency(&model, rows, &ex, DEFAULT_NOISE_FRAC, DEFAULT_RUNS, 12).unwrap();
    let fill = column_means(train_a.rows());
    let s10 = sufficiency(&model, rows, &ex, 10, &fill).unwrap();
    let zero = consistency(&model, rows, &ex, 0.0, 2, 13).unwrap();
    let sd = sufficiency(&model, rows, &ex, model.n_features(), &fill).unwrap();
    ensure(c.overall >= 0.7, format!("{name}: consistency {:.3}", c.overall))?;
    ensure(s10 >= 0.95, format!("{name}: sufficiency@10 {s10:.3}"))?;
    ensure(
        zero.overall == 1.0 && zero.per_feature.iter().all(|(_, v)| *v == 1.0),
        format!("{name}: zero-noise consistency {}", zero.overall),
    )?;
    ensure(sd == 1.0, format!("{name}: sufficiency@d {sd}"))?;
    Ok(format!("{name}: consistency {:.3}, sufficiency@10 {s10:.3}", c.overall))
}

fn c5_faithfulness() -> Outcome {
    let start = Instant::now();
    let a = faithfulness_on(SynthSpec::synth4(50))?;
    let b = faithfulness_on(SynthSpec::synth6(51))?;
    let t = within(start, Duration::from_secs(300))?;
    Ok(format!("{a}; {b}; zero noise = 1, k = d = 1; {t:.1?}"))
}

const ENSEMBLES: [ModelKind; 4] = [ModelKind::RF, ModelKind::XGB, ModelKind::ET, ModelKind::AB];

fn c6_pipeline() -> Outcome {
    let start = Instant::now();
    let mut notes = Vec::new();
    for (spec, watched) in [(SynthSpec::synth4(60), Some("IoTCam")), (SynthSpec::synth6(61), None)] {
        let name = if watched.is_some() { "synth4" } else { "synth6" };
        let data = synth_generate(&spec).unwrap();
        let (train_m, test_m) = split(&data, 0.8, 62, true).unwrap();
        let truth = test_m.require_labels().unwrap();
        let results: Vec<(ModelKind, f64, f64)> = ENSEMBLES
            .par_iter()
            .map(|&kind| {
                let model = train(&ModelSpec::new(kind).with_seed(63), &train_m).unwrap();
                let pred = model.predict_matrix(&test_m).unwrap();
                let ev = evaluate(truth, &pred, &model.labels).unwrap();
                // synth6 has no IoTCam class; every camera class stands in for it
                let fnr = match watched {
                    Some(l) => ev.class(l).unwrap().fn_rate,
                    None => ev.per_class.iter().map(|c| c.fn_rate).fold(0.0, f64::max),
                };
                (kind, ev.macro_avg.micro_accuracy, fnr)
            })
            .collect();
        for (kind, acc, fnr) in results {
            ensure(acc >= 0.95 && fnr <= 0.03, format!("{name} {kind}: accuracy {acc:.4}, FN {fnr:.4}"))?;
            notes.push(format!("{name}/{kind} {acc:.3}/{fnr:.3}"));
        }
    }
    // gating, every test row, each ensemble kind driving both stages
    let data = synth_two_stage(300, 64).unwrap();
    let (train_m, test_m) = split(&data, 0.8, 65, true).unwrap();
    let schema = LabelSchema::default();
    let mut rows = 0;
    for kind in ENSEMBLES {
        let spec = ModelSpec::new(kind).with_estimators(50).with_seed(66);
        let p = PipelineModel::train(&train_m, &spec, &spec, &schema).unwrap();
        for out in p.classify_matrix(&test_m, None).unwrap() {
            let gated = out.stage1 == "IoTCam";
            ensure(out.stage2.is_some() == gated, format!("{kind}: gating broken on {out:?}"))?;
            if let Some(s2) = &out.stage2 {
                ensure(schema.stage2.contains(s2), format!("{kind}: stage 2 label {s2}"))?;
            }
            rows += 1;
        }
        ensure(evaluate_pipeline(&p, &test_m).unwrap().gating_violations == 0, "violations reported")?;
    }
    let t = within(start, Duration::from_secs(600))?;
    Ok(format!("acc/FN {}; gating held on {rows} rows; {t:.1?}", notes.join(", ")))
}

fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn c7_golden() -> Outcome {
    let names = ["three_pkt", "timeout_split", "fin_closure", "one_packet", "no_backward", "bulk_rst", "interleaved"];
    for name in names {
        let (v, _) = extract_pcap(fixture_dir().join(format!("{name}.pcap")), FlowConfig::default()).unwrap();
        let m = FeatureMatrix::from_vectors(&v, None).unwrap();
        let mut out = Vec::new();
        write_feature_csv(&mut out, &m).unwrap();
        let expected = std::fs::read(fixture_dir().join(format!("{name}.csv"))).unwrap();
        ensure(out == expected, format!("{name}: CSV differs"))?;
        ensure(String::from_utf8(out).unwrap().lines().next().unwrap().split(',').count() == 77, "77 columns")?;
    }
    let flows = |n: &str| {
        let (p, _) = read_pcap(fixture_dir().join(format!("{n}.pcap"))).unwrap();
        assemble_flows(p, FlowConfig::default()).unwrap()
    };
    ensure(flows("timeout_split").len() == 2, "timeout split")?;
    ensure(flows("fin_closure").len() == 2, "FIN closure")?;
    ensure(flows("one_packet")[0].packets.len() == 1, "one-packet flow")?;
    let (v, _) = extract_pcap(fixture_dir().join("no_backward.pcap"), FlowConfig::default()).unwrap();
    ensure(v[0].get("Init Bwd Win Byts") == Some(-1.0), "-1 sentinel")?;
    Ok(format!("{} captures byte-exact", names.len()))
}

fn c8_metrics() -> Outcome {
    let c = ConfusionMatrix::from_counts(vec!["a".into(), "b".into()], vec![vec![8, 2], vec![1, 9]]).unwrap();
    let m0 = class_metrics(&c, 0).unwrap();
    ensure(m0.precision == 8.0 / 9.0, format!("precision {}", m0.precision))?;
    ensure(m0.recall == 0.8 && m0.accuracy == 17.0 / 20.0 && m0.fn_rate == 0.2, format!("{m0:?}"))?;
    let m1 = class_metrics(&c, 1).unwrap();
    ensure(m1.precision == 9.0 / 11.0 && m1.recall == 0.9 && m1.fn_rate == 0.1, format!("{m1:?}"))?;
    let mac = macro_metrics(&c).unwrap();
    // 0.85 is not representable; the hand value is checked to 1e-12
    ensure((mac.recall - 0.85).abs() <= 1e-12, format!("macro recall {}", mac.recall))?;
    ensure(mac.precision == (8.0 / 9.0 + 9.0 / 11.0) / 2.0, "macro precision")?;

    // 3-class hand matrix
    let c3 = ConfusionMatrix::from_counts(
        vec!["x".into(), "y".into(), "z".into()],
        vec![vec![5, 1, 0], vec![2, 3, 1], vec![0, 0, 4]],
    )
    .unwrap();
    let y = class_metrics(&c3, 1).unwrap();
    ensure((y.tp, y.fp, y.fn_, y.tn) == (3, 1, 3, 9), format!("{y:?}"))?;
    ensure(y.precision == 0.75 && y.recall == 0.5 && y.accuracy == 12.0 / 16.0, format!("{y:?}"))?;
    ensure(c3.micro_accuracy() == 12.0 / 16.0, "micro accuracy")?;

    // predictions through `evaluate` reproduce the 2x2 matrix
    let truth: Vec<&str> = [vec!["a"; 10], vec!["b"; 10]].concat();
    let pred: Vec<&str> = [vec!["a"; 8], vec!["b"; 2], vec!["a"; 1], vec!["b"; 9]].concat();
    let ev = evaluate(&truth, &pred, &["a".to_string(), "b".to_string()]).unwrap();
    ensure(ev.confusion.counts == c.counts, "evaluate confusion")?;

    let mut r = rng(8);
    let cases = 2000;
    for _ in 0..cases {
        let k = r.random_range(2..7);
        let counts: Vec<Vec<u64>> = (0..k).map(|_| (0..k).map(|_| r.random_range(0..30)).collect()).collect();
        let labels = (0..k).map(|i| format!("l{i}")).collect();
        let c = ConfusionMatrix::from_counts(labels, counts.clone()).unwrap();
        for (i, row) in counts.iter().enumerate() {
            let m = class_metrics(&c, i).unwrap();
            if row.iter().sum::<u64>() > 0 {
                ensure((m.fn_rate - (1.0 - m.recall)).abs() <= 1e-15, format!("fn_rate {} recall {}", m.fn_rate, m.recall))?;
            }
        }
    }
    Ok(format!("hand matrices exact; fn_rate = 1 - recall on {cases} fuzz cases"))
}

fn c9_stats() -> Outcome {
    let mut r = rng(9);
    // deterministic label function with k = 4 equiprobable classes
    let n = 20_000;
    let xs: Vec<f64> = (0..n).map(|i| (i % 4) as f64 * 10.0 + r.random_range(0.0..1.0)).collect();
    let labels: Vec<String> = xs.iter().map(|x| format!("k{}", (x / 10.0) as usize)).collect();
    let m = FeatureMatrix::new(vec!["x".into()], xs.iter().map(|&x| vec![x]).collect(), Some(labels.clone())).unwrap();
    let mi = mutual_information_with_bins(&m, &labels, 20).unwrap().scores[0];
    ensure((mi - 4f64.ln()).abs() <= 0.01, format!("MI {mi} vs ln 4"))?;

    let indep: Vec<Vec<f64>> = (0..n).map(|_| vec![r.random_range(0.0..1.0)]).collect();
    let rand_labels: Vec<String> = (0..n).map(|_| format!("k{}", r.random_range(0..4))).collect();
    let mi0 = mutual_information_with_bins(
        &FeatureMatrix::new(vec!["u".into()], indep, Some(rand_labels.clone())).unwrap(),
        &rand_labels,
        20,
    )
    .unwrap()
    .scores[0];
    ensure(mi0 < 0.02, format!("independent MI {mi0}"))?;

    let x: Vec<f64> = (0..1000).map(|_| r.random_range(-50.0..50.0)).collect();
    let y: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
    let rho = pearson(&x, &y);
    ensure((rho - 1.0).abs() <= 1e-12, format!("pearson {rho}"))?;

    let mut worst_orth = 0.0f64;
    for (threshold, d) in [(0.5, 6), (0.9, 8), (0.95, 5), (0.99, 3)] {
        let rows: Vec<Vec<f64>> = (0..400)
            .map(|_| {
                let z: f64 = r.random_range(-1.0..1.0);
                (0..d).map(|j| z * j as f64 + r.random_range(-1.0..1.0)).collect()
            })
            .collect();
        let names = (0..d).map(|j| format!("f{j}")).collect();
        let p = pca_fit(&FeatureMatrix::new(names, rows, None).unwrap(), threshold).unwrap();
        ensure(p.cumulative_ratio() >= threshold, format!("PCA {} < {threshold}", p.cumulative_ratio()))?;
        for (a, u) in p.components.iter().enumerate() {
            for (b, v) in p.components.iter().enumerate() {
                let dot: f64 = u.iter().zip(v).map(|(x, y)| x * y).sum();
                worst_orth = worst_orth.max((dot - if a == b { 1.0 } else { 0.0 }).abs());
            }
        }
    }
    ensure(worst_orth <= 1e-9, format!("orthonormality {worst_orth:e}"))?;
    Ok(format!(
        "MI {mi:.4} (ln 4 = {:.4}), independent {mi0:.4}, pearson 1{:+.0e}, orthonormality {worst_orth:.0e}",
        4f64.ln(),
        rho - 1.0
    ))
}

const REPORTS: [&str; 3] = [
    r#"
seed = 101
[data]
source = "synth4"
n_per_class = 80
[analysis]
[[models]]
kind = "XGB"
n_estimators = 20
max_depth = 4
[[models]]
kind = "RF"
n_estimators = 20
[[models]]
kind = "LR"
[explain]
background = 20
max_rows = 30
[faithfulness]
runs = 2
max_rows = 30
"#,
    r#"
seed = 102
[data]
source = "synth6"
n_per_class = 60
[[models]]
kind = "ET"
n_estimators = 15
[[models]]
kind = "kNN"
[explain]
method = "kernel"
background = 10
kernel_samples = 200
max_rows = 10
"#,
    r#"
seed = 103
[data]
source = "synth-two-stage"
n_per_class = 60
[[models]]
kind = "AB"
n_estimators = 20
[two_stage.stage1]
kind = "DT"
[two_stage.stage2]
kind = "NB"
"#,
];

fn c10_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut files = 0;
    for (i, text) in REPORTS.iter().enumerate() {
        let a = dir.path().join(format!("r{i}a"));
        let b = dir.path().join(format!("r{i}b"));
        let cfg = ReportConfig::parse(text, dir.path(), None).unwrap();
        run_report(&cfg, text, dir.path(), &a).unwrap();
        let manifest = read_manifest(&a.join(MANIFEST_FILE)).unwrap();
        let rerun = rerun_manifest(&manifest, &b).unwrap();
        ensure(manifest.mismatches(&rerun.manifest).is_empty(), format!("report {i}: output hashes differ"))?;
        for o in &manifest.outputs {
            let x = std::fs::read(a.join(&o.file)).unwrap();
            let y = std::fs::read(b.join(&o.file)).unwrap();
            ensure(x == y, format!("report {i}: {} differs", o.file))?;
            files += 1;
        }
        ensure(manifest.output_hash("metrics.json").is_some(), "metrics.json missing")?;
    }
    Ok(format!("{} manifests rerun, {files} files byte-identical", REPORTS.len()))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    // `cargo test` passes harness flags such as `--nocapture`; a name filter
    // skips the suite unless it matches.
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let criteria: [Criterion; 10] = [
        ("tree SHAP equals exact enumeration", c1_shapley_oracle),
        ("local accuracy", c2_local_accuracy),
        ("kernel SHAP accuracy", c3_kernel_shap),
        ("LIME single-feature recovery", c4_lime_recovery),
        ("faithfulness on synthetic data", c5_faithfulness),
        ("ensemble accuracy, FN rate and gating", c6_pipeline),
        ("flow extraction golden captures", c7_golden),
        ("metrics arithmetic", c8_metrics),
        ("statistics", c9_stats),
        ("report determinism", c10_determinism),
    ];
    if !filters.is_empty() && !filters.iter().any(|f| "acceptance".contains(f.as_str())) {
        return;
    }
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            Err(e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
