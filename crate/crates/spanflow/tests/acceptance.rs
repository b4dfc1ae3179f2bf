//! Acceptance suite: one test per criterion, each printing a PASS line.
//! Run with `cargo test --test acceptance -- --nocapture` to see the lines.

use std::sync::LazyLock;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spanflow::eval::{compositionality_rate, pairing_score, retrieval_rank, PairEmbeddings};
use spanflow::gnn::{
    attention_layer, attention_layer_probe, backward, build_masks, forward, forward_cached,
    rollout, EncoderStack, ModelConfig,
};
use spanflow::layout::{Span, Token};
use spanflow::pagegraph::{bind_pair, build_edges, Direction, PageGraph, UNREACHABLE};
use spanflow::pipeline::{evaluate_pairs, load_generated, train_corpus, LoadedPair, TrainOptions};
use spanflow::synthdoc::{generate_corpus, generate_paragraph_tokens, CorpusSpec, LayoutMix};
use spanflow::train::{ModelParams, TrainConfig};

// ---------------------------------------------------------------------------
// shared fixtures
// ---------------------------------------------------------------------------

/// The desk-scale retrieval protocol: 50 seeded pair-pages, 40 train and 10
/// held out, d = 64.
fn retrieval_spec() -> CorpusSpec {
    CorpusSpec {
        seed: 20260810,
        pages: 50,
        layout_mix: LayoutMix {
            paragraph: 0.1,
            list: 0.15,
            table: 0.75,
        },
        rows_min: 8,
        rows_max: 24,
        cols_min: 2,
        cols_max: 4,
        noise: 0.15,
        hole_rate: 0.25,
    }
}

/// Held-out compositionality tables: 3 pairs of 20+ row, 2-column tables.
fn compositionality_spec() -> CorpusSpec {
    CorpusSpec {
        seed: 777,
        pages: 3,
        layout_mix: LayoutMix::tables_only(),
        rows_min: 20,
        rows_max: 24,
        cols_min: 2,
        cols_max: 2,
        noise: 0.0,
        hole_rate: 0.0,
    }
}

const TRAIN_EPOCHS: usize = 150;
const TRAIN_LR: f64 = 1e-3;
const TRAIN_SEED: u64 = 41;
const MODEL_D: usize = 64;
const MODEL_HEADS: usize = 4;
const MODEL_LAYERS: usize = 8;

struct TrainedModel {
    order: u32,
    params: ModelParams,
    vocab: spanflow::featurize::Vocab,
    config: ModelConfig,
    heldout_top: std::collections::BTreeMap<usize, f64>,
}

struct Fixture {
    models: Vec<TrainedModel>,
    comp_pairs: Vec<LoadedPair>,
}

impl Fixture {
    fn model(&self, order: u32) -> &TrainedModel {
        self.models.iter().find(|m| m.order == order).unwrap()
    }
}

static FIXTURE: LazyLock<Fixture> = LazyLock::new(|| {
    let corpus = generate_corpus(&retrieval_spec()).expect("corpus generation");
    let pairs = load_generated(&corpus.pairs).expect("corpus loading");
    let comp_pairs = load_generated(
        &generate_corpus(&compositionality_spec())
            .expect("compositionality corpus")
            .pairs,
    )
    .expect("compositionality loading");

    let handles: Vec<std::thread::JoinHandle<TrainedModel>> = [8u32, 5, 1]
        .into_iter()
        .map(|order| {
            let pairs = pairs.clone();
            std::thread::spawn(move || {
                let mut train = TrainConfig::with_seed(TRAIN_SEED);
                train.epochs = TRAIN_EPOCHS;
                train.learning_rate = TRAIN_LR;
                let config = ModelConfig::new(MODEL_D, MODEL_HEADS, MODEL_LAYERS, order);
                let mut options = TrainOptions::new(train, config.clone());
                options.holdout = 10;
                let outcome = train_corpus(&pairs, &options).expect("training");
                let artifacts = evaluate_pairs(
                    &pairs[40..],
                    &outcome.vocab,
                    &outcome.state.params,
                    &config,
                    &[1, 3, 5, 10],
                )
                .expect("held-out evaluation");
                TrainedModel {
                    order,
                    params: outcome.state.params,
                    vocab: outcome.vocab,
                    config,
                    heldout_top: artifacts.report.top_k_accuracy,
                }
            })
        })
        .collect();
    let models = handles.into_iter().map(|h| h.join().unwrap()).collect();
    Fixture { models, comp_pairs }
});

fn grid_spans(rows: usize, cols: usize) -> Vec<Span> {
    let mut spans = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let x0 = c as f64 * 100.0;
            let y0 = r as f64 * 40.0;
            let id = r * cols + c;
            spans.push(Span {
                page_id: "grid".to_string(),
                span_id: id,
                tokens: vec![Token::new(
                    "grid",
                    &format!("cell{id}"),
                    x0,
                    y0,
                    x0 + 60.0,
                    y0 + 12.0,
                )],
                x0,
                y0,
                x1: x0 + 60.0,
                y1: y0 + 12.0,
            });
        }
    }
    spans
}

fn random_matrix(n: usize, d: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = Array2::zeros((n, d));
    for v in m.iter_mut() {
        *v = rng.gen_range(-1.0..1.0);
    }
    m
}

// ---------------------------------------------------------------------------
// criterion 1: gradient correctness
// ---------------------------------------------------------------------------

#[test]
fn criterion_1_gradient_correctness() {
    let started = std::time::Instant::now();
    let graph = build_edges(grid_spans(2, 2)).unwrap();
    let config = ModelConfig::new(8, 2, 2, 5);
    let masks = build_masks(&graph, &config).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4242);
    let mut stack = EncoderStack::init(&config, &mut rng);
    let mut feats = random_matrix(4, 8, 4243);
    let upstream = random_matrix(4, 8, 4244);

    let cache = forward_cached(&feats, &masks, &stack, &config).unwrap();
    let (grads, d_feats) = backward(&cache, &masks, &stack, &config, &upstream).unwrap();

    let loss = |stack: &EncoderStack, feats: &Array2<f64>| -> f64 {
        let out = forward_cached(feats, &masks, stack, &config).unwrap().output;
        (&out * &upstream).sum()
    };

    let eps = 1e-5;
    let tol = 1e-4;
    let mut checked = 0usize;
    let mut worst = 0.0f64;
    let analytic: Vec<(String, Vec<f64>)> = grads
        .tensor_slices()
        .into_iter()
        .map(|(n, s)| (n, s.to_vec()))
        .collect();
    for (t_idx, (name, grad_vals)) in analytic.iter().enumerate() {
        for idx in 0..grad_vals.len() {
            let orig = stack.tensor_slices()[t_idx].1[idx];
            stack.tensor_slices_mut()[t_idx].1[idx] = orig + eps;
            let up = loss(&stack, &feats);
            stack.tensor_slices_mut()[t_idx].1[idx] = orig - eps;
            let down = loss(&stack, &feats);
            stack.tensor_slices_mut()[t_idx].1[idx] = orig;
            let fd = (up - down) / (2.0 * eps);
            let rel = (fd - grad_vals[idx]).abs() / fd.abs().max(grad_vals[idx].abs()).max(1e-8);
            assert!(
                rel < tol,
                "ACCEPTANCE 1 gradient-correctness: FAIL at {name}[{idx}] rel {rel}"
            );
            worst = worst.max(rel);
            checked += 1;
        }
    }
    for i in 0..4 {
        for j in 0..8 {
            let orig = feats[[i, j]];
            feats[[i, j]] = orig + eps;
            let up = loss(&stack, &feats);
            feats[[i, j]] = orig - eps;
            let down = loss(&stack, &feats);
            feats[[i, j]] = orig;
            let fd = (up - down) / (2.0 * eps);
            let rel = (fd - d_feats[[i, j]]).abs() / fd.abs().max(d_feats[[i, j]].abs()).max(1e-8);
            assert!(
                rel < tol,
                "ACCEPTANCE 1 gradient-correctness: FAIL at feats[{i},{j}] rel {rel}"
            );
            worst = worst.max(rel);
            checked += 1;
        }
    }
    let elapsed = started.elapsed();
    assert!(
        elapsed.as_secs_f64() < 10.0,
        "ACCEPTANCE 1 gradient-correctness: FAIL runtime {elapsed:?} >= 10 s"
    );
    println!(
        "ACCEPTANCE 1 gradient-correctness: PASS ({checked} gradients, max rel err {worst:.2e}, {elapsed:?})"
    );
}

// ---------------------------------------------------------------------------
// criterion 2: value-zeroing mechanism
// ---------------------------------------------------------------------------

#[test]
fn criterion_2_value_zeroing_mechanism() {
    let graph = build_edges(grid_spans(5, 5)).unwrap();
    let config = ModelConfig::new(16, 4, 1, 5);
    assert!(config.regularization_active());
    let masks = build_masks(&graph, &config).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let stack = EncoderStack::init(&config, &mut rng);
    let feats = random_matrix(25, 16, 56);
    let layer = &stack.layers[0];
    let (base, _) = attention_layer(&feats, &masks, layer, &config).unwrap();

    let mut max_zeroing_delta = 0.0f64;
    let mut min_removal_delta = f64::INFINITY;
    for query in 0..graph.len() {
        let far: Vec<usize> = (0..graph.len())
            .filter(|&j| match graph.hop(query, j) {
                Some((v, h)) => v * v + h * h > 1,
                None => false,
            })
            .collect();
        assert!(!far.is_empty());

        let mut value_src = feats.clone();
        for &j in &far {
            for c in 0..16 {
                value_src[[j, c]] = 0.0;
            }
        }
        let (zeroed, _) = attention_layer_probe(&feats, &value_src, &masks, layer, &config).unwrap();
        for c in 0..16 {
            max_zeroing_delta = max_zeroing_delta.max((base[[query, c]] - zeroed[[query, c]]).abs());
        }

        let mut removed = masks.clone();
        for &j in &far {
            removed.attn[[query, j]] = 0;
        }
        let (absent, _) = attention_layer(&feats, &removed, layer, &config).unwrap();
        let move_max = (0..16)
            .map(|c| (base[[query, c]] - absent[[query, c]]).abs())
            .fold(0.0f64, f64::max);
        min_removal_delta = min_removal_delta.min(move_max);
    }
    assert!(
        max_zeroing_delta <= 1e-9,
        "ACCEPTANCE 2 value-zeroing: FAIL content leak {max_zeroing_delta:.2e}"
    );
    assert!(
        min_removal_delta > 1e-6,
        "ACCEPTANCE 2 value-zeroing: FAIL denominator effect only {min_removal_delta:.2e}"
    );
    println!(
        "ACCEPTANCE 2 value-zeroing: PASS (content delta {max_zeroing_delta:.2e}, removal delta {min_removal_delta:.2e})"
    );
}

// ---------------------------------------------------------------------------
// criterion 3: desk-scale retrieval
// ---------------------------------------------------------------------------

#[test]
fn criterion_3_desk_scale_retrieval() {
    let model = FIXTURE.model(8);
    let top1 = model.heldout_top[&1];
    let top10 = model.heldout_top[&10];
    assert!(
        top1 >= 0.80,
        "ACCEPTANCE 3 desk-retrieval: FAIL top-1 {top1:.3} < 0.80"
    );
    assert!(
        top10 >= 0.95,
        "ACCEPTANCE 3 desk-retrieval: FAIL top-10 {top10:.3} < 0.95"
    );
    println!("ACCEPTANCE 3 desk-retrieval: PASS (top-1 {top1:.3}, top-10 {top10:.3})");
}

// ---------------------------------------------------------------------------
// criterion 4: ablation ordering
// ---------------------------------------------------------------------------

#[test]
fn criterion_4_ablation_ordering() {
    let top1 = |order: u32| FIXTURE.model(order).heldout_top[&1];
    let (o8, o5, o1) = (top1(8), top1(5), top1(1));
    assert!(
        o8 >= o5 && o5 >= o1,
        "ACCEPTANCE 4 ablation-ordering: FAIL {o8:.3} / {o5:.3} / {o1:.3} not monotone"
    );
    assert!(
        o8 - o1 >= 0.05,
        "ACCEPTANCE 4 ablation-ordering: FAIL gap {:.3} < 0.05",
        o8 - o1
    );
    println!(
        "ACCEPTANCE 4 ablation-ordering: PASS (order-8 {o8:.3} >= order-5 {o5:.3} >= order-1 {o1:.3})"
    );
}

// ---------------------------------------------------------------------------
// criterion 5: compositionality
// ---------------------------------------------------------------------------

#[test]
fn criterion_5_compositionality() {
    // analytically additive fixture scores exactly 1
    let mut rng = ChaCha8Rng::seed_from_u64(500);
    let rows = 6;
    let cols = 3;
    let d = 12;
    let row_vecs: Vec<Array1<f64>> = (0..rows)
        .map(|_| Array1::from_iter((0..d).map(|_| rng.gen_range(-1.0..1.0))))
        .collect();
    let col_vecs: Vec<Array1<f64>> = (0..cols)
        .map(|_| Array1::from_iter((0..d).map(|_| rng.gen_range(-1.0..1.0))))
        .collect();
    let additive: Vec<Vec<Array1<f64>>> = (0..rows)
        .map(|r| (0..cols).map(|c| &row_vecs[r] + &col_vecs[c]).collect())
        .collect();
    let fixture_rate = compositionality_rate(&additive).unwrap().rate;
    assert_eq!(
        fixture_rate, 1.0,
        "ACCEPTANCE 5 compositionality: FAIL additive fixture rate {fixture_rate}"
    );

    // trained order-8 model on held-out 20+ row, 2-column tables
    let model = FIXTURE.model(8);
    let comp = &FIXTURE.comp_pairs;
    let tables: usize = comp
        .iter()
        .map(|p| p.table1.is_some() as usize + p.table2.is_some() as usize)
        .sum();
    assert!(tables >= 3, "need at least 3 held-out tables, have {tables}");
    for pair in comp.iter() {
        for grid in [&pair.table1, &pair.table2].into_iter().flatten() {
            assert!(grid.rows >= 20 && grid.cols == 2);
        }
    }
    let artifacts =
        evaluate_pairs(comp, &model.vocab, &model.params, &model.config, &[1]).unwrap();
    let rate = artifacts.report.compositionality_rate.unwrap();
    let applications = artifacts.report.counts.equation_applications;
    assert!(
        rate >= 0.60,
        "ACCEPTANCE 5 compositionality: FAIL rate {rate:.3} < 0.60 over {applications} applications"
    );
    println!(
        "ACCEPTANCE 5 compositionality: PASS (trained rate {rate:.3} over {applications} applications, fixture 1.0)"
    );
}

// ---------------------------------------------------------------------------
// criterion 6: rollout properties
// ---------------------------------------------------------------------------

#[test]
fn criterion_6_rollout_properties() {
    let model = FIXTURE.model(8);

    // paragraph-only page through the trained model
    let tokens = generate_paragraph_tokens(606, 14);
    let spans = spanflow::layout::segment_page(&tokens, &spanflow::layout::LayoutConfig::default())
        .unwrap();
    let graph = build_edges(spans).unwrap();
    let mut feats = Array2::zeros((graph.len(), model.config.d));
    for (i, span) in graph.spans.iter().enumerate() {
        let idx = spanflow::featurize::span_indices(span, &model.vocab).unwrap();
        feats
            .row_mut(i)
            .assign(&spanflow::featurize::embed_indices(&idx, &model.params.table));
    }
    let (_, attention) = forward(&graph, &feats, &model.params.stack, &model.config).unwrap();
    let map = rollout(&attention).unwrap();

    let mut max_row_error = 0.0f64;
    for i in 0..graph.len() {
        max_row_error = max_row_error.max((map.row(i).sum() - 1.0).abs());
    }
    assert!(
        max_row_error <= 1e-9,
        "ACCEPTANCE 6 rollout: FAIL row sum error {max_row_error:.2e}"
    );

    let query = graph.len() / 2;
    let up = graph.direction_edges[query][Direction::Up as usize].expect("mid-paragraph span");
    let down = graph.direction_edges[query][Direction::Down as usize].expect("mid-paragraph span");
    let weights = map.row(query);
    let neighbor_mean = (weights[up] + weights[down]) / 2.0;
    let mut rest = Vec::new();
    for j in 0..graph.len() {
        if j != query && j != up && j != down {
            rest.push(weights[j]);
        }
    }
    let rest_mean: f64 = rest.iter().sum::<f64>() / rest.len() as f64;
    assert!(
        neighbor_mean > rest_mean,
        "ACCEPTANCE 6 rollout: FAIL vertical neighbors {neighbor_mean:.4} <= others {rest_mean:.4}"
    );
    println!(
        "ACCEPTANCE 6 rollout: PASS (row-sum err {max_row_error:.2e}, neighbors {neighbor_mean:.4} > others {rest_mean:.4})"
    );
}

// ---------------------------------------------------------------------------
// criterion 7: determinism across runs
// ---------------------------------------------------------------------------

#[test]
fn criterion_7_determinism() {
    use std::process::Command;
    let base = std::env::temp_dir().join(format!("spanflow_accept7_{}", std::process::id()));
    std::fs::remove_dir_all(&base).ok();
    std::fs::create_dir_all(&base).unwrap();

    let run_all = |tag: &str| {
        let dir = base.join(tag);
        let corpus = dir.join("corpus");
        let status = Command::new(env!("CARGO_BIN_EXE_spanflow"))
            .args(["synth", "--seed", "99", "--pages", "3"])
            .args(["--rows-min", "3", "--rows-max", "4", "--cols-min", "2", "--cols-max", "2"])
            .args(["--noise", "0.3", "--hole-rate", "0.2"])
            .arg("--out")
            .arg(&corpus)
            .status()
            .unwrap();
        assert!(status.success());
        let status = Command::new(env!("CARGO_BIN_EXE_spanflow"))
            .args(["train", "--seed", "99", "--epochs", "3", "--d", "16", "--heads", "2"])
            .args(["--layers", "2", "--order", "8", "--holdout", "1"])
            .arg("--corpus")
            .arg(corpus.join("manifest.json"))
            .arg("--out")
            .arg(dir.join("run"))
            .status()
            .unwrap();
        assert!(status.success());
        let status = Command::new(env!("CARGO_BIN_EXE_spanflow"))
            .args(["eval", "--skip", "2"])
            .arg("--corpus")
            .arg(corpus.join("manifest.json"))
            .arg("--checkpoint")
            .arg(dir.join("run/checkpoint.json"))
            .arg("--out")
            .arg(dir.join("report.json"))
            .status()
            .unwrap();
        assert!(status.success());
        dir
    };

    let a = run_all("a");
    let b = run_all("b");

    let mut compared = 0;
    for rel in [
        "corpus/manifest.json",
        "corpus/pair0000_labels.json",
        "corpus/pair0001_labels.json",
        "corpus/pair0002_labels.json",
        "corpus/pair0000_page1.jsonl",
        "run/checkpoint.json",
        "run/vocab.json",
        "run/train_log.jsonl",
        "report.json",
    ] {
        let bytes_a = std::fs::read(a.join(rel)).unwrap();
        let bytes_b = std::fs::read(b.join(rel)).unwrap();
        assert_eq!(
            bytes_a, bytes_b,
            "ACCEPTANCE 7 determinism: FAIL {rel} differs between runs"
        );
        compared += 1;
    }
    std::fs::remove_dir_all(&base).ok();
    println!("ACCEPTANCE 7 determinism: PASS ({compared} artifacts byte-identical)");
}

// ---------------------------------------------------------------------------
// criterion 8: oracle equivalences
// ---------------------------------------------------------------------------

#[test]
fn criterion_8_oracle_equivalences() {
    // 8a: pairing score vs exhaustive scan over 200 random embeddings
    let emb1 = random_matrix(200, 8, 800);
    let emb2 = random_matrix(200, 8, 801);
    let pairs: Vec<(usize, usize)> = (0..200).map(|i| (i, i)).collect();
    let corpus = vec![PairEmbeddings {
        emb1: emb1.clone(),
        emb2: emb2.clone(),
        pairs: pairs.clone(),
    }];
    for k in [1usize, 3, 5, 10] {
        let fast = pairing_score(&corpus, k).unwrap();
        // exhaustive: count, per direction, candidates strictly closer (or
        // equal with lower index)
        let mut hits = 0usize;
        let dist = |a: &Array2<f64>, i: usize, b: &Array2<f64>, j: usize| -> f64 {
            (0..8)
                .map(|c| (a[[i, c]] - b[[j, c]]).powi(2))
                .sum::<f64>()
                .sqrt()
        };
        for &(a, p) in &pairs {
            for (anchor_emb, anchor_idx, target_emb, true_idx) in
                [(&emb1, a, &emb2, p), (&emb2, p, &emb1, a)]
            {
                let d_true = dist(anchor_emb, anchor_idx, target_emb, true_idx);
                let mut ahead = 0usize;
                for j in 0..200 {
                    if j == true_idx {
                        continue;
                    }
                    let d = dist(anchor_emb, anchor_idx, target_emb, j);
                    if d < d_true || (d == d_true && j < true_idx) {
                        ahead += 1;
                    }
                }
                if ahead < k {
                    hits += 1;
                }
            }
        }
        let exhaustive = hits as f64 / (2 * pairs.len()) as f64;
        assert_eq!(
            fast, exhaustive,
            "ACCEPTANCE 8 oracles: FAIL pairing score mismatch at k={k}"
        );
    }

    // 8b: hop matrices vs the grid oracle on 30 random grids
    let mut rng = ChaCha8Rng::seed_from_u64(802);
    for case in 0..30 {
        let rows = rng.gen_range(2..8);
        let cols = rng.gen_range(2..8);
        let graph = build_edges(grid_spans(rows, cols)).unwrap();
        for i in 0..graph.len() {
            for j in 0..graph.len() {
                let (ri, ci) = (i / cols, i % cols);
                let (rj, cj) = (j / cols, j % cols);
                let expected_v = rj as i32 - ri as i32;
                let expected_h = cj as i32 - ci as i32;
                assert_eq!(
                    graph.hop(i, j),
                    Some((expected_v, expected_h)),
                    "ACCEPTANCE 8 oracles: FAIL hops case {case} ({i} -> {j})"
                );
            }
        }
        assert!(graph.p_vert.iter().all(|&v| v != UNREACHABLE));
    }

    // 8c: block-diagonal forward equals independent forwards to 1e-9
    let g1 = build_edges(grid_spans(3, 4)).unwrap();
    let g2 = build_edges(grid_spans(4, 2)).unwrap();
    let bound = bind_pair(&g1, &g2);
    let config = ModelConfig::new(16, 4, 3, 8);
    let mut rng = ChaCha8Rng::seed_from_u64(803);
    let stack = EncoderStack::init(&config, &mut rng);
    let f1 = random_matrix(g1.len(), 16, 804);
    let f2 = random_matrix(g2.len(), 16, 805);
    let mut joint = Array2::zeros((bound.len(), 16));
    for i in 0..g1.len() {
        joint.row_mut(i).assign(&f1.row(i));
    }
    for i in 0..g2.len() {
        joint.row_mut(g1.len() + i).assign(&f2.row(i));
    }
    let (out_bound, _) = forward(&bound, &joint, &stack, &config).unwrap();
    let (out1, _) = forward(&g1, &f1, &stack, &config).unwrap();
    let (out2, _) = forward(&g2, &f2, &stack, &config).unwrap();
    let mut worst = 0.0f64;
    for i in 0..g1.len() {
        for c in 0..16 {
            let rel = (out_bound[[i, c]] - out1[[i, c]]).abs()
                / out1[[i, c]].abs().max(out_bound[[i, c]].abs()).max(1e-12);
            worst = worst.max(rel);
        }
    }
    for i in 0..g2.len() {
        for c in 0..16 {
            let rel = (out_bound[[g1.len() + i, c]] - out2[[i, c]]).abs()
                / out2[[i, c]].abs().max(out_bound[[g1.len() + i, c]].abs()).max(1e-12);
            worst = worst.max(rel);
        }
    }
    assert!(
        worst < 1e-9,
        "ACCEPTANCE 8 oracles: FAIL block-diagonal relative error {worst:.2e}"
    );

    // retrieval_rank agrees with a direct argmin at k = 1
    let distances = vec![0.4, 0.1, 0.9, 0.1];
    assert_eq!(retrieval_rank(&distances, 1), 0);
    assert_eq!(retrieval_rank(&distances, 3), 1);

    println!("ACCEPTANCE 8 oracles: PASS (pairing scan, 30 grid hop oracles, block forward {worst:.2e})");
}
