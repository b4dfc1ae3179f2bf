//! Scratch calibration runs for the acceptance settings. Not part of the
//! test suite.

use std::time::Instant;

use spanflow::gnn::ModelConfig;
use spanflow::pipeline::{evaluate_pairs, load_generated, train_corpus, TrainOptions};
use spanflow::synthdoc::{generate_corpus, CorpusSpec, LayoutMix};
use spanflow::train::TrainConfig;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let epochs: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(60);
    let lr: f64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1e-3);
    let layers: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(8);
    let noise: f64 = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(0.15);
    let rows_min: usize = args.get(5).and_then(|s| s.parse().ok()).unwrap_or(8);
    let rows_max: usize = args.get(6).and_then(|s| s.parse().ok()).unwrap_or(24);
    let mix: u32 = args.get(7).and_then(|s| s.parse().ok()).unwrap_or(0);
    let hole_rate: f64 = args.get(8).and_then(|s| s.parse().ok()).unwrap_or(0.0);
    let margin: f64 = args.get(9).and_then(|s| s.parse().ok()).unwrap_or(1.0);

    let layout_mix = match mix {
        0 => LayoutMix::tables_only(),
        1 => LayoutMix { paragraph: 0.1, list: 0.15, table: 0.75 },
        _ => LayoutMix { paragraph: 0.2, list: 0.3, table: 0.5 },
    };

    let spec = CorpusSpec {
        seed: 20260810,
        pages: 50,
        layout_mix,
        rows_min,
        rows_max,
        cols_min: 2,
        cols_max: 4,
        noise,
        hole_rate,
    };
    println!("spec: {spec:?} margin {margin} lr {lr} epochs {epochs} layers {layers}");
    let corpus = generate_corpus(&spec).unwrap();
    let pairs = load_generated(&corpus.pairs).unwrap();
    let avg_spans: f64 = pairs
        .iter()
        .map(|p| (p.spans1.len() + p.spans2.len()) as f64 / 2.0)
        .sum::<f64>()
        / pairs.len() as f64;
    let labels: usize = pairs.iter().map(|p| p.labels.pairs.len()).sum();
    println!("pairs: {}, avg spans/page: {avg_spans:.1}, labels {labels}", pairs.len());

    let comp_spec = CorpusSpec {
        seed: 777,
        pages: 3,
        layout_mix: LayoutMix::tables_only(),
        rows_min: 20,
        rows_max: 24,
        cols_min: 2,
        cols_max: 2,
        noise: 0.0,
        hole_rate: 0.0,
    };
    let comp_pairs = load_generated(&generate_corpus(&comp_spec).unwrap().pairs).unwrap();

    type RunResult = (u32, f64, f64, Option<f64>, f64, f64, f64);
    let handles: Vec<std::thread::JoinHandle<RunResult>> = [8u32, 5, 1]
        .into_iter()
        .map(|order| {
            let pairs = pairs.clone();
            let comp_pairs = comp_pairs.clone();
            std::thread::spawn(move || {
                let mut train = TrainConfig::with_seed(41);
                train.epochs = epochs;
                train.learning_rate = lr;
                train.margin = margin;
                let model = ModelConfig::new(64, 4, layers, order);
                let mut options = TrainOptions::new(train, model.clone());
                options.holdout = 10;

                let t0 = Instant::now();
                let outcome = train_corpus(&pairs, &options).unwrap();
                let train_secs = t0.elapsed().as_secs_f64();

                let artifacts = evaluate_pairs(
                    &pairs[40..],
                    &outcome.vocab,
                    &outcome.state.params,
                    &model,
                    &[1, 3, 5, 10],
                )
                .unwrap();
                let top1 = artifacts.report.top_k_accuracy[&1];
                let top10 = artifacts.report.top_k_accuracy[&10];

                let comp_art = evaluate_pairs(
                    &comp_pairs,
                    &outcome.vocab,
                    &outcome.state.params,
                    &model,
                    &[1],
                )
                .unwrap();
                let comp = comp_art.report.compositionality_rate;
                let last_loss = outcome.log.last().unwrap().train_loss;
                (
                    order,
                    top1,
                    top10,
                    comp,
                    last_loss,
                    train_secs,
                    outcome.log[0].train_loss,
                )
            })
        })
        .collect();

    let mut results = Vec::new();
    for h in handles {
        let (order, top1, top10, comp, last_loss, secs, first_loss) = h.join().unwrap();
        println!(
            "order {order}: top1 {top1:.3} top10 {top10:.3} comp {comp:?} \
             loss {first_loss:.3}->{last_loss:.3} train {secs:.0}s"
        );
        results.push((order, top1));
    }
    let top1_of = |o: u32| results.iter().find(|r| r.0 == o).unwrap().1;
    println!(
        "ordering: o8 {:.3} o5 {:.3} o1 {:.3}; gap o8-o1 = {:+.3}",
        top1_of(8),
        top1_of(5),
        top1_of(1),
        top1_of(8) - top1_of(1)
    );
}
