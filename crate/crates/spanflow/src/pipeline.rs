//! End-to-end orchestration: corpus loading, training runs, evaluation.

use std::collections::BTreeMap;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SpanflowError};
use crate::eval::{
    compositionality_rate, pairing_score, EmbeddingRow, EvalReport, PairEmbeddings, ReportCounts,
};
use crate::featurize::{build_vocab, embed_indices, span_indices, Vocab};
use crate::gnn::{build_masks, forward_cached, ModelConfig};
use crate::io::{read_label_file, read_tokens_jsonl, read_to_string};
use crate::layout::{segment_page, LayoutConfig, Span};
use crate::pagegraph::{build_edges, PageGraph};
use crate::synthdoc::{GeneratedPair, LayoutKind, Manifest, TableGrid};
use crate::train::{
    batch_validation_loss, kfold_split, prepare_batch, train_epoch, LabeledPair, ModelParams,
    TrainBatch, TrainConfig, TrainState,
};

/// One corpus pair, segmented and graphed.
#[derive(Debug, Clone)]
pub struct LoadedPair {
    pub index: usize,
    pub spans1: Vec<Span>,
    pub spans2: Vec<Span>,
    pub graph1: PageGraph,
    pub graph2: PageGraph,
    pub labels: LabeledPair,
    pub layout1: LayoutKind,
    pub layout2: LayoutKind,
    pub table1: Option<TableGrid>,
    pub table2: Option<TableGrid>,
}

fn pair_from_parts(
    index: usize,
    tokens1: &[crate::layout::Token],
    tokens2: &[crate::layout::Token],
    labels: LabeledPair,
    layout1: LayoutKind,
    layout2: LayoutKind,
    table1: Option<TableGrid>,
    table2: Option<TableGrid>,
    layout_config: &LayoutConfig,
) -> Result<LoadedPair> {
    let spans1 = segment_page(tokens1, layout_config)?;
    let spans2 = segment_page(tokens2, layout_config)?;
    let graph1 = build_edges(spans1.clone())?;
    let graph2 = build_edges(spans2.clone())?;
    labels.validate(graph1.len(), graph2.len())?;
    Ok(LoadedPair {
        index,
        spans1,
        spans2,
        graph1,
        graph2,
        labels,
        layout1,
        layout2,
        table1,
        table2,
    })
}

/// Load a corpus directory through its manifest.
pub fn load_corpus(manifest_path: &Path) -> Result<(Manifest, Vec<LoadedPair>)> {
    let manifest: Manifest =
        serde_json::from_str(&read_to_string(manifest_path)?).map_err(|e| {
            SpanflowError::Parse {
                what: "corpus manifest",
                path: manifest_path.to_path_buf(),
                detail: e.to_string(),
            }
        })?;
    let dir = manifest_path
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .to_path_buf();
    let layout_config = LayoutConfig::default();
    let mut pairs = Vec::with_capacity(manifest.pairs.len());
    for (index, entry) in manifest.pairs.iter().enumerate() {
        let tokens1 = read_tokens_jsonl(&dir.join(&entry.tokens1))?;
        let tokens2 = read_tokens_jsonl(&dir.join(&entry.tokens2))?;
        let label_file = read_label_file(&dir.join(&entry.labels))?;
        let labels = LabeledPair {
            graph1_id: entry.tokens1.clone(),
            graph2_id: entry.tokens2.clone(),
            pairs: label_file.pairs,
        };
        pairs.push(pair_from_parts(
            index,
            &tokens1,
            &tokens2,
            labels,
            entry.layout1,
            entry.layout2,
            entry.table1.clone(),
            entry.table2.clone(),
            &layout_config,
        )?);
    }
    Ok((manifest, pairs))
}

/// In-memory equivalent of writing a corpus and loading it back.
pub fn load_generated(pairs: &[GeneratedPair]) -> Result<Vec<LoadedPair>> {
    let layout_config = LayoutConfig::default();
    pairs
        .iter()
        .map(|p| {
            pair_from_parts(
                p.pair_index,
                &p.tokens1,
                &p.tokens2,
                p.labels.clone(),
                p.layout1,
                p.layout2,
                p.table1.clone(),
                p.table2.clone(),
                &layout_config,
            )
        })
        .collect()
}

/// Spans of both pages of every pair, for vocabulary building.
fn corpus_spans(pairs: &[LoadedPair]) -> Vec<Span> {
    let mut spans = Vec::new();
    for p in pairs {
        spans.extend(p.spans1.iter().cloned());
        spans.extend(p.spans2.iter().cloned());
    }
    spans
}

/// One training-log line; `fold` is absent for plain and final runs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LogRecord {
    pub epoch: usize,
    pub fold: Option<usize>,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub val_top1: Option<f64>,
}

pub fn log_to_jsonl(log: &[LogRecord]) -> String {
    let mut out = String::new();
    for record in log {
        out.push_str(&serde_json::to_string(record).expect("log serialization"));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone)]
pub struct TrainOptions {
    pub train: TrainConfig,
    pub model: ModelConfig,
    /// Pairs held out from the end of the corpus for per-epoch validation.
    pub holdout: usize,
    pub min_count: usize,
    pub buckets: usize,
}

impl TrainOptions {
    pub fn new(train: TrainConfig, model: ModelConfig) -> TrainOptions {
        TrainOptions {
            train,
            model,
            holdout: 0,
            min_count: 1,
            buckets: 1024,
        }
    }
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub state: TrainState,
    pub vocab: Vocab,
    pub log: Vec<LogRecord>,
}

fn embeddings_for_batches(
    batches: &[TrainBatch],
    state: &TrainState,
) -> Result<Vec<PairEmbeddings>> {
    batches
        .iter()
        .map(|batch| {
            let out = crate::train::batch_embeddings(batch, &state.params, &state.model_config)?;
            let n1 = batch.n1;
            let emb1 = out.slice(ndarray::s![..n1, ..]).to_owned();
            let emb2 = out.slice(ndarray::s![n1.., ..]).to_owned();
            let pairs = batch.pairs.iter().map(|&(a, p)| (a, p - n1)).collect();
            Ok(PairEmbeddings { emb1, emb2, pairs })
        })
        .collect()
}

fn run_epochs(
    state: &mut TrainState,
    train_batches: &[TrainBatch],
    val_batches: &[TrainBatch],
    fold: Option<usize>,
    log: &mut Vec<LogRecord>,
) -> Result<()> {
    for epoch in 0..state.config.epochs {
        let train_loss = train_epoch(state, train_batches)?;
        let (val_loss, val_top1) = if val_batches.is_empty() {
            (None, None)
        } else {
            let mut total = 0.0;
            for batch in val_batches {
                total += batch_validation_loss(
                    batch,
                    &state.params,
                    &state.model_config,
                    state.config.margin,
                )?;
            }
            let emb = embeddings_for_batches(val_batches, state)?;
            (
                Some(total / val_batches.len() as f64),
                Some(pairing_score(&emb, 1)?),
            )
        };
        log.push(LogRecord {
            epoch,
            fold,
            train_loss,
            val_loss,
            val_top1,
        });
    }
    Ok(())
}

/// Train over a corpus. With `folds` set, runs cross-validation for the
/// validation columns of the log, then trains the returned model on all
/// training pairs. With `holdout` > 0 the tail pairs provide per-epoch
/// validation and are excluded from training.
pub fn train_corpus(pairs: &[LoadedPair], options: &TrainOptions) -> Result<TrainOutcome> {
    options.train.validate()?;
    options.model.validate()?;
    if pairs.is_empty() {
        return Err(SpanflowError::validation("no training pairs"));
    }
    if options.holdout >= pairs.len() {
        return Err(SpanflowError::validation(format!(
            "holdout {} leaves no training pairs out of {}",
            options.holdout,
            pairs.len()
        )));
    }

    let train_pairs = &pairs[..pairs.len() - options.holdout];
    let heldout_pairs = &pairs[pairs.len() - options.holdout..];

    let vocab = build_vocab(
        &corpus_spans(train_pairs),
        options.min_count,
        options.buckets,
        options.model.d,
    );

    let make_batches = |subset: &[LoadedPair]| -> Result<Vec<TrainBatch>> {
        subset
            .iter()
            .map(|p| {
                prepare_batch(
                    &format!("pair{:04}", p.index),
                    &p.graph1,
                    &p.graph2,
                    &p.labels,
                    &vocab,
                    &options.model,
                )
            })
            .collect()
    };
    let train_batches = make_batches(train_pairs)?;
    let heldout_batches = make_batches(heldout_pairs)?;

    let mut log = Vec::new();
    if let Some(k) = options.train.folds {
        let folds = kfold_split(train_batches.len(), k, options.train.seed)?;
        for (fold_idx, (train_idx, val_idx)) in folds.iter().enumerate() {
            let fold_train: Vec<TrainBatch> =
                train_idx.iter().map(|&i| train_batches[i].clone()).collect();
            let fold_val: Vec<TrainBatch> =
                val_idx.iter().map(|&i| train_batches[i].clone()).collect();
            let params = ModelParams::init(&vocab, &options.model, options.train.seed);
            let mut state =
                TrainState::new(params, options.train.clone(), options.model.clone());
            run_epochs(&mut state, &fold_train, &fold_val, Some(fold_idx), &mut log)?;
        }
    }

    let params = ModelParams::init(&vocab, &options.model, options.train.seed);
    let mut state = TrainState::new(params, options.train.clone(), options.model.clone());
    run_epochs(&mut state, &train_batches, &heldout_batches, None, &mut log)?;

    Ok(TrainOutcome { state, vocab, log })
}

/// Feature matrix of one page under a vocabulary and table.
fn page_features(
    spans: &[Span],
    vocab: &Vocab,
    params: &ModelParams,
) -> Result<(Array2<f64>, Vec<Vec<usize>>)> {
    let d = params.table.weights.ncols();
    let mut feats = Array2::zeros((spans.len(), d));
    let mut indices = Vec::with_capacity(spans.len());
    for (i, span) in spans.iter().enumerate() {
        let idx = span_indices(span, vocab)?;
        feats.row_mut(i).assign(&embed_indices(&idx, &params.table));
        indices.push(idx);
    }
    Ok((feats, indices))
}

/// Embed every vertex of a single page.
pub fn embed_page(
    graph: &PageGraph,
    vocab: &Vocab,
    params: &ModelParams,
    model: &ModelConfig,
) -> Result<Array2<f64>> {
    let (feats, _) = page_features(&graph.spans, vocab, params)?;
    let masks = build_masks(graph, model)?;
    Ok(forward_cached(&feats, &masks, &params.stack, model)?.output)
}

/// Evaluation artifacts beyond the report itself.
#[derive(Debug)]
pub struct EvalArtifacts {
    pub report: EvalReport,
    pub embeddings: Vec<EmbeddingRow>,
    /// Per evaluated pair, embeddings and labels for downstream inspection.
    pub pair_embeddings: Vec<PairEmbeddings>,
}

/// Score a trained model over evaluation pairs: top-k retrieval, per-table
/// breakdown, and compositionality over table grids.
pub fn evaluate_pairs(
    pairs: &[LoadedPair],
    vocab: &Vocab,
    params: &ModelParams,
    model: &ModelConfig,
    k_list: &[usize],
) -> Result<EvalArtifacts> {
    if pairs.is_empty() {
        return Err(SpanflowError::validation("no evaluation pairs"));
    }
    let mut pair_embeddings = Vec::with_capacity(pairs.len());
    let mut embeddings = Vec::new();
    let mut comp_successes = 0usize;
    let mut comp_applications = 0usize;

    for pair in pairs {
        let emb1 = embed_page(&pair.graph1, vocab, params, model)?;
        let emb2 = embed_page(&pair.graph2, vocab, params, model)?;
        for (spans, emb) in [(&pair.spans1, &emb1), (&pair.spans2, &emb2)] {
            for (i, span) in spans.iter().enumerate() {
                embeddings.push(EmbeddingRow {
                    span_id: span.span_id,
                    page_id: span.page_id.clone(),
                    values: emb.row(i).to_vec(),
                });
            }
        }
        for (grid, emb) in [(&pair.table1, &emb1), (&pair.table2, &emb2)] {
            if let Some(grid) = grid {
                // grids with empty cells cannot host the analogy test
                if grid.cell_span_ids.iter().flatten().any(|c| c.is_none()) {
                    continue;
                }
                let cells: Vec<Vec<Array1<f64>>> = grid
                    .cell_span_ids
                    .iter()
                    .map(|row| row.iter().map(|id| emb.row(id.unwrap()).to_owned()).collect())
                    .collect();
                let result = compositionality_rate(&cells)?;
                comp_successes += result.successes;
                comp_applications += result.applications;
            }
        }
        pair_embeddings.push(PairEmbeddings {
            emb1,
            emb2,
            pairs: pair.labels.pairs.clone(),
        });
    }

    let mut top_k_accuracy = BTreeMap::new();
    for &k in k_list {
        top_k_accuracy.insert(k, pairing_score(&pair_embeddings, k)?);
    }

    // top-1 per table width, over pairs where both pages are tables
    let mut per_table_accuracy = BTreeMap::new();
    let mut by_cols: BTreeMap<usize, Vec<PairEmbeddings>> = BTreeMap::new();
    for (pair, emb) in pairs.iter().zip(pair_embeddings.iter()) {
        if pair.layout1 == LayoutKind::Table && pair.layout2 == LayoutKind::Table {
            if let Some(grid) = &pair.table1 {
                by_cols.entry(grid.cols).or_default().push(emb.clone());
            }
        }
    }
    for (cols, group) in by_cols {
        per_table_accuracy.insert(cols, pairing_score(&group, 1)?);
    }

    let labeled_vertices = 2 * pairs.iter().map(|p| p.labels.pairs.len()).sum::<usize>();
    let report = EvalReport {
        version: 1,
        top_k_accuracy,
        per_table_accuracy,
        compositionality_rate: if comp_applications > 0 {
            Some(comp_successes as f64 / comp_applications as f64)
        } else {
            None
        },
        counts: ReportCounts {
            labeled_vertices,
            equation_applications: comp_applications,
        },
    };
    report.validate()?;
    Ok(EvalArtifacts {
        report,
        embeddings,
        pair_embeddings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthdoc::{generate_corpus, CorpusSpec, LayoutMix};

    fn tiny_corpus(seed: u64, pages: usize) -> Vec<LoadedPair> {
        let spec = CorpusSpec {
            layout_mix: LayoutMix::tables_only(),
            rows_min: 3,
            rows_max: 4,
            cols_min: 2,
            cols_max: 2,
            noise: 0.0,
            ..CorpusSpec::new(seed, pages)
        };
        load_generated(&generate_corpus(&spec).unwrap().pairs).unwrap()
    }

    fn tiny_options(seed: u64, epochs: usize) -> TrainOptions {
        let mut train = TrainConfig::with_seed(seed);
        train.epochs = epochs;
        train.learning_rate = 3e-3;
        let model = ModelConfig::new(16, 2, 2, 8);
        let mut opts = TrainOptions::new(train, model);
        opts.buckets = 64;
        opts
    }

    #[test]
    fn toy_training_halves_the_loss() {
        let pairs = tiny_corpus(5, 1);
        let options = tiny_options(5, 200);
        let outcome = train_corpus(&pairs, &options).unwrap();
        let first = outcome.log.first().unwrap().train_loss;
        let last = outcome.log.last().unwrap().train_loss;
        assert!(
            last <= 0.5 * first,
            "loss {first} -> {last} did not halve over 200 epochs"
        );
    }

    #[test]
    fn zero_learning_rate_freezes_parameters() {
        let pairs = tiny_corpus(7, 1);
        let mut options = tiny_options(7, 2);
        options.train.learning_rate = 0.0;
        let outcome = train_corpus(&pairs, &options).unwrap();
        let fresh = ModelParams::init(&outcome.vocab, &options.model, options.train.seed);
        assert_eq!(outcome.state.params, fresh);
        assert!(outcome.log.iter().all(|r| r.train_loss.is_finite()));
    }

    #[test]
    fn same_seed_same_loss_trace() {
        let pairs = tiny_corpus(9, 2);
        let options = tiny_options(9, 4);
        let a = train_corpus(&pairs, &options).unwrap();
        let b = train_corpus(&pairs, &options).unwrap();
        let trace =
            |o: &TrainOutcome| o.log.iter().map(|r| r.train_loss).collect::<Vec<_>>();
        assert_eq!(trace(&a), trace(&b));
    }

    #[test]
    fn holdout_adds_validation_columns() {
        let pairs = tiny_corpus(11, 3);
        let mut options = tiny_options(11, 2);
        options.holdout = 1;
        let outcome = train_corpus(&pairs, &options).unwrap();
        assert!(outcome.log.iter().all(|r| r.val_loss.is_some() && r.val_top1.is_some()));
    }

    #[test]
    fn folds_log_every_fold_then_final() {
        let pairs = tiny_corpus(13, 4);
        let mut options = tiny_options(13, 2);
        options.train.folds = Some(2);
        let outcome = train_corpus(&pairs, &options).unwrap();
        let folds_seen: std::collections::BTreeSet<Option<usize>> =
            outcome.log.iter().map(|r| r.fold).collect();
        assert!(folds_seen.contains(&Some(0)));
        assert!(folds_seen.contains(&Some(1)));
        assert!(folds_seen.contains(&None));
        // fold rows carry validation metrics
        assert!(outcome
            .log
            .iter()
            .filter(|r| r.fold.is_some())
            .all(|r| r.val_loss.is_some()));
    }

    #[test]
    fn evaluation_produces_consistent_report() {
        let pairs = tiny_corpus(15, 2);
        let options = tiny_options(15, 3);
        let outcome = train_corpus(&pairs, &options).unwrap();
        let artifacts = evaluate_pairs(
            &pairs,
            &outcome.vocab,
            &outcome.state.params,
            &options.model,
            &[1, 3, 5, 10],
        )
        .unwrap();
        let report = &artifacts.report;
        assert_eq!(report.top_k_accuracy.len(), 4);
        report.validate().unwrap();
        // every span of every page exported
        let expected_rows: usize = pairs
            .iter()
            .map(|p| p.spans1.len() + p.spans2.len())
            .sum();
        assert_eq!(artifacts.embeddings.len(), expected_rows);
        // tables-only corpus: per-table accuracy has the 2-column bucket
        assert!(report.per_table_accuracy.contains_key(&2));
        assert!(report.compositionality_rate.is_some());
    }

    #[test]
    fn corpus_roundtrip_through_files() {
        let spec = CorpusSpec {
            layout_mix: LayoutMix::tables_only(),
            rows_min: 3,
            rows_max: 3,
            cols_min: 2,
            cols_max: 2,
            noise: 0.0,
            ..CorpusSpec::new(21, 2)
        };
        let corpus = generate_corpus(&spec).unwrap();
        let dir = std::env::temp_dir().join(format!("spanflow_corpus_{}", std::process::id()));
        std::fs::remove_dir_all(&dir).ok();
        crate::synthdoc::write_corpus(&corpus, &dir).unwrap();
        let (manifest, loaded) = load_corpus(&dir.join("manifest.json")).unwrap();
        assert_eq!(manifest.pairs.len(), 2);
        assert_eq!(loaded.len(), 2);
        let direct = load_generated(&corpus.pairs).unwrap();
        for (a, b) in loaded.iter().zip(direct.iter()) {
            assert_eq!(a.labels.pairs, b.labels.pairs);
            assert_eq!(a.spans1.len(), b.spans1.len());
        }
        std::fs::remove_dir_all(&dir).ok();
    }
}
