//! Command-line entry point.
//!
//! Single binary with subcommands: segment, graph, synth, train, eval,
//! rollout. Every run resolves its configuration from flags, then
//! `SPANFLOW_*` environment variables, then an optional `--config` JSON
//! file, then built-in defaults; the resolved configuration is logged to
//! stderr and one summary JSON line goes to stdout. Outputs are written
//! atomically. Exit codes: 0 success, 1 validation error, 2 runtime error.

use std::ffi::OsString;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use serde_json::json;

use crate::checkpoint::{AttentionDump, Checkpoint, CheckpointConfig};
use crate::error::{ErrorKind, Result, SpanflowError};
use crate::eval::embeddings_csv;
use crate::gnn::{forward, rollout, AttentionMode, ModelConfig};
use crate::io::{atomic_write, read_to_string, read_tokens_jsonl, spans_to_jsonl};
use crate::layout::{segment_page, LayoutConfig};
use crate::pagegraph::{build_edges, GraphExport, NeighborhoodRule};
use crate::pipeline::{evaluate_pairs, load_corpus, log_to_jsonl, train_corpus, TrainOptions};
use crate::svg::{graph_debug_svg, rollout_overlay_svg};
use crate::synthdoc::{generate_corpus, write_corpus, CorpusSpec, LayoutMix};
use crate::train::TrainConfig;

#[derive(Parser, Debug)]
#[command(
    name = "spanflow",
    about = "Reading-pattern graphs and span embeddings for positioned document text",
    version,
    disable_help_subcommand = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Segment token JSONL into reading-ordered spans
    Segment(SegmentArgs),
    /// Build the reading-pattern graph of one page
    Graph(GraphArgs),
    /// Generate a synthetic paired-page corpus
    Synth(SynthArgs),
    /// Train the graph encoder on a corpus
    Train(TrainArgs),
    /// Evaluate a checkpoint: retrieval, tables, compositionality
    Eval(EvalArgs),
    /// Emit an attention-rollout overlay for one query span
    Rollout(RolloutArgs),
}

#[derive(Args, Debug)]
struct CommonArgs {
    /// JSON config file; flags and SPANFLOW_* variables override it
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SegmentArgs {
    /// Input token JSONL (one page)
    #[arg(long)]
    tokens: PathBuf,
    /// Output span JSONL
    #[arg(long)]
    out: PathBuf,
    /// Column-cut threshold as a multiple of the median gap [default: 3]
    #[arg(long)]
    gap_factor: Option<f64>,
    /// Line tolerance in page units [default: 0.25 x median token height]
    #[arg(long)]
    line_tol: Option<f64>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args, Debug)]
struct GraphArgs {
    /// Input token JSONL (one page)
    #[arg(long)]
    tokens: PathBuf,
    /// Output graph JSON
    #[arg(long)]
    out: PathBuf,
    /// Optional SVG debug overlay path
    #[arg(long)]
    svg: Option<PathBuf>,
    /// Column-cut threshold as a multiple of the median gap [default: 3]
    #[arg(long)]
    gap_factor: Option<f64>,
    /// Line tolerance in page units [default: 0.25 x median token height]
    #[arg(long)]
    line_tol: Option<f64>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Generator seed (required)
    #[arg(long)]
    seed: u64,
    /// Output corpus directory
    #[arg(long)]
    out: PathBuf,
    /// Page pairs to generate [default: 70]
    #[arg(long)]
    pages: Option<usize>,
    /// Layout weights paragraph,list,table [default: 0.15,0.2,0.65]
    #[arg(long)]
    layout_mix: Option<String>,
    /// Minimum table rows [default: 4]
    #[arg(long)]
    rows_min: Option<usize>,
    /// Maximum table rows [default: 12]
    #[arg(long)]
    rows_max: Option<usize>,
    /// Minimum value columns [default: 2]
    #[arg(long)]
    cols_min: Option<usize>,
    /// Maximum value columns [default: 3]
    #[arg(long)]
    cols_max: Option<usize>,
    /// Distractor-row probability [default: 0]
    #[arg(long)]
    noise: Option<f64>,
    /// Per-page fact omission probability [default: 0]
    #[arg(long)]
    hole_rate: Option<f64>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Corpus manifest path
    #[arg(long)]
    corpus: PathBuf,
    /// Output directory for checkpoint, vocab, and training log
    #[arg(long)]
    out: PathBuf,
    /// Training seed (required)
    #[arg(long)]
    seed: u64,
    /// Use only the first N corpus pairs [default: all]
    #[arg(long)]
    take: Option<usize>,
    /// Hold out the last N selected pairs for validation [default: 0]
    #[arg(long)]
    holdout: Option<usize>,
    /// Cross-validation folds; omit for a single run [default: none]
    #[arg(long)]
    folds: Option<usize>,
    /// Epochs [default: 400]
    #[arg(long)]
    epochs: Option<usize>,
    /// Learning rate [default: 0.0001]
    #[arg(long)]
    lr: Option<f64>,
    /// Contrastive margin [default: 1]
    #[arg(long)]
    margin: Option<f64>,
    /// First-moment decay [default: 0.9]
    #[arg(long)]
    beta1: Option<f64>,
    /// Second-moment decay [default: 0.999]
    #[arg(long)]
    beta2: Option<f64>,
    /// Optimizer epsilon [default: 0.00000001]
    #[arg(long)]
    epsilon: Option<f64>,
    /// Model dimension [default: 360]
    #[arg(long)]
    d: Option<usize>,
    /// Attention heads [default: 4]
    #[arg(long)]
    heads: Option<usize>,
    /// Encoder layers [default: 8]
    #[arg(long)]
    layers: Option<usize>,
    /// Neighborhood order [default: 8]
    #[arg(long)]
    order: Option<u32>,
    /// Neighborhood rule: and | or [default: and]
    #[arg(long)]
    rule: Option<NeighborhoodRule>,
    /// Attention mode: softmax | literal_eq2 [default: softmax]
    #[arg(long)]
    attention_mode: Option<AttentionMode>,
    /// Minimum token count for the vocabulary [default: 1]
    #[arg(long)]
    min_count: Option<usize>,
    /// Out-of-vocabulary hash buckets [default: 1024]
    #[arg(long)]
    buckets: Option<usize>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Corpus manifest path
    #[arg(long)]
    corpus: PathBuf,
    /// Trained checkpoint path
    #[arg(long)]
    checkpoint: PathBuf,
    /// Output report JSON path
    #[arg(long)]
    out: PathBuf,
    /// Optional embeddings CSV path
    #[arg(long)]
    embeddings_csv: Option<PathBuf>,
    /// Skip the first N corpus pairs [default: 0]
    #[arg(long)]
    skip: Option<usize>,
    /// Evaluate only N pairs after the skip [default: all]
    #[arg(long)]
    take: Option<usize>,
    /// Top-k cut points, comma separated [default: 1,3,5,10]
    #[arg(long)]
    k: Option<String>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args, Debug)]
struct RolloutArgs {
    /// Trained checkpoint path
    #[arg(long)]
    checkpoint: PathBuf,
    /// Input token JSONL (one page)
    #[arg(long)]
    tokens: PathBuf,
    /// Query span id
    #[arg(long)]
    query_span: usize,
    /// Output SVG overlay path
    #[arg(long)]
    out: PathBuf,
    /// Optional attention dump JSON path
    #[arg(long)]
    dump_attention: Option<PathBuf>,
    #[command(flatten)]
    common: CommonArgs,
}

/// Optional config-file values; keys mirror the flag names in snake case.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    gap_factor: Option<f64>,
    line_tol: Option<f64>,
    pages: Option<usize>,
    layout_mix: Option<[f64; 3]>,
    rows_min: Option<usize>,
    rows_max: Option<usize>,
    cols_min: Option<usize>,
    cols_max: Option<usize>,
    noise: Option<f64>,
    hole_rate: Option<f64>,
    take: Option<usize>,
    holdout: Option<usize>,
    folds: Option<usize>,
    epochs: Option<usize>,
    lr: Option<f64>,
    margin: Option<f64>,
    beta1: Option<f64>,
    beta2: Option<f64>,
    epsilon: Option<f64>,
    d: Option<usize>,
    heads: Option<usize>,
    layers: Option<usize>,
    order: Option<u32>,
    rule: Option<NeighborhoodRule>,
    attention_mode: Option<AttentionMode>,
    min_count: Option<usize>,
    buckets: Option<usize>,
    skip: Option<usize>,
    k: Option<Vec<usize>>,
}

fn load_file_config(path: &Option<PathBuf>) -> Result<FileConfig> {
    match path {
        None => Ok(FileConfig::default()),
        Some(p) => serde_json::from_str(&read_to_string(p)?).map_err(|e| SpanflowError::Parse {
            what: "config file",
            path: p.clone(),
            detail: e.to_string(),
        }),
    }
}

fn env_value<T: FromStr>(name: &str) -> Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    match std::env::var(name) {
        Err(_) => Ok(None),
        Ok(raw) => raw.parse::<T>().map(Some).map_err(|e| {
            SpanflowError::validation(format!("cannot parse {name}={raw:?}: {e}"))
        }),
    }
}

/// flags > environment > config file > default
fn pick<T>(flag: Option<T>, env: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(env).or(file).unwrap_or(default)
}

fn parse_layout_mix(raw: &str) -> Result<LayoutMix> {
    let parts: Vec<&str> = raw.split(',').collect();
    if parts.len() != 3 {
        return Err(SpanflowError::validation(
            "layout mix must be three comma-separated weights: paragraph,list,table",
        ));
    }
    let parse = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|e| SpanflowError::validation(format!("bad layout weight {s:?}: {e}")))
    };
    Ok(LayoutMix {
        paragraph: parse(parts[0])?,
        list: parse(parts[1])?,
        table: parse(parts[2])?,
    })
}

fn parse_k_list(raw: &str) -> Result<Vec<usize>> {
    raw.split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|e| SpanflowError::validation(format!("bad k value {s:?}: {e}")))
        })
        .collect()
}

fn log_resolved(config: serde_json::Value) {
    eprintln!("{}", json!({ "resolved_config": config }));
}

fn layout_config(gap_factor: f64, line_tol: Option<f64>) -> LayoutConfig {
    LayoutConfig {
        gap_factor,
        line_tol,
    }
}

fn run_segment(args: SegmentArgs) -> Result<serde_json::Value> {
    let file = load_file_config(&args.common.config)?;
    let gap_factor = pick(args.gap_factor, env_value("SPANFLOW_GAP_FACTOR")?, file.gap_factor, 3.0);
    let line_tol = args
        .line_tol
        .or(env_value("SPANFLOW_LINE_TOL")?)
        .or(file.line_tol);
    log_resolved(json!({
        "subcommand": "segment",
        "tokens": args.tokens,
        "out": args.out,
        "gap_factor": gap_factor,
        "line_tol": line_tol,
    }));

    let tokens = read_tokens_jsonl(&args.tokens)?;
    let spans = segment_page(&tokens, &layout_config(gap_factor, line_tol))?;
    atomic_write(&args.out, spans_to_jsonl(&spans).as_bytes())?;
    Ok(json!({
        "status": "ok",
        "subcommand": "segment",
        "tokens": tokens.len(),
        "spans": spans.len(),
        "out": args.out,
    }))
}

fn run_graph(args: GraphArgs) -> Result<serde_json::Value> {
    let file = load_file_config(&args.common.config)?;
    let gap_factor = pick(args.gap_factor, env_value("SPANFLOW_GAP_FACTOR")?, file.gap_factor, 3.0);
    let line_tol = args
        .line_tol
        .or(env_value("SPANFLOW_LINE_TOL")?)
        .or(file.line_tol);
    log_resolved(json!({
        "subcommand": "graph",
        "tokens": args.tokens,
        "out": args.out,
        "gap_factor": gap_factor,
        "line_tol": line_tol,
    }));

    let tokens = read_tokens_jsonl(&args.tokens)?;
    let spans = segment_page(&tokens, &layout_config(gap_factor, line_tol))?;
    let graph = build_edges(spans)?;
    let export = GraphExport::from_graph(&graph);
    let json_text = serde_json::to_string_pretty(&export)
        .map_err(|e| SpanflowError::runtime(format!("graph serialization: {e}")))?;
    atomic_write(&args.out, json_text.as_bytes())?;
    if let Some(svg_path) = &args.svg {
        atomic_write(svg_path, graph_debug_svg(&graph).as_bytes())?;
    }
    Ok(json!({
        "status": "ok",
        "subcommand": "graph",
        "vertices": graph.len(),
        "edges": export.edges.len(),
        "out": args.out,
    }))
}

fn run_synth(args: SynthArgs) -> Result<serde_json::Value> {
    let file = load_file_config(&args.common.config)?;
    let mix = match args
        .layout_mix
        .or(env_value::<String>("SPANFLOW_LAYOUT_MIX")?)
    {
        Some(raw) => parse_layout_mix(&raw)?,
        None => file.layout_mix.map_or(
            LayoutMix {
                paragraph: 0.15,
                list: 0.2,
                table: 0.65,
            },
            |[paragraph, list, table]| LayoutMix {
                paragraph,
                list,
                table,
            },
        ),
    };
    let spec = CorpusSpec {
        seed: args.seed,
        pages: pick(args.pages, env_value("SPANFLOW_PAGES")?, file.pages, 70),
        layout_mix: mix,
        rows_min: pick(args.rows_min, env_value("SPANFLOW_ROWS_MIN")?, file.rows_min, 4),
        rows_max: pick(args.rows_max, env_value("SPANFLOW_ROWS_MAX")?, file.rows_max, 12),
        cols_min: pick(args.cols_min, env_value("SPANFLOW_COLS_MIN")?, file.cols_min, 2),
        cols_max: pick(args.cols_max, env_value("SPANFLOW_COLS_MAX")?, file.cols_max, 3),
        noise: pick(args.noise, env_value("SPANFLOW_NOISE")?, file.noise, 0.0),
        hole_rate: pick(args.hole_rate, env_value("SPANFLOW_HOLE_RATE")?, file.hole_rate, 0.0),
    };
    log_resolved(json!({ "subcommand": "synth", "out": args.out, "spec": spec }));

    let corpus = generate_corpus(&spec)?;
    let manifest = write_corpus(&corpus, &args.out)?;
    let labels: usize = manifest.pairs.iter().map(|p| p.label_count).sum();
    Ok(json!({
        "status": "ok",
        "subcommand": "synth",
        "pairs": manifest.pairs.len(),
        "label_pairs": labels,
        "chi_square": corpus.chi_square,
        "manifest": args.out.join("manifest.json"),
    }))
}

fn run_train(args: TrainArgs) -> Result<serde_json::Value> {
    let file = load_file_config(&args.common.config)?;
    let train = TrainConfig {
        margin: pick(args.margin, env_value("SPANFLOW_MARGIN")?, file.margin, 1.0),
        epochs: pick(args.epochs, env_value("SPANFLOW_EPOCHS")?, file.epochs, 400),
        learning_rate: pick(args.lr, env_value("SPANFLOW_LR")?, file.lr, 1e-4),
        beta1: pick(args.beta1, env_value("SPANFLOW_BETA1")?, file.beta1, 0.9),
        beta2: pick(args.beta2, env_value("SPANFLOW_BETA2")?, file.beta2, 0.999),
        epsilon: pick(args.epsilon, env_value("SPANFLOW_EPSILON")?, file.epsilon, 1e-8),
        folds: args.folds.or(env_value("SPANFLOW_FOLDS")?).or(file.folds),
        seed: args.seed,
    };
    let order = pick(args.order, env_value("SPANFLOW_ORDER")?, file.order, 8);
    let model = ModelConfig {
        d: pick(args.d, env_value("SPANFLOW_D")?, file.d, 360),
        heads: pick(args.heads, env_value("SPANFLOW_HEADS")?, file.heads, 4),
        layers: pick(args.layers, env_value("SPANFLOW_LAYERS")?, file.layers, 8),
        order,
        rule: pick(args.rule, env_value("SPANFLOW_RULE")?, file.rule, NeighborhoodRule::And),
        attention_mode: pick(
            args.attention_mode,
            env_value("SPANFLOW_ATTENTION_MODE")?,
            file.attention_mode,
            AttentionMode::Softmax,
        ),
        regularization: order > 1,
    };
    let mut options = TrainOptions::new(train, model);
    options.holdout = pick(args.holdout, env_value("SPANFLOW_HOLDOUT")?, file.holdout, 0);
    options.min_count = pick(args.min_count, env_value("SPANFLOW_MIN_COUNT")?, file.min_count, 1);
    options.buckets = pick(args.buckets, env_value("SPANFLOW_BUCKETS")?, file.buckets, 1024);
    let take = args.take.or(env_value("SPANFLOW_TAKE")?).or(file.take);

    log_resolved(json!({
        "subcommand": "train",
        "corpus": args.corpus,
        "out": args.out,
        "train": options.train,
        "model": options.model,
        "holdout": options.holdout,
        "min_count": options.min_count,
        "buckets": options.buckets,
        "take": take,
    }));

    options.train.validate()?;
    options.model.validate()?;

    let (_, mut pairs) = load_corpus(&args.corpus)?;
    if let Some(n) = take {
        if n == 0 || n > pairs.len() {
            return Err(SpanflowError::validation(format!(
                "take {n} is out of range for {} pairs",
                pairs.len()
            )));
        }
        pairs.truncate(n);
    }
    let outcome = train_corpus(&pairs, &options)?;

    let ckpt = Checkpoint::from_params(
        &outcome.state.params,
        &outcome.vocab,
        CheckpointConfig {
            model: options.model.clone(),
            margin: options.train.margin,
            seed: options.train.seed,
        },
    );
    let ckpt_path = args.out.join("checkpoint.json");
    atomic_write(&ckpt_path, ckpt.to_json()?.as_bytes())?;
    let vocab_json = serde_json::to_string_pretty(&outcome.vocab)
        .map_err(|e| SpanflowError::runtime(format!("vocab serialization: {e}")))?;
    atomic_write(&args.out.join("vocab.json"), vocab_json.as_bytes())?;
    atomic_write(
        &args.out.join("train_log.jsonl"),
        log_to_jsonl(&outcome.log).as_bytes(),
    )?;

    let final_loss = outcome
        .log
        .iter()
        .filter(|r| r.fold.is_none())
        .next_back()
        .map(|r| r.train_loss);
    Ok(json!({
        "status": "ok",
        "subcommand": "train",
        "pairs": pairs.len(),
        "epochs": options.train.epochs,
        "final_train_loss": final_loss,
        "checkpoint": ckpt_path,
    }))
}

fn run_eval(args: EvalArgs) -> Result<serde_json::Value> {
    let file = load_file_config(&args.common.config)?;
    let skip = pick(args.skip, env_value("SPANFLOW_SKIP")?, file.skip, 0);
    let take = args.take.or(env_value("SPANFLOW_TAKE")?);
    let k_list = match args.k.or(env_value::<String>("SPANFLOW_K")?) {
        Some(raw) => parse_k_list(&raw)?,
        None => file.k.unwrap_or_else(|| vec![1, 3, 5, 10]),
    };
    log_resolved(json!({
        "subcommand": "eval",
        "corpus": args.corpus,
        "checkpoint": args.checkpoint,
        "out": args.out,
        "skip": skip,
        "take": take,
        "k": k_list,
    }));
    if k_list.is_empty() || k_list.iter().any(|&k| k == 0) {
        return Err(SpanflowError::validation("k list must hold positive integers"));
    }

    let ckpt = Checkpoint::from_json(&read_to_string(&args.checkpoint)?)?;
    let params = ckpt.to_params()?;
    let (_, pairs) = load_corpus(&args.corpus)?;
    if skip >= pairs.len() {
        return Err(SpanflowError::validation(format!(
            "skip {skip} leaves no pairs out of {}",
            pairs.len()
        )));
    }
    let end = match take {
        Some(n) => (skip + n).min(pairs.len()),
        None => pairs.len(),
    };
    let subset = &pairs[skip..end];

    let artifacts = evaluate_pairs(subset, &ckpt.vocab, &params, &ckpt.config.model, &k_list)?;
    atomic_write(&args.out, artifacts.report.to_json_string()?.as_bytes())?;
    if let Some(csv_path) = &args.embeddings_csv {
        let csv = embeddings_csv(&artifacts.embeddings, ckpt.config.model.d);
        atomic_write(csv_path, csv.as_bytes())?;
    }
    Ok(json!({
        "status": "ok",
        "subcommand": "eval",
        "pairs": subset.len(),
        "report": args.out,
        "top_k_accuracy": artifacts.report.top_k_accuracy,
        "compositionality_rate": artifacts.report.compositionality_rate,
    }))
}

fn run_rollout(args: RolloutArgs) -> Result<serde_json::Value> {
    log_resolved(json!({
        "subcommand": "rollout",
        "checkpoint": args.checkpoint,
        "tokens": args.tokens,
        "query_span": args.query_span,
        "out": args.out,
    }));
    let ckpt = Checkpoint::from_json(&read_to_string(&args.checkpoint)?)?;
    let params = ckpt.to_params()?;
    let tokens = read_tokens_jsonl(&args.tokens)?;
    let spans = segment_page(&tokens, &LayoutConfig::default())?;
    let graph = build_edges(spans)?;
    if args.query_span >= graph.len() {
        return Err(SpanflowError::validation(format!(
            "query span {} out of range for {} spans",
            args.query_span,
            graph.len()
        )));
    }
    let model = &ckpt.config.model;
    let mut feats = ndarray::Array2::zeros((graph.len(), model.d));
    for (i, span) in graph.spans.iter().enumerate() {
        let idx = crate::featurize::span_indices(span, &ckpt.vocab)?;
        feats
            .row_mut(i)
            .assign(&crate::featurize::embed_indices(&idx, &params.table));
    }
    let (_, attention) = forward(&graph, &feats, &params.stack, model)?;
    let map = rollout(&attention)?;
    let weights: Vec<f64> = map.row(args.query_span).to_vec();
    atomic_write(
        &args.out,
        rollout_overlay_svg(&graph.spans, &weights, args.query_span).as_bytes(),
    )?;
    if let Some(dump_path) = &args.dump_attention {
        let dump = AttentionDump::from_attention(&attention);
        let text = serde_json::to_string_pretty(&dump)
            .map_err(|e| SpanflowError::runtime(format!("attention dump: {e}")))?;
        atomic_write(dump_path, text.as_bytes())?;
    }
    Ok(json!({
        "status": "ok",
        "subcommand": "rollout",
        "spans": graph.len(),
        "query_span": args.query_span,
        "out": args.out,
    }))
}

fn dispatch(cli: Cli) -> Result<serde_json::Value> {
    match cli.command {
        Command::Segment(args) => run_segment(args),
        Command::Graph(args) => run_graph(args),
        Command::Synth(args) => run_synth(args),
        Command::Train(args) => run_train(args),
        Command::Eval(args) => run_eval(args),
        Command::Rollout(args) => run_rollout(args),
    }
}

/// Parse arguments, run the requested pipeline, print one summary line.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(err) => {
            // help and version requests are successful exits
            use clap::error::ErrorKind as ClapKind;
            let code = match err.kind() {
                ClapKind::DisplayHelp | ClapKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(err) => {
            eprintln!("error: {err}");
            match err.kind() {
                ErrorKind::Validation => 1,
                ErrorKind::Runtime => 2,
            }
        }
    }
}

/// Entry point used by the binary: first real argument onward.
pub fn main_with_exit() -> ! {
    let code = run(std::env::args_os());
    std::process::exit(code);
}
