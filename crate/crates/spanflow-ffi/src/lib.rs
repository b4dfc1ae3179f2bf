//! C ABI for the spanflow toolkit.
//!
//! Conventions:
//! - functions return a `SpanflowStatus` code; outputs go through out
//!   pointers
//! - returned strings are heap-allocated, freed with
//!   `spanflow_string_free`
//! - a loaded model is an opaque `SpanflowModel` handle, freed with
//!   `spanflow_model_free`
//! - on error, `spanflow_last_error` returns a message for the calling
//!   thread
//!
//! The header `include/spanflow.h` is generated with cbindgen; see the
//! crate README for the regeneration command.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use spanflow::checkpoint::Checkpoint;
use spanflow::error::{ErrorKind, SpanflowError};
use spanflow::eval::embeddings_csv;
use spanflow::eval::EmbeddingRow;
use spanflow::gnn::{forward, rollout};
use spanflow::io::{spans_to_jsonl, tokens_to_jsonl};
use spanflow::layout::{segment_page, LayoutConfig, Token};
use spanflow::pagegraph::{build_edges, GraphExport};
use spanflow::pipeline::embed_page;
use spanflow::svg::rollout_overlay_svg;
use spanflow::train::ModelParams;

/// Result codes for every FFI call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpanflowStatus {
    Ok = 0,
    InvalidInput = 1,
    RuntimeError = 2,
    Panic = 3,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let cstring = CString::new(msg.replace('\0', "?"))
        .unwrap_or_else(|_| CString::new("error").unwrap());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(cstring));
}

fn status_of(err: &SpanflowError) -> SpanflowStatus {
    match err.kind() {
        ErrorKind::Validation => SpanflowStatus::InvalidInput,
        ErrorKind::Runtime => SpanflowStatus::RuntimeError,
    }
}

/// Opaque trained model: checkpoint parameters plus vocabulary and config.
pub struct SpanflowModel {
    params: ModelParams,
    checkpoint: Checkpoint,
}

fn parse_tokens(raw: &str) -> Result<Vec<Token>, SpanflowError> {
    let mut tokens = Vec::new();
    for (lineno, line) in raw.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let token: Token = serde_json::from_str(line).map_err(|e| {
            SpanflowError::validation(format!("token line {}: {e}", lineno + 1))
        })?;
        token.validate()?;
        tokens.push(token);
    }
    if tokens.is_empty() {
        return Err(SpanflowError::validation("no tokens supplied"));
    }
    Ok(tokens)
}

unsafe fn cstr_arg<'a>(ptr: *const c_char, name: &str) -> Result<&'a str, SpanflowError> {
    if ptr.is_null() {
        return Err(SpanflowError::validation(format!("{name} is null")));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| SpanflowError::validation(format!("{name} is not valid UTF-8")))
}

fn return_string(out: *mut *mut c_char, text: String) -> SpanflowStatus {
    match CString::new(text) {
        Ok(cstring) => {
            unsafe { *out = cstring.into_raw() };
            SpanflowStatus::Ok
        }
        Err(_) => {
            set_error("output contained an interior NUL byte".to_string());
            SpanflowStatus::RuntimeError
        }
    }
}

fn guarded<F: FnOnce() -> SpanflowStatus>(f: F) -> SpanflowStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic".to_string());
            SpanflowStatus::Panic
        }
    }
}

/// Library version as a NUL-terminated static string.
#[no_mangle]
pub extern "C" fn spanflow_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message of the last error on this thread, or null. Free with
/// `spanflow_string_free`.
#[no_mangle]
pub extern "C" fn spanflow_last_error() -> *mut c_char {
    LAST_ERROR.with(|slot| match slot.borrow().as_ref() {
        Some(msg) => msg.clone().into_raw(),
        None => std::ptr::null_mut(),
    })
}

/// Free a string returned by this library. Null is ignored.
#[no_mangle]
pub extern "C" fn spanflow_string_free(ptr: *mut c_char) {
    if !ptr.is_null() {
        unsafe {
            drop(CString::from_raw(ptr));
        }
    }
}

/// Segment token JSONL (one page) into span JSONL.
///
/// `gap_factor` <= 0 selects the default; `line_tol` <= 0 derives it from
/// the page.
#[no_mangle]
pub unsafe extern "C" fn spanflow_segment_jsonl(
    tokens_jsonl: *const c_char,
    gap_factor: f64,
    line_tol: f64,
    out_spans_jsonl: *mut *mut c_char,
) -> SpanflowStatus {
    guarded(|| {
        if out_spans_jsonl.is_null() {
            set_error("out_spans_jsonl is null".to_string());
            return SpanflowStatus::InvalidInput;
        }
        let run = || -> Result<String, SpanflowError> {
            let raw = cstr_arg(tokens_jsonl, "tokens_jsonl")?;
            let tokens = parse_tokens(raw)?;
            let config = LayoutConfig {
                gap_factor: if gap_factor > 0.0 { gap_factor } else { 3.0 },
                line_tol: if line_tol > 0.0 { Some(line_tol) } else { None },
            };
            let spans = segment_page(&tokens, &config)?;
            Ok(spans_to_jsonl(&spans))
        };
        match run() {
            Ok(text) => return_string(out_spans_jsonl, text),
            Err(e) => {
                set_error(e.to_string());
                status_of(&e)
            }
        }
    })
}

/// Build the reading-pattern graph of one page; returns graph JSON with
/// vertices, directional edges, and sparse hop triplets.
#[no_mangle]
pub unsafe extern "C" fn spanflow_graph_json(
    tokens_jsonl: *const c_char,
    out_graph_json: *mut *mut c_char,
) -> SpanflowStatus {
    guarded(|| {
        if out_graph_json.is_null() {
            set_error("out_graph_json is null".to_string());
            return SpanflowStatus::InvalidInput;
        }
        let run = || -> Result<String, SpanflowError> {
            let raw = cstr_arg(tokens_jsonl, "tokens_jsonl")?;
            let tokens = parse_tokens(raw)?;
            let spans = segment_page(&tokens, &LayoutConfig::default())?;
            let graph = build_edges(spans)?;
            serde_json::to_string_pretty(&GraphExport::from_graph(&graph))
                .map_err(|e| SpanflowError::runtime(format!("graph serialization: {e}")))
        };
        match run() {
            Ok(text) => return_string(out_graph_json, text),
            Err(e) => {
                set_error(e.to_string());
                status_of(&e)
            }
        }
    })
}

/// Load a trained checkpoint (JSON text) into an opaque model handle.
#[no_mangle]
pub unsafe extern "C" fn spanflow_model_load(
    checkpoint_json: *const c_char,
    out_model: *mut *mut SpanflowModel,
) -> SpanflowStatus {
    guarded(|| {
        if out_model.is_null() {
            set_error("out_model is null".to_string());
            return SpanflowStatus::InvalidInput;
        }
        let run = || -> Result<SpanflowModel, SpanflowError> {
            let raw = cstr_arg(checkpoint_json, "checkpoint_json")?;
            let checkpoint = Checkpoint::from_json(raw)?;
            let params = checkpoint.to_params()?;
            Ok(SpanflowModel { params, checkpoint })
        };
        match run() {
            Ok(model) => {
                *out_model = Box::into_raw(Box::new(model));
                SpanflowStatus::Ok
            }
            Err(e) => {
                set_error(e.to_string());
                status_of(&e)
            }
        }
    })
}

/// Free a model handle. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn spanflow_model_free(model: *mut SpanflowModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Embedding dimension of a loaded model.
#[no_mangle]
pub unsafe extern "C" fn spanflow_model_dim(model: *const SpanflowModel) -> usize {
    if model.is_null() {
        return 0;
    }
    (*model).checkpoint.config.model.d
}

/// Embed one page of tokens; returns CSV with header
/// span_id,page_id,e0..e{d-1}.
#[no_mangle]
pub unsafe extern "C" fn spanflow_model_embed_page(
    model: *const SpanflowModel,
    tokens_jsonl: *const c_char,
    out_embeddings_csv: *mut *mut c_char,
) -> SpanflowStatus {
    guarded(|| {
        if model.is_null() || out_embeddings_csv.is_null() {
            set_error("model or out pointer is null".to_string());
            return SpanflowStatus::InvalidInput;
        }
        let model = &*model;
        let run = || -> Result<String, SpanflowError> {
            let raw = cstr_arg(tokens_jsonl, "tokens_jsonl")?;
            let tokens = parse_tokens(raw)?;
            let spans = segment_page(&tokens, &LayoutConfig::default())?;
            let graph = build_edges(spans)?;
            let emb = embed_page(
                &graph,
                &model.checkpoint.vocab,
                &model.params,
                &model.checkpoint.config.model,
            )?;
            let rows: Vec<EmbeddingRow> = graph
                .spans
                .iter()
                .enumerate()
                .map(|(i, s)| EmbeddingRow {
                    span_id: s.span_id,
                    page_id: s.page_id.clone(),
                    values: emb.row(i).to_vec(),
                })
                .collect();
            Ok(embeddings_csv(&rows, model.checkpoint.config.model.d))
        };
        match run() {
            Ok(text) => return_string(out_embeddings_csv, text),
            Err(e) => {
                set_error(e.to_string());
                status_of(&e)
            }
        }
    })
}

/// Attention-rollout overlay SVG for one query span of one page.
#[no_mangle]
pub unsafe extern "C" fn spanflow_model_rollout_svg(
    model: *const SpanflowModel,
    tokens_jsonl: *const c_char,
    query_span: usize,
    out_svg: *mut *mut c_char,
) -> SpanflowStatus {
    guarded(|| {
        if model.is_null() || out_svg.is_null() {
            set_error("model or out pointer is null".to_string());
            return SpanflowStatus::InvalidInput;
        }
        let model = &*model;
        let run = || -> Result<String, SpanflowError> {
            let raw = cstr_arg(tokens_jsonl, "tokens_jsonl")?;
            let tokens = parse_tokens(raw)?;
            let spans = segment_page(&tokens, &LayoutConfig::default())?;
            let graph = build_edges(spans)?;
            if query_span >= graph.len() {
                return Err(SpanflowError::validation(format!(
                    "query span {query_span} out of range for {} spans",
                    graph.len()
                )));
            }
            let config = &model.checkpoint.config.model;
            let mut feats = ndarray::Array2::zeros((graph.len(), config.d));
            for (i, span) in graph.spans.iter().enumerate() {
                let idx = spanflow::featurize::span_indices(span, &model.checkpoint.vocab)?;
                feats.row_mut(i).assign(&spanflow::featurize::embed_indices(
                    &idx,
                    &model.params.table,
                ));
            }
            let (_, attention) = forward(&graph, &feats, &model.params.stack, config)?;
            let map = rollout(&attention)?;
            Ok(rollout_overlay_svg(
                &graph.spans,
                &map.row(query_span).to_vec(),
                query_span,
            ))
        };
        match run() {
            Ok(text) => return_string(out_svg, text),
            Err(e) => {
                set_error(e.to_string());
                status_of(&e)
            }
        }
    })
}

// keep the end-to-end generator reachable from bindings too
/// Generate a synthetic paired-page corpus in memory and return its token
/// JSONL for the given page of the given pair (page is 1 or 2). Mainly for
/// binding smoke tests.
#[no_mangle]
pub unsafe extern "C" fn spanflow_synth_page_jsonl(
    seed: u64,
    pair_index: usize,
    page: u32,
    out_tokens_jsonl: *mut *mut c_char,
) -> SpanflowStatus {
    guarded(|| {
        if out_tokens_jsonl.is_null() {
            set_error("out_tokens_jsonl is null".to_string());
            return SpanflowStatus::InvalidInput;
        }
        let run = || -> Result<String, SpanflowError> {
            let spec = spanflow::synthdoc::CorpusSpec::new(seed, pair_index + 1);
            let pair = spanflow::synthdoc::generate_pair(&spec, pair_index)?;
            let tokens = match page {
                1 => &pair.tokens1,
                2 => &pair.tokens2,
                other => {
                    return Err(SpanflowError::validation(format!(
                        "page must be 1 or 2, got {other}"
                    )))
                }
            };
            Ok(tokens_to_jsonl(tokens))
        };
        match run() {
            Ok(text) => return_string(out_tokens_jsonl, text),
            Err(e) => {
                set_error(e.to_string());
                status_of(&e)
            }
        }
    })
}
