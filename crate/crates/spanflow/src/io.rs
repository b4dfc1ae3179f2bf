//! File formats and atomic writes.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SpanflowError};
use crate::layout::{Span, Token};

/// Write via a temp file in the same directory plus rename, so failures
/// never leave partial files.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir).map_err(|e| SpanflowError::io(dir, e))?;
    let file_name = path
        .file_name()
        .ok_or_else(|| SpanflowError::validation(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp", file_name.to_string_lossy()));
    {
        let mut f = fs::File::create(&tmp).map_err(|e| SpanflowError::io(&tmp, e))?;
        f.write_all(bytes).map_err(|e| SpanflowError::io(&tmp, e))?;
        f.sync_all().map_err(|e| SpanflowError::io(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| SpanflowError::io(path, e))?;
    Ok(())
}

pub fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| SpanflowError::io(path, e))
}

/// One token per line: {"page_id", "text", "x0", "y0", "x1", "y1"}.
pub fn read_tokens_jsonl(path: &Path) -> Result<Vec<Token>> {
    let text = read_to_string(path)?;
    let mut tokens = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let token: Token = serde_json::from_str(line).map_err(|e| SpanflowError::Parse {
            what: "token JSONL",
            path: path.to_path_buf(),
            detail: format!("line {}: {e}", lineno + 1),
        })?;
        token.validate()?;
        tokens.push(token);
    }
    Ok(tokens)
}

pub fn tokens_to_jsonl(tokens: &[Token]) -> String {
    let mut out = String::new();
    for t in tokens {
        out.push_str(&serde_json::to_string(t).expect("token serialization"));
        out.push('\n');
    }
    out
}

/// Span output record: text joined by single spaces, union bbox.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpanRecord {
    pub page_id: String,
    pub span_id: usize,
    pub text: String,
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl SpanRecord {
    pub fn from_span(span: &Span) -> SpanRecord {
        SpanRecord {
            page_id: span.page_id.clone(),
            span_id: span.span_id,
            text: span.text(),
            x0: span.x0,
            y0: span.y0,
            x1: span.x1,
            y1: span.y1,
        }
    }
}

pub fn spans_to_jsonl(spans: &[Span]) -> String {
    let mut out = String::new();
    for s in spans {
        let record = SpanRecord::from_span(s);
        out.push_str(&serde_json::to_string(&record).expect("span serialization"));
        out.push('\n');
    }
    out
}

/// Label file: token file paths plus anchor/positive span-id pairs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabelFile {
    pub graph1: String,
    pub graph2: String,
    pub pairs: Vec<(usize, usize)>,
}

pub fn read_label_file(path: &Path) -> Result<LabelFile> {
    let text = read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| SpanflowError::Parse {
        what: "label file",
        path: path.to_path_buf(),
        detail: e.to_string(),
    })
}
