//! Segmentation of positioned tokens into lines and spans.
//!
//! Tokens are grouped into lines by the bottom coordinate of their bounding
//! box, then each line is cut into spans wherever the whitespace between
//! consecutive tokens is large relative to the line's typical gap. Spans are
//! the vertex unit of the page graph.
//!
//! Coordinates use an abstract page space with the origin at the top-left
//! and y increasing downward.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SpanflowError};

/// A positioned text token on one page.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Token {
    pub page_id: String,
    pub text: String,
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Token {
    pub fn new(page_id: &str, text: &str, x0: f64, y0: f64, x1: f64, y1: f64) -> Token {
        Token {
            page_id: page_id.to_string(),
            text: text.to_string(),
            x0,
            y0,
            x1,
            y1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.text.is_empty() {
            return Err(SpanflowError::validation("token text is empty"));
        }
        if !(self.x0 < self.x1) || !(self.y0 < self.y1) {
            return Err(SpanflowError::validation(format!(
                "degenerate bbox ({}, {}, {}, {}) for token {:?}",
                self.x0, self.y0, self.x1, self.y1, self.text
            )));
        }
        Ok(())
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    /// Bottom edge of the bounding box (y grows downward).
    pub fn bottom(&self) -> f64 {
        self.y1
    }
}

/// A baseline-aligned run of tokens, ordered left to right.
#[derive(Debug, Clone, PartialEq)]
pub struct Line {
    pub tokens: Vec<Token>,
    /// Shared baseline: the median bottom of the member tokens.
    pub bottom: f64,
}

/// A contiguous run of tokens within one line; the page-graph vertex unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Span {
    pub page_id: String,
    /// Reading-order index: line order top to bottom, then left to right.
    pub span_id: usize,
    pub tokens: Vec<Token>,
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Span {
    fn from_tokens(page_id: &str, span_id: usize, tokens: Vec<Token>) -> Span {
        debug_assert!(!tokens.is_empty());
        let x0 = tokens.iter().map(|t| t.x0).fold(f64::INFINITY, f64::min);
        let y0 = tokens.iter().map(|t| t.y0).fold(f64::INFINITY, f64::min);
        let x1 = tokens.iter().map(|t| t.x1).fold(f64::NEG_INFINITY, f64::max);
        let y1 = tokens.iter().map(|t| t.y1).fold(f64::NEG_INFINITY, f64::max);
        Span {
            page_id: page_id.to_string(),
            span_id,
            tokens,
            x0,
            y0,
            x1,
            y1,
        }
    }

    /// Token texts joined by single spaces.
    pub fn text(&self) -> String {
        let parts: Vec<&str> = self.tokens.iter().map(|t| t.text.as_str()).collect();
        parts.join(" ")
    }
}

/// Segmentation parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutConfig {
    /// Cut a line where a gap exceeds `gap_factor` times the line's median
    /// positive gap.
    pub gap_factor: f64,
    /// Bottom-coordinate tolerance for line grouping. `None` derives it from
    /// the page: 0.25 x median token height, floored at 0.5 units.
    pub line_tol: Option<f64>,
}

impl Default for LayoutConfig {
    fn default() -> LayoutConfig {
        LayoutConfig {
            gap_factor: 3.0,
            line_tol: None,
        }
    }
}

fn median(sorted: &[f64]) -> f64 {
    debug_assert!(!sorted.is_empty());
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Derive the default line tolerance for a set of tokens.
pub fn default_line_tol(tokens: &[Token]) -> f64 {
    if tokens.is_empty() {
        return 0.5;
    }
    let mut heights: Vec<f64> = tokens.iter().map(Token::height).collect();
    heights.sort_by(|a, b| a.partial_cmp(b).unwrap());
    (0.25 * median(&heights)).max(0.5)
}

/// Group tokens into lines by bottom coordinate.
///
/// Single-linkage chaining: after sorting by bottom, a new line starts
/// whenever the gap to the previous bottom exceeds `line_tol`. Lines come
/// back sorted by bottom ascending, tokens within a line sorted by x0.
pub fn group_lines(tokens: &[Token], line_tol: f64) -> Vec<Line> {
    if tokens.is_empty() {
        return Vec::new();
    }
    let mut order: Vec<usize> = (0..tokens.len()).collect();
    order.sort_by(|&a, &b| {
        tokens[a]
            .bottom()
            .partial_cmp(&tokens[b].bottom())
            .unwrap()
            .then(a.cmp(&b))
    });

    let mut lines: Vec<Vec<Token>> = Vec::new();
    let mut current: Vec<Token> = vec![tokens[order[0]].clone()];
    let mut prev_bottom = tokens[order[0]].bottom();
    for &idx in &order[1..] {
        let b = tokens[idx].bottom();
        if b - prev_bottom <= line_tol {
            current.push(tokens[idx].clone());
        } else {
            lines.push(std::mem::take(&mut current));
            current.push(tokens[idx].clone());
        }
        prev_bottom = b;
    }
    lines.push(current);

    lines
        .into_iter()
        .map(|mut members| {
            let mut bottoms: Vec<f64> = members.iter().map(Token::bottom).collect();
            bottoms.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let bottom = median(&bottoms);
            members.sort_by(|a, b| {
                a.x0.partial_cmp(&b.x0)
                    .unwrap()
                    .then(a.x1.partial_cmp(&b.x1).unwrap())
            });
            Line {
                tokens: members,
                bottom,
            }
        })
        .collect()
}

/// Cut one line into spans at column-scale whitespace.
///
/// A cut happens between tokens i and i+1 iff the horizontal gap exceeds
/// `gap_factor` times the median positive gap of the line. Lines with fewer
/// than 3 tokens or without any positive gap are never cut.
pub fn cut_line(line: &Line, gap_factor: f64) -> Vec<Vec<Token>> {
    let n = line.tokens.len();
    if n == 0 {
        return Vec::new();
    }
    let gaps: Vec<f64> = (0..n - 1)
        .map(|i| line.tokens[i + 1].x0 - line.tokens[i].x1)
        .collect();
    let mut positive: Vec<f64> = gaps.iter().copied().filter(|g| *g > 0.0).collect();

    if n < 3 || positive.is_empty() {
        return vec![line.tokens.clone()];
    }
    positive.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let threshold = gap_factor * median(&positive);

    let mut spans: Vec<Vec<Token>> = Vec::new();
    let mut current: Vec<Token> = vec![line.tokens[0].clone()];
    for (i, gap) in gaps.iter().enumerate() {
        if *gap > threshold {
            spans.push(std::mem::take(&mut current));
        }
        current.push(line.tokens[i + 1].clone());
    }
    spans.push(current);
    spans
}

/// Segment one page of tokens into reading-ordered spans.
pub fn segment_page(tokens: &[Token], config: &LayoutConfig) -> Result<Vec<Span>> {
    if tokens.is_empty() {
        return Ok(Vec::new());
    }
    for t in tokens {
        t.validate()?;
    }
    let page_id = &tokens[0].page_id;
    if tokens.iter().any(|t| &t.page_id != page_id) {
        return Err(SpanflowError::validation(
            "segment_page requires all tokens to share one page_id",
        ));
    }

    let tol = config.line_tol.unwrap_or_else(|| default_line_tol(tokens));
    let lines = group_lines(tokens, tol);

    let mut spans = Vec::new();
    for line in &lines {
        for group in cut_line(line, config.gap_factor) {
            let id = spans.len();
            spans.push(Span::from_tokens(page_id, id, group));
        }
    }
    Ok(spans)
}
