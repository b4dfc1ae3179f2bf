//! Span text normalization and feature vectors.
//!
//! Numbers are masked by magnitude plus a kind marker (currency, percent,
//! plain quantity); dates collapse to component markers. Masked surfaces are
//! looked up in a trainable embedding table, out-of-vocabulary words landing
//! in FNV-1a hash buckets, and a span's feature vector is the mean of its
//! token rows.

use std::collections::HashMap;

use ndarray::{Array1, Array2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SpanflowError};
use crate::layout::Span;

/// The closed set of mask tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskKind {
    NumTens,
    NumHundreds,
    NumThousands,
    NumMillions,
    Currency,
    Percent,
    Quantity,
    Day,
    Month,
    Year,
    Quarter,
}

pub const MASK_KINDS: [MaskKind; 11] = [
    MaskKind::NumTens,
    MaskKind::NumHundreds,
    MaskKind::NumThousands,
    MaskKind::NumMillions,
    MaskKind::Currency,
    MaskKind::Percent,
    MaskKind::Quantity,
    MaskKind::Day,
    MaskKind::Month,
    MaskKind::Year,
    MaskKind::Quarter,
];

impl MaskKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MaskKind::NumTens => "<num_tens>",
            MaskKind::NumHundreds => "<num_hundreds>",
            MaskKind::NumThousands => "<num_thousands>",
            MaskKind::NumMillions => "<num_millions>",
            MaskKind::Currency => "<currency>",
            MaskKind::Percent => "<percent>",
            MaskKind::Quantity => "<quantity>",
            MaskKind::Day => "<day>",
            MaskKind::Month => "<month>",
            MaskKind::Year => "<year>",
            MaskKind::Quarter => "<quarter>",
        }
    }
}

/// One normalized surface: either a mask token or a lowercased word with no
/// digits.
#[derive(Debug, Clone, PartialEq)]
pub enum MaskedToken {
    Mask(MaskKind),
    Word(String),
}

impl MaskedToken {
    pub fn surface(&self) -> &str {
        match self {
            MaskedToken::Mask(kind) => kind.as_str(),
            MaskedToken::Word(w) => w,
        }
    }
}

const MONTHS: [(&str, &str); 12] = [
    ("january", "jan"),
    ("february", "feb"),
    ("march", "mar"),
    ("april", "apr"),
    ("may", "may"),
    ("june", "jun"),
    ("july", "jul"),
    ("august", "aug"),
    ("september", "sep"),
    ("october", "oct"),
    ("november", "nov"),
    ("december", "dec"),
];

fn is_month_name(word: &str) -> bool {
    let w = word.to_lowercase();
    MONTHS.iter().any(|(full, abbr)| w == *full || w == *abbr)
}

fn is_quarter(word: &str) -> bool {
    let b = word.as_bytes();
    b.len() == 2 && (b[0] == b'q' || b[0] == b'Q') && (b'1'..=b'4').contains(&b[1])
}

fn all_digits(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit())
}

fn magnitude_of(v: f64) -> MaskKind {
    let v = v.abs();
    if v < 100.0 {
        MaskKind::NumTens
    } else if v < 1000.0 {
        MaskKind::NumHundreds
    } else if v < 1_000_000.0 {
        MaskKind::NumThousands
    } else {
        MaskKind::NumMillions
    }
}

fn magnitude_by_digit_count(s: &str) -> MaskKind {
    let digits = s.bytes().filter(|b| b.is_ascii_digit()).count();
    match digits {
        0..=2 => MaskKind::NumTens,
        3 => MaskKind::NumHundreds,
        4..=6 => MaskKind::NumThousands,
        _ => MaskKind::NumMillions,
    }
}

fn mask_numeric(part: &str) -> Vec<MaskedToken> {
    let mut is_currency = false;
    let mut is_percent = false;
    let mut core = String::new();
    for ch in part.chars() {
        match ch {
            '$' | '€' | '£' | '¥' => is_currency = true,
            '%' => is_percent = true,
            ',' | '(' | ')' => {}
            _ => core.push(ch),
        }
    }
    let kind = if is_currency {
        MaskKind::Currency
    } else if is_percent {
        MaskKind::Percent
    } else {
        MaskKind::Quantity
    };
    match core.parse::<f64>() {
        Ok(v) if v.is_finite() => vec![
            MaskedToken::Mask(magnitude_of(v)),
            MaskedToken::Mask(kind),
        ],
        _ => vec![
            MaskedToken::Mask(magnitude_by_digit_count(part)),
            MaskedToken::Mask(MaskKind::Quantity),
        ],
    }
}

/// Full-string date patterns: ISO dates, "Qn YYYY", "Month DD, YYYY".
fn mask_date_pattern(s: &str) -> Option<Vec<MaskedToken>> {
    use MaskedToken::Mask;
    // ISO YYYY-MM-DD
    let iso: Vec<&str> = s.split('-').collect();
    if iso.len() == 3
        && iso[0].len() == 4
        && iso[1].len() == 2
        && iso[2].len() == 2
        && iso.iter().all(|p| all_digits(p))
    {
        return Some(vec![
            Mask(MaskKind::Year),
            Mask(MaskKind::Month),
            Mask(MaskKind::Day),
        ]);
    }
    let parts: Vec<&str> = s.split_whitespace().collect();
    // Qn YYYY
    if parts.len() == 2 && is_quarter(parts[0]) && parts[1].len() == 4 && all_digits(parts[1]) {
        return Some(vec![Mask(MaskKind::Quarter), Mask(MaskKind::Year)]);
    }
    // Month DD, YYYY
    if parts.len() == 3 && is_month_name(parts[0]) {
        let day = parts[1].trim_end_matches(',');
        if (1..=2).contains(&day.len())
            && all_digits(day)
            && parts[2].len() == 4
            && all_digits(parts[2])
        {
            return Some(vec![
                Mask(MaskKind::Month),
                Mask(MaskKind::Day),
                Mask(MaskKind::Year),
            ]);
        }
    }
    None
}

/// Normalize one raw string into masked surfaces.
pub fn mask_token(raw: &str) -> Vec<MaskedToken> {
    let trimmed = raw.trim();
    if trimmed.is_empty() {
        return Vec::new();
    }
    if let Some(date) = mask_date_pattern(trimmed) {
        return date;
    }
    let mut out = Vec::new();
    for part in trimmed.split_whitespace() {
        if is_month_name(part) {
            out.push(MaskedToken::Mask(MaskKind::Month));
        } else if is_quarter(part) {
            out.push(MaskedToken::Mask(MaskKind::Quarter));
        } else if part.bytes().any(|b| b.is_ascii_digit()) {
            out.extend(mask_numeric(part));
        } else {
            out.push(MaskedToken::Word(part.to_lowercase()));
        }
    }
    out
}

/// Masked surfaces of a whole span, token by token.
pub fn mask_span(span: &Span) -> Vec<MaskedToken> {
    span.tokens
        .iter()
        .flat_map(|t| mask_token(&t.text))
        .collect()
}

pub fn fnv1a64(s: &str) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in s.bytes() {
        hash ^= byte as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Token index map with hash buckets for out-of-vocabulary words.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Vocab {
    pub tokens: Vec<String>,
    pub buckets: usize,
    pub d: usize,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl Vocab {
    /// Rebuild the lookup map after deserialization.
    pub fn reindex(&mut self) {
        self.index = self
            .tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
    }

    pub fn rows(&self) -> usize {
        self.tokens.len() + self.buckets
    }

    /// Dense index of a masked surface: vocabulary slot or hash bucket.
    pub fn lookup(&self, surface: &str) -> usize {
        match self.index.get(surface) {
            Some(&i) => i,
            None => self.tokens.len() + (fnv1a64(surface) % self.buckets as u64) as usize,
        }
    }
}

/// Count masked surfaces over a corpus and assemble the vocabulary. Mask
/// tokens are always present; other words need at least `min_count`
/// occurrences. Ordering is (count desc, token asc).
pub fn build_vocab(corpus: &[Span], min_count: usize, buckets: usize, d: usize) -> Vocab {
    let mut counts: HashMap<String, usize> = HashMap::new();
    for span in corpus {
        for tok in mask_span(span) {
            *counts.entry(tok.surface().to_string()).or_insert(0) += 1;
        }
    }
    let mask_set: Vec<&str> = MASK_KINDS.iter().map(|k| k.as_str()).collect();
    for mask in &mask_set {
        counts.entry(mask.to_string()).or_insert(0);
    }
    let mut entries: Vec<(String, usize)> = counts
        .into_iter()
        .filter(|(token, count)| mask_set.contains(&token.as_str()) || *count >= min_count)
        .collect();
    entries.sort_by(|(ta, ca), (tb, cb)| cb.cmp(ca).then(ta.cmp(tb)));

    let mut vocab = Vocab {
        tokens: entries.into_iter().map(|(t, _)| t).collect(),
        buckets,
        d,
        index: HashMap::new(),
    };
    vocab.reindex();
    vocab
}

/// Trainable embedding rows, one per vocabulary slot and hash bucket.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    pub weights: Array2<f64>,
}

impl EmbeddingTable {
    pub fn init(vocab: &Vocab, rng: &mut impl Rng) -> EmbeddingTable {
        let bound = (3.0 / vocab.d as f64).sqrt();
        let mut weights = Array2::zeros((vocab.rows(), vocab.d));
        for w in weights.iter_mut() {
            *w = rng.gen_range(-bound..bound);
        }
        EmbeddingTable { weights }
    }
}

/// Table row indices used by a span's masked tokens.
pub fn span_indices(span: &Span, vocab: &Vocab) -> Result<Vec<usize>> {
    let masked = mask_span(span);
    if masked.is_empty() {
        return Err(SpanflowError::EmptySpan);
    }
    Ok(masked.iter().map(|t| vocab.lookup(t.surface())).collect())
}

/// Mean of the embedding rows selected by `indices`.
pub fn embed_indices(indices: &[usize], table: &EmbeddingTable) -> Array1<f64> {
    let d = table.weights.ncols();
    let mut out = Array1::<f64>::zeros(d);
    for &idx in indices {
        out += &table.weights.row(idx);
    }
    out / indices.len() as f64
}

/// Span feature vector: the mean of its masked tokens' embedding rows.
pub fn embed_span(span: &Span, vocab: &Vocab, table: &EmbeddingTable) -> Result<Array1<f64>> {
    if table.weights.nrows() != vocab.rows() {
        return Err(SpanflowError::validation(format!(
            "embedding table has {} rows, vocab requires {}",
            table.weights.nrows(),
            vocab.rows()
        )));
    }
    Ok(embed_indices(&span_indices(span, vocab)?, table))
}

/// Scatter a span-level feature gradient back onto the table rows it read.
pub fn accumulate_span_gradient(
    indices: &[usize],
    upstream: &Array1<f64>,
    table_grad: &mut Array2<f64>,
) {
    let scale = 1.0 / indices.len() as f64;
    for &idx in indices {
        let mut row = table_grad.row_mut(idx);
        row += &(upstream * scale);
    }
}
