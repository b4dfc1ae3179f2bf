//! Deterministic generator of paired synthetic pages.
//!
//! Each pair shares one set of (item, value-class) facts rendered in two
//! layouts: a table with row labels and period columns, a leader-style list,
//! or narrative lines with right-aligned figures. Values are re-sampled per
//! page within the same magnitude/kind class, so labeled spans mask to
//! identical token sequences while the raw numerals differ. Geometry is
//! sized so the default segmentation settings recover exactly the intended
//! spans, which makes the generator a ground-truth oracle for the layout
//! stage.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SpanflowError};
use crate::layout::{segment_page, LayoutConfig, Span, Token};
use crate::train::LabeledPair;

pub const PAGE_WIDTH: f64 = 1000.0;
pub const PAGE_HEIGHT: f64 = 1400.0;
const TOKEN_HEIGHT: f64 = 12.0;
const CHAR_WIDTH: f64 = 6.0;
/// Hard cap on rendered lines per page.
const LINE_BUDGET: usize = 38;

const ITEM_WORDS: [&str; 48] = [
    "revenue", "costs", "earnings", "assets", "liabilities", "equity", "cash", "inventory",
    "receivables", "payables", "depreciation", "amortization", "interest", "taxes", "dividends",
    "margins", "expenses", "income", "goodwill", "provisions", "reserves", "deferrals",
    "accruals", "royalties", "rent", "salaries", "utilities", "freight", "insurance",
    "maintenance", "marketing", "research", "licensing", "subscriptions", "commissions",
    "impairments", "leases", "pensions", "grants", "rebates", "settlements", "penalties",
    "donations", "stipends", "premiums", "tariffs", "surcharges", "refunds",
];

const HEADER_WORDS: [&str; 4] = ["current", "prior", "budget", "forecast"];

const FILLER_WORDS: [&str; 24] = [
    "the", "company", "reported", "steady", "performance", "during", "review", "management",
    "expects", "continued", "growth", "across", "operating", "segments", "results", "reflect",
    "seasonal", "variation", "and", "market", "conditions", "noted", "by", "auditors",
];

/// Layout kind of one rendered page.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayoutKind {
    Paragraph,
    List,
    Table,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayoutMix {
    pub paragraph: f64,
    pub list: f64,
    pub table: f64,
}

impl LayoutMix {
    pub fn tables_only() -> LayoutMix {
        LayoutMix {
            paragraph: 0.0,
            list: 0.0,
            table: 1.0,
        }
    }

    fn total(&self) -> f64 {
        self.paragraph + self.list + self.table
    }

    fn sample(&self, rng: &mut impl Rng) -> LayoutKind {
        let roll = rng.gen_range(0.0..self.total());
        if roll < self.paragraph {
            LayoutKind::Paragraph
        } else if roll < self.paragraph + self.list {
            LayoutKind::List
        } else {
            LayoutKind::Table
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub seed: u64,
    /// Number of page pairs.
    pub pages: usize,
    pub layout_mix: LayoutMix,
    pub rows_min: usize,
    pub rows_max: usize,
    /// Value columns per table (the label column comes on top of these).
    pub cols_min: usize,
    pub cols_max: usize,
    /// Probability of an unlabeled distractor row per fact row.
    pub noise: f64,
    /// Probability that a fact's value is omitted from one page's
    /// rendering; omitted facts drop out of the labels.
    pub hole_rate: f64,
}

impl CorpusSpec {
    pub fn new(seed: u64, pages: usize) -> CorpusSpec {
        CorpusSpec {
            seed,
            pages,
            layout_mix: LayoutMix {
                paragraph: 0.15,
                list: 0.2,
                table: 0.65,
            },
            rows_min: 4,
            rows_max: 12,
            cols_min: 2,
            cols_max: 3,
            noise: 0.0,
            hole_rate: 0.0,
        }
    }

    /// Corpus sized like the reference setting: 70 table pairs averaging
    /// around a hundred vertices per page.
    pub fn paper_scale(seed: u64) -> CorpusSpec {
        CorpusSpec {
            seed,
            pages: 70,
            layout_mix: LayoutMix::tables_only(),
            rows_min: 21,
            rows_max: 24,
            cols_min: 4,
            cols_max: 4,
            noise: 0.0,
            hole_rate: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.pages == 0 {
            return Err(SpanflowError::validation("pages must be >= 1"));
        }
        let mix = self.layout_mix;
        if mix.paragraph < 0.0 || mix.list < 0.0 || mix.table < 0.0 || mix.total() <= 0.0 {
            return Err(SpanflowError::validation(
                "layout mix weights must be non-negative with positive sum",
            ));
        }
        if self.rows_min < 1 || self.rows_min > self.rows_max {
            return Err(SpanflowError::validation("empty table row range"));
        }
        if self.cols_min < 1 || self.cols_min > self.cols_max {
            return Err(SpanflowError::validation("empty table column range"));
        }
        if self.cols_max > HEADER_WORDS.len() {
            return Err(SpanflowError::validation(format!(
                "at most {} value columns are supported",
                HEADER_WORDS.len()
            )));
        }
        // a table must fit its header and rows on the canvas
        if self.rows_max + 1 > LINE_BUDGET {
            return Err(SpanflowError::validation(format!(
                "rows_max {} cannot fit a {LINE_BUDGET}-line page",
                self.rows_max
            )));
        }
        if self.rows_max + 8 > ITEM_WORDS.len() {
            return Err(SpanflowError::validation(
                "row range exceeds the item vocabulary",
            ));
        }
        if !(0.0..=1.0).contains(&self.noise) {
            return Err(SpanflowError::validation("noise must be within [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.hole_rate) {
            return Err(SpanflowError::validation("hole_rate must be within [0, 1]"));
        }
        Ok(())
    }
}

/// Value class of a fact: magnitude bucket plus rendering kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ValueKind {
    Currency,
    Percent,
    Quantity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct ValueClass {
    kind: ValueKind,
    /// Decimal digits of the sampled numeral.
    digits_min: u32,
    digits_max: u32,
}

const VALUE_CLASSES: [ValueClass; 4] = [
    ValueClass { kind: ValueKind::Currency, digits_min: 7, digits_max: 8 },
    ValueClass { kind: ValueKind::Currency, digits_min: 4, digits_max: 6 },
    ValueClass { kind: ValueKind::Percent, digits_min: 2, digits_max: 2 },
    ValueClass { kind: ValueKind::Quantity, digits_min: 4, digits_max: 6 },
];

fn format_with_commas(v: u64) -> String {
    let raw = v.to_string();
    let mut out = String::new();
    for (i, ch) in raw.chars().enumerate() {
        if i > 0 && (raw.len() - i) % 3 == 0 {
            out.push(',');
        }
        out.push(ch);
    }
    out
}

impl ValueClass {
    fn render(&self, rng: &mut impl Rng) -> (String, &'static str) {
        let digits = rng.gen_range(self.digits_min..=self.digits_max);
        let low = 10u64.pow(digits - 1);
        let high = 10u64.pow(digits) - 1;
        let v = rng.gen_range(low..=high);
        match self.kind {
            ValueKind::Currency => (format!("${}", format_with_commas(v)), "usd"),
            ValueKind::Percent => (format!("{v}%"), "pct"),
            ValueKind::Quantity => (format_with_commas(v), "units"),
        }
    }
}

/// One shared fact: an item crossed with a period column, carrying a value
/// class.
#[derive(Debug, Clone)]
struct Fact {
    item: &'static str,
    column: usize,
    class: ValueClass,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TableGrid {
    pub rows: usize,
    pub cols: usize,
    /// Span id of each value cell, row-major in render order; `None` marks
    /// an empty cell.
    pub cell_span_ids: Vec<Vec<Option<usize>>>,
}

/// A generated pair: tokens for both pages, labels over shared value spans,
/// and table grids where applicable.
#[derive(Debug, Clone)]
pub struct GeneratedPair {
    pub pair_index: usize,
    pub tokens1: Vec<Token>,
    pub tokens2: Vec<Token>,
    pub labels: LabeledPair,
    pub layout1: LayoutKind,
    pub layout2: LayoutKind,
    pub table1: Option<TableGrid>,
    pub table2: Option<TableGrid>,
}

/// Line under construction: words with jittered gaps, then an optional
/// right-aligned cell.
struct PageBuilder {
    page_id: String,
    tokens: Vec<Token>,
    y: f64,
    pitch: f64,
    x_left: f64,
}

impl PageBuilder {
    fn new(page_id: &str, rng: &mut impl Rng) -> PageBuilder {
        PageBuilder {
            page_id: page_id.to_string(),
            tokens: Vec::new(),
            y: 80.0 + rng.gen_range(0.0..30.0),
            pitch: 26.0 + rng.gen_range(0.0..6.0),
            x_left: 60.0 + rng.gen_range(0.0..20.0),
        }
    }

    fn push_word(&mut self, text: &str, x: f64) -> f64 {
        let width = text.chars().count() as f64 * CHAR_WIDTH;
        self.tokens.push(Token::new(
            &self.page_id,
            text,
            x,
            self.y,
            x + width,
            self.y + TOKEN_HEIGHT,
        ));
        x + width
    }

    /// Emit words separated by intra-cell gaps starting at `x`; returns the
    /// x just past the last token.
    fn push_cell(&mut self, words: &[&str], x: f64, rng: &mut impl Rng) -> f64 {
        let mut cursor = x;
        for (i, w) in words.iter().enumerate() {
            if i > 0 {
                cursor += rng.gen_range(4.0..8.0);
            }
            cursor = self.push_word(w, cursor);
        }
        cursor
    }

    fn next_line(&mut self) {
        self.y += self.pitch;
    }
}

/// Marked value positions: fact index (or None for distractors) plus the
/// numeral token's identity for span matching after segmentation.
struct ValueMark {
    fact: Option<usize>,
    /// (row, col) within the rendered table, when the page is a table.
    grid_pos: Option<(usize, usize)>,
    token_x0: f64,
    token_y0: f64,
}

struct RenderedPage {
    tokens: Vec<Token>,
    marks: Vec<ValueMark>,
    grid_rows: usize,
    grid_cols: usize,
}

enum RowPlan {
    Fact(usize),
    Distractor(&'static str),
}

/// Fact rows in the given order with distractor rows mixed in, within the
/// line budget.
fn plan_rows(
    fact_order: &[usize],
    distractor_items: &[&'static str],
    noise: f64,
    reserved_lines: usize,
    rng: &mut impl Rng,
) -> Vec<RowPlan> {
    let mut plan: Vec<RowPlan> = fact_order.iter().map(|&f| RowPlan::Fact(f)).collect();
    if noise > 0.0 {
        let mut pool = distractor_items.iter();
        let budget = LINE_BUDGET.saturating_sub(reserved_lines + fact_order.len());
        let mut added = 0;
        for _ in 0..fact_order.len() {
            if added >= budget {
                break;
            }
            if rng.gen_range(0.0..1.0) < noise {
                if let Some(item) = pool.next() {
                    let at = rng.gen_range(0..=plan.len());
                    plan.insert(at, RowPlan::Distractor(item));
                    added += 1;
                }
            }
        }
    }
    plan
}

fn render_table(
    page_id: &str,
    facts: &[Fact],
    cols: usize,
    headers: &[&'static str],
    fact_rows: &[usize],
    distractor_items: &[&'static str],
    noise: f64,
    hole_rate: f64,
    rng: &mut impl Rng,
) -> RenderedPage {
    let mut b = PageBuilder::new(page_id, rng);
    let label_budget = 220.0;
    let col_pitch = 180.0;

    // heading line
    b.push_cell(&["consolidated", "interim", "statements"], b.x_left, rng);
    b.next_line();

    // header row over the value columns
    for (c, header) in headers.iter().enumerate() {
        let x = b.x_left + label_budget + c as f64 * col_pitch;
        b.push_cell(&[header, "period"], x, rng);
    }
    b.next_line();

    let plan = plan_rows(fact_rows, distractor_items, noise, 2, rng);
    let mut marks = Vec::new();
    let mut grid_row = 0usize;
    for row in &plan {
        let (item, classes): (&str, Vec<ValueClass>) = match row {
            RowPlan::Fact(r) => (
                facts[r * cols].item,
                (0..cols).map(|c| facts[r * cols + c].class).collect(),
            ),
            RowPlan::Distractor(item) => {
                let class = VALUE_CLASSES[rng.gen_range(0..VALUE_CLASSES.len())];
                (item, vec![class; cols])
            }
        };
        b.push_cell(&[item, "total"], b.x_left, rng);
        for c in 0..cols {
            // hole: this page omits the value entirely
            if hole_rate > 0.0 && rng.gen_range(0.0..1.0) < hole_rate {
                continue;
            }
            let x = b.x_left + label_budget + c as f64 * col_pitch;
            let (numeral, unit) = classes[c].render(rng);
            let y0 = b.y;
            b.push_cell(&[&numeral, unit], x, rng);
            let token_x0 = x;
            marks.push(ValueMark {
                fact: match row {
                    RowPlan::Fact(r) => Some(r * cols + c),
                    RowPlan::Distractor(_) => None,
                },
                grid_pos: Some((grid_row, c)),
                token_x0,
                token_y0: y0,
            });
        }
        grid_row += 1;
        b.next_line();
    }
    RenderedPage {
        tokens: b.tokens,
        marks,
        grid_rows: grid_row,
        grid_cols: cols,
    }
}

fn render_list(
    page_id: &str,
    facts: &[Fact],
    cols: usize,
    headers: &[&'static str],
    fact_entry_order: &[usize],
    distractor_items: &[&'static str],
    noise: f64,
    hole_rate: f64,
    rng: &mut impl Rng,
) -> RenderedPage {
    let mut b = PageBuilder::new(page_id, rng);
    let value_x = 720.0;

    b.push_cell(&["summary", "of", "balances"], b.x_left, rng);
    b.next_line();

    let plan = plan_rows(fact_entry_order, distractor_items, noise, 1, rng);
    let mut marks = Vec::new();
    for entry in &plan {
        if hole_rate > 0.0 && matches!(entry, RowPlan::Fact(_)) && rng.gen_range(0.0..1.0) < hole_rate {
            continue;
        }
        let (item, header, class, fact_idx) = match entry {
            RowPlan::Fact(f) => (
                facts[*f].item,
                headers[facts[*f].column],
                facts[*f].class,
                Some(*f),
            ),
            RowPlan::Distractor(item) => (
                *item,
                headers[rng.gen_range(0..cols)],
                VALUE_CLASSES[rng.gen_range(0..VALUE_CLASSES.len())],
                None,
            ),
        };
        b.push_cell(&[item, header], b.x_left, rng);
        let (numeral, unit) = class.render(rng);
        let y0 = b.y;
        b.push_cell(&[&numeral, unit], value_x, rng);
        marks.push(ValueMark {
            fact: fact_idx,
            grid_pos: None,
            token_x0: value_x,
            token_y0: y0,
        });
        b.next_line();
    }
    RenderedPage {
        tokens: b.tokens,
        marks,
        grid_rows: 0,
        grid_cols: 0,
    }
}

fn render_paragraph(
    page_id: &str,
    facts: &[Fact],
    cols: usize,
    headers: &[&'static str],
    fact_entry_order: &[usize],
    distractor_items: &[&'static str],
    noise: f64,
    hole_rate: f64,
    rng: &mut impl Rng,
) -> RenderedPage {
    let mut b = PageBuilder::new(page_id, rng);
    let value_x = 780.0;

    // a short narrative block before the figures
    for _ in 0..3 {
        let count = rng.gen_range(5..9);
        let words: Vec<&str> = (0..count)
            .map(|_| FILLER_WORDS[rng.gen_range(0..FILLER_WORDS.len())])
            .collect();
        b.push_cell(&words, b.x_left, rng);
        b.next_line();
    }

    let plan = plan_rows(fact_entry_order, distractor_items, noise, 4, rng);
    let mut marks = Vec::new();
    for entry in &plan {
        if hole_rate > 0.0 && matches!(entry, RowPlan::Fact(_)) && rng.gen_range(0.0..1.0) < hole_rate {
            continue;
        }
        let (item, header, class, fact_idx) = match entry {
            RowPlan::Fact(f) => (
                facts[*f].item,
                headers[facts[*f].column],
                facts[*f].class,
                Some(*f),
            ),
            RowPlan::Distractor(item) => (
                *item,
                headers[rng.gen_range(0..cols)],
                VALUE_CLASSES[rng.gen_range(0..VALUE_CLASSES.len())],
                None,
            ),
        };
        let lead_count = rng.gen_range(2..5);
        let mut words: Vec<&str> = (0..lead_count)
            .map(|_| FILLER_WORDS[rng.gen_range(0..FILLER_WORDS.len())])
            .collect();
        words.push(item);
        words.push(header);
        b.push_cell(&words, b.x_left, rng);
        let (numeral, unit) = class.render(rng);
        let y0 = b.y;
        b.push_cell(&[&numeral, unit], value_x, rng);
        marks.push(ValueMark {
            fact: fact_idx,
            grid_pos: None,
            token_x0: value_x,
            token_y0: y0,
        });
        b.next_line();
    }
    RenderedPage {
        tokens: b.tokens,
        marks,
        grid_rows: 0,
        grid_cols: 0,
    }
}

/// Segment a rendered page and resolve each value mark to its span id,
/// checking that every value cell segmented into exactly one two-token span.
fn resolve_marks(
    rendered: &RenderedPage,
) -> Result<(Vec<Span>, Vec<(Option<usize>, Option<(usize, usize)>, usize)>)> {
    let spans = segment_page(&rendered.tokens, &LayoutConfig::default())?;
    let mut resolved = Vec::with_capacity(rendered.marks.len());
    for mark in &rendered.marks {
        let span = spans
            .iter()
            .find(|s| {
                s.tokens
                    .iter()
                    .any(|t| t.x0 == mark.token_x0 && t.y0 == mark.token_y0)
            })
            .ok_or_else(|| {
                SpanflowError::runtime(format!(
                    "value token at ({}, {}) not found in any span",
                    mark.token_x0, mark.token_y0
                ))
            })?;
        if span.tokens.len() != 2 {
            return Err(SpanflowError::runtime(format!(
                "value cell segmented into a {}-token span; generator geometry broken",
                span.tokens.len()
            )));
        }
        resolved.push((mark.fact, mark.grid_pos, span.span_id));
    }
    Ok((spans, resolved))
}

fn render_page(
    kind: LayoutKind,
    page_id: &str,
    facts: &[Fact],
    cols: usize,
    headers: &[&'static str],
    order: &[usize],
    distractors: &[&'static str],
    noise: f64,
    hole_rate: f64,
    rng: &mut impl Rng,
) -> RenderedPage {
    match kind {
        LayoutKind::Table => {
            render_table(page_id, facts, cols, headers, order, distractors, noise, hole_rate, rng)
        }
        LayoutKind::List => {
            let entries: Vec<usize> = order
                .iter()
                .flat_map(|&r| (0..cols).map(move |c| r * cols + c))
                .collect();
            render_list(page_id, facts, cols, headers, &entries, distractors, noise, hole_rate, rng)
        }
        LayoutKind::Paragraph => {
            let entries: Vec<usize> = order
                .iter()
                .flat_map(|&r| (0..cols).map(move |c| r * cols + c))
                .collect();
            render_paragraph(
                page_id, facts, cols, headers, &entries, distractors, noise, hole_rate, rng,
            )
        }
    }
}

/// Generate one page pair, fully determined by (spec.seed, pair_index).
pub fn generate_pair(spec: &CorpusSpec, pair_index: usize) -> Result<GeneratedPair> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(1 + pair_index as u64);

    let kind1 = spec.layout_mix.sample(&mut rng);
    let kind2 = spec.layout_mix.sample(&mut rng);

    let cols = rng.gen_range(spec.cols_min..=spec.cols_max);
    let mut rows = rng.gen_range(spec.rows_min..=spec.rows_max);
    // non-table pages spend one line per fact
    if kind1 != LayoutKind::Table || kind2 != LayoutKind::Table {
        let max_facts = LINE_BUDGET - 4;
        rows = rows.min((max_facts / cols).max(1));
    }

    // shared fact set: distinct items crossed with period columns
    let mut item_pool: Vec<&'static str> = ITEM_WORDS.to_vec();
    for i in (1..item_pool.len()).rev() {
        let j = rng.gen_range(0..=i);
        item_pool.swap(i, j);
    }
    let items = &item_pool[..rows];
    let distractors = &item_pool[rows..];
    let headers = &HEADER_WORDS[..cols];

    // one value class per row: a currency row stays currency across all
    // periods, so sibling cells differ only by column position
    let mut facts = Vec::with_capacity(rows * cols);
    for item in items {
        let class = VALUE_CLASSES[rng.gen_range(0..VALUE_CLASSES.len())];
        for column in 0..cols {
            facts.push(Fact {
                item,
                column,
                class,
            });
        }
    }

    let order1: Vec<usize> = (0..rows).collect();
    let mut order2 = order1.clone();
    for i in (1..order2.len()).rev() {
        let j = rng.gen_range(0..=i);
        order2.swap(i, j);
    }

    let page1_id = format!("pair{pair_index:04}_page1");
    let page2_id = format!("pair{pair_index:04}_page2");
    let rendered1 = render_page(
        kind1, &page1_id, &facts, cols, headers, &order1, distractors, spec.noise,
        spec.hole_rate, &mut rng,
    );
    let rendered2 = render_page(
        kind2, &page2_id, &facts, cols, headers, &order2, distractors, spec.noise,
        spec.hole_rate, &mut rng,
    );

    let (_spans1, resolved1) = resolve_marks(&rendered1)?;
    let (_spans2, resolved2) = resolve_marks(&rendered2)?;

    let mut fact_to_span1 = vec![None; facts.len()];
    for (fact, _, span_id) in &resolved1 {
        if let Some(f) = fact {
            fact_to_span1[*f] = Some(*span_id);
        }
    }
    let mut fact_to_span2 = vec![None; facts.len()];
    for (fact, _, span_id) in &resolved2 {
        if let Some(f) = fact {
            fact_to_span2[*f] = Some(*span_id);
        }
    }
    let mut pairs = Vec::with_capacity(facts.len());
    for f in 0..facts.len() {
        match (fact_to_span1[f], fact_to_span2[f]) {
            (Some(a), Some(p)) => pairs.push((a, p)),
            _ if spec.hole_rate > 0.0 => {}
            _ => {
                return Err(SpanflowError::runtime(format!(
                    "fact {f} missing a value span on one page"
                )))
            }
        }
    }

    let grid_of = |rendered: &RenderedPage,
                   resolved: &[(Option<usize>, Option<(usize, usize)>, usize)]|
     -> Option<TableGrid> {
        if rendered.grid_rows == 0 {
            return None;
        }
        let mut cells = vec![vec![None; rendered.grid_cols]; rendered.grid_rows];
        for (_, pos, span_id) in resolved {
            if let Some((r, c)) = pos {
                cells[*r][*c] = Some(*span_id);
            }
        }
        Some(TableGrid {
            rows: rendered.grid_rows,
            cols: rendered.grid_cols,
            cell_span_ids: cells,
        })
    };
    let table1 = grid_of(&rendered1, &resolved1);
    let table2 = grid_of(&rendered2, &resolved2);

    Ok(GeneratedPair {
        pair_index,
        tokens1: rendered1.tokens,
        tokens2: rendered2.tokens,
        labels: LabeledPair {
            graph1_id: page1_id,
            graph2_id: page2_id,
            pairs,
        },
        layout1: kind1,
        layout2: kind2,
        table1,
        table2,
    })
}

/// A paragraph-only page: stacked filler lines in one column, no facts.
pub fn generate_paragraph_tokens(seed: u64, lines: usize) -> Vec<Token> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0x9a9a);
    let mut b = PageBuilder::new("paragraph", &mut rng);
    for i in 0..lines.min(LINE_BUDGET) {
        // a paragraph break every eight lines
        if i > 0 && i % 8 == 0 {
            b.next_line();
        }
        let count = rng.gen_range(5..9);
        let words: Vec<&str> = (0..count)
            .map(|_| FILLER_WORDS[rng.gen_range(0..FILLER_WORDS.len())])
            .collect();
        b.push_cell(&words, b.x_left, &mut rng);
        b.next_line();
    }
    b.tokens
}

/// In-memory corpus: generated pairs plus the layout-mix chi-square
/// statistic over all pages.
#[derive(Debug)]
pub struct CorpusData {
    pub spec: CorpusSpec,
    pub pairs: Vec<GeneratedPair>,
    pub chi_square: f64,
}

/// Manifest entry for one emitted pair; paths are relative to the corpus
/// directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestPair {
    pub tokens1: String,
    pub tokens2: String,
    pub labels: String,
    pub layout1: LayoutKind,
    pub layout2: LayoutKind,
    pub table1: Option<TableGrid>,
    pub table2: Option<TableGrid>,
    pub label_count: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub pairs: Vec<ManifestPair>,
    pub spec_echo: CorpusSpec,
    pub chi_square: f64,
}

/// Emit token JSONL, label JSON, and the manifest into a directory.
pub fn write_corpus(corpus: &CorpusData, dir: &std::path::Path) -> Result<Manifest> {
    use crate::io::{atomic_write, tokens_to_jsonl, LabelFile};
    let mut entries = Vec::with_capacity(corpus.pairs.len());
    for pair in &corpus.pairs {
        let idx = pair.pair_index;
        let tokens1 = format!("pair{idx:04}_page1.jsonl");
        let tokens2 = format!("pair{idx:04}_page2.jsonl");
        let labels = format!("pair{idx:04}_labels.json");
        atomic_write(&dir.join(&tokens1), tokens_to_jsonl(&pair.tokens1).as_bytes())?;
        atomic_write(&dir.join(&tokens2), tokens_to_jsonl(&pair.tokens2).as_bytes())?;
        let label_file = LabelFile {
            graph1: tokens1.clone(),
            graph2: tokens2.clone(),
            pairs: pair.labels.pairs.clone(),
        };
        let label_json = serde_json::to_string_pretty(&label_file)
            .map_err(|e| SpanflowError::runtime(format!("label serialization: {e}")))?;
        atomic_write(&dir.join(&labels), label_json.as_bytes())?;
        entries.push(ManifestPair {
            tokens1,
            tokens2,
            labels,
            layout1: pair.layout1,
            layout2: pair.layout2,
            table1: pair.table1.clone(),
            table2: pair.table2.clone(),
            label_count: pair.labels.pairs.len(),
        });
    }
    let manifest = Manifest {
        pairs: entries,
        spec_echo: corpus.spec.clone(),
        chi_square: corpus.chi_square,
    };
    let manifest_json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| SpanflowError::runtime(format!("manifest serialization: {e}")))?;
    atomic_write(&dir.join("manifest.json"), manifest_json.as_bytes())?;
    Ok(manifest)
}

pub fn generate_corpus(spec: &CorpusSpec) -> Result<CorpusData> {
    spec.validate()?;
    let pairs: Vec<GeneratedPair> = (0..spec.pages)
        .map(|i| generate_pair(spec, i))
        .collect::<Result<Vec<_>>>()?;

    let mut observed = [0usize; 3];
    for p in &pairs {
        for kind in [p.layout1, p.layout2] {
            observed[match kind {
                LayoutKind::Paragraph => 0,
                LayoutKind::List => 1,
                LayoutKind::Table => 2,
            }] += 1;
        }
    }
    let total_pages = (2 * spec.pages) as f64;
    let weights = [
        spec.layout_mix.paragraph,
        spec.layout_mix.list,
        spec.layout_mix.table,
    ];
    let weight_sum: f64 = weights.iter().sum();
    let mut chi_square = 0.0;
    for (obs, w) in observed.iter().zip(weights.iter()) {
        let expected = total_pages * w / weight_sum;
        if expected > 0.0 {
            let diff = *obs as f64 - expected;
            chi_square += diff * diff / expected;
        } else if *obs > 0 {
            chi_square = f64::INFINITY;
        }
    }
    Ok(CorpusData {
        spec: spec.clone(),
        pairs,
        chi_square,
    })
}
