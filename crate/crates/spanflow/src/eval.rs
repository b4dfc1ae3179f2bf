//! Embedding evaluation: pair retrieval, compositionality, reports.

use std::collections::BTreeMap;

use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SpanflowError};

/// Euclidean distances from an anchor to every target row, in target order.
pub fn distance_vector(anchor: ArrayView1<f64>, targets: &Array2<f64>) -> Result<Vec<f64>> {
    if targets.nrows() == 0 {
        return Err(SpanflowError::validation("empty target set"));
    }
    if targets.ncols() != anchor.len() {
        return Err(SpanflowError::validation(format!(
            "anchor dimension {} does not match targets {}",
            anchor.len(),
            targets.ncols()
        )));
    }
    Ok(targets
        .rows()
        .into_iter()
        .map(|row| (&anchor - &row).mapv(|v| v * v).sum().sqrt())
        .collect())
}

/// Number of candidates ranked ahead of `true_index`, ties broken toward the
/// lower index. A top-k hit is `rank < k`.
pub fn retrieval_rank(distances: &[f64], true_index: usize) -> usize {
    let d_true = distances[true_index];
    distances
        .iter()
        .enumerate()
        .filter(|&(j, &d)| j != true_index && (d < d_true || (d == d_true && j < true_index)))
        .count()
}

/// Embeddings of one page pair plus its labeled vertex pairs.
#[derive(Debug, Clone)]
pub struct PairEmbeddings {
    pub emb1: Array2<f64>,
    pub emb2: Array2<f64>,
    /// (vertex in page 1, vertex in page 2)
    pub pairs: Vec<(usize, usize)>,
}

/// Fraction of labeled vertices whose counterpart ranks within the top k of
/// the paired page, both directions counted.
pub fn pairing_score(corpus: &[PairEmbeddings], k: usize) -> Result<f64> {
    let mut labeled = 0usize;
    let mut hits = 0usize;
    for pair in corpus {
        for &(a, p) in &pair.pairs {
            let forward = distance_vector(pair.emb1.row(a), &pair.emb2)?;
            if retrieval_rank(&forward, p) < k {
                hits += 1;
            }
            let backward = distance_vector(pair.emb2.row(p), &pair.emb1)?;
            if retrieval_rank(&backward, a) < k {
                hits += 1;
            }
            labeled += 2;
        }
    }
    if labeled == 0 {
        return Err(SpanflowError::validation(
            "pairing score needs at least one labeled vertex",
        ));
    }
    Ok(hits as f64 / labeled as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompositionalityResult {
    pub successes: usize,
    pub applications: usize,
    pub rate: f64,
}

/// Analogy test over one table grid: for every column pair k < l, source row
/// i, and target row j, the offset v_l,i - v_k,i applied to v_k,j must land
/// nearest to v_l,j among all cells of the grid.
pub fn compositionality_rate(grid: &[Vec<Array1<f64>>]) -> Result<CompositionalityResult> {
    let rows = grid.len();
    if rows == 0 {
        return Err(SpanflowError::validation("empty table grid"));
    }
    let cols = grid[0].len();
    if cols < 2 {
        return Err(SpanflowError::validation("grid needs at least two columns"));
    }
    if grid.iter().any(|r| r.len() != cols) {
        return Err(SpanflowError::validation("incomplete table grid"));
    }
    let d = grid[0][0].len();
    if grid.iter().flatten().any(|v| v.len() != d) {
        return Err(SpanflowError::validation("inconsistent embedding dimensions"));
    }

    let cells: Vec<(usize, usize)> = (0..rows)
        .flat_map(|r| (0..cols).map(move |c| (r, c)))
        .collect();

    let mut successes = 0usize;
    let mut applications = 0usize;
    for k in 0..cols {
        for l in (k + 1)..cols {
            for i in 0..rows {
                let offset = &grid[i][l] - &grid[i][k];
                for j in 0..rows {
                    let query = &offset + &grid[j][k];
                    let mut best = (f64::INFINITY, (usize::MAX, usize::MAX));
                    for &(r, c) in &cells {
                        let dist = (&query - &grid[r][c]).mapv(|v| v * v).sum().sqrt();
                        if dist < best.0 {
                            best = (dist, (r, c));
                        }
                    }
                    if best.1 == (j, l) {
                        successes += 1;
                    }
                    applications += 1;
                }
            }
        }
    }
    Ok(CompositionalityResult {
        successes,
        applications,
        rate: successes as f64 / applications as f64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportCounts {
    pub labeled_vertices: usize,
    pub equation_applications: usize,
}

/// The evaluation report; serialized with canonically sorted keys so that
/// parse -> re-serialize is byte-identical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub version: u32,
    /// k -> fraction of labeled vertices recovered within the top k.
    pub top_k_accuracy: BTreeMap<usize, f64>,
    /// table value-column count -> top-1 rate over anchors from such tables
    pub per_table_accuracy: BTreeMap<usize, f64>,
    pub compositionality_rate: Option<f64>,
    pub counts: ReportCounts,
}

impl EvalReport {
    pub fn validate(&self) -> Result<()> {
        let in_unit = |v: f64| (0.0..=1.0).contains(&v);
        if !self.top_k_accuracy.values().all(|&v| in_unit(v))
            || !self.per_table_accuracy.values().all(|&v| in_unit(v))
            || !self.compositionality_rate.map_or(true, in_unit)
        {
            return Err(SpanflowError::validation("report rates must lie in [0, 1]"));
        }
        let mut prev = 0.0;
        for (_, &rate) in self.top_k_accuracy.iter() {
            if rate + 1e-12 < prev {
                return Err(SpanflowError::validation(
                    "top-k accuracy must be monotone in k",
                ));
            }
            prev = rate;
        }
        Ok(())
    }

    /// Canonical JSON text: keys sorted, pretty-printed.
    pub fn to_json_string(&self) -> Result<String> {
        let value = serde_json::to_value(self)
            .map_err(|e| SpanflowError::runtime(format!("report serialization: {e}")))?;
        serde_json::to_string_pretty(&value)
            .map_err(|e| SpanflowError::runtime(format!("report serialization: {e}")))
    }
}

/// One row of the embedding export.
#[derive(Debug, Clone)]
pub struct EmbeddingRow {
    pub span_id: usize,
    pub page_id: String,
    pub values: Vec<f64>,
}

/// CSV with a mandatory header: span_id, page_id, then one column per
/// embedding coordinate.
pub fn embeddings_csv(rows: &[EmbeddingRow], d: usize) -> String {
    let mut out = String::from("span_id,page_id");
    for i in 0..d {
        out.push_str(&format!(",e{i}"));
    }
    out.push('\n');
    for row in rows {
        out.push_str(&format!("{},{}", row.span_id, row.page_id));
        for v in &row.values {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    out
}
