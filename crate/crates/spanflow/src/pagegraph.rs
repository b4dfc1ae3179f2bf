//! The directed reading-pattern graph over spans.
//!
//! Each span gets up to four outgoing edges, one per eye movement
//! (up, down, left, right), pointing at the closest span in that direction
//! with positive overlap on the perpendicular axis. Hop matrices record the
//! net vertical/horizontal hop displacement between every reachable pair,
//! which higher-order neighborhoods and the value-zeroing mask are built
//! from.

use std::collections::VecDeque;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SpanflowError};
use crate::layout::Span;

/// Sentinel for "no axis path" in dense hop matrices. Sparse exports simply
/// omit these entries.
pub const UNREACHABLE: i32 = i32::MIN;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Up = 0,
    Down = 1,
    Left = 2,
    Right = 3,
}

/// Fixed BFS expansion order; also the order used for tie-free determinism.
pub const DIRECTIONS: [Direction; 4] = [
    Direction::Up,
    Direction::Down,
    Direction::Left,
    Direction::Right,
];

impl Direction {
    /// (vertical, horizontal) hop displacement carried by an edge.
    pub fn displacement(self) -> (i32, i32) {
        match self {
            Direction::Up => (-1, 0),
            Direction::Down => (1, 0),
            Direction::Left => (0, -1),
            Direction::Right => (0, 1),
        }
    }
}

/// How the order-x neighborhood condition combines the two axis hops.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeighborhoodRule {
    /// Both |P_vert| <= x and |P_hor| <= x. Default.
    And,
    /// Either |P_vert| <= x or |P_hor| <= x; kept for comparison runs.
    Or,
}

impl Default for NeighborhoodRule {
    fn default() -> Self {
        NeighborhoodRule::And
    }
}

impl std::str::FromStr for NeighborhoodRule {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "and" => Ok(NeighborhoodRule::And),
            "or" => Ok(NeighborhoodRule::Or),
            other => Err(format!("unknown neighborhood rule {other:?}; expected and or or")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PageGraph {
    /// Vertex id == index into this list.
    pub spans: Vec<Span>,
    /// Outgoing directional neighbor per vertex, indexed by `Direction`.
    pub direction_edges: Vec<[Option<usize>; 4]>,
    /// Order-1 adjacency with self loops.
    pub adjacency: Array2<u8>,
    pub p_vert: Array2<i32>,
    pub p_hor: Array2<i32>,
}

fn overlap(a0: f64, a1: f64, b0: f64, b1: f64) -> f64 {
    a1.min(b1) - a0.max(b0)
}

/// Find each span's nearest neighbor per direction and assemble the order-1
/// graph, including hop matrices.
pub fn build_edges(spans: Vec<Span>) -> Result<PageGraph> {
    if spans.is_empty() {
        return Err(SpanflowError::validation("cannot build a graph without spans"));
    }
    {
        let mut ids: Vec<usize> = spans.iter().map(|s| s.span_id).collect();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() != spans.len() {
            return Err(SpanflowError::validation("span ids must be unique"));
        }
    }

    let n = spans.len();
    let mut direction_edges = vec![[None; 4]; n];
    for i in 0..n {
        let a = &spans[i];
        for dir in DIRECTIONS {
            let mut best: Option<(f64, usize)> = None;
            for (j, b) in spans.iter().enumerate() {
                if j == i {
                    continue;
                }
                let (gap, perp) = match dir {
                    Direction::Up => (a.y0 - b.y1, overlap(a.x0, a.x1, b.x0, b.x1)),
                    Direction::Down => (b.y0 - a.y1, overlap(a.x0, a.x1, b.x0, b.x1)),
                    Direction::Left => (a.x0 - b.x1, overlap(a.y0, a.y1, b.y0, b.y1)),
                    Direction::Right => (b.x0 - a.x1, overlap(a.y0, a.y1, b.y0, b.y1)),
                };
                if gap <= 0.0 || perp <= 0.0 {
                    continue;
                }
                let better = match best {
                    None => true,
                    Some((bg, bj)) => {
                        gap < bg || (gap == bg && spans[j].span_id < spans[bj].span_id)
                    }
                };
                if better {
                    best = Some((gap, j));
                }
            }
            direction_edges[i][dir as usize] = best.map(|(_, j)| j);
        }
    }

    let mut adjacency = Array2::<u8>::zeros((n, n));
    for i in 0..n {
        adjacency[[i, i]] = 1;
        for target in direction_edges[i].iter().flatten() {
            adjacency[[i, *target]] = 1;
        }
    }

    let (p_vert, p_hor) = hop_matrices_from_edges(&direction_edges);
    Ok(PageGraph {
        spans,
        direction_edges,
        adjacency,
        p_vert,
        p_hor,
    })
}

/// BFS from every vertex over directional edges, recording the net
/// displacement of the first shortest path found (expansion order up, down,
/// left, right).
pub fn hop_matrices_from_edges(direction_edges: &[[Option<usize>; 4]]) -> (Array2<i32>, Array2<i32>) {
    let n = direction_edges.len();
    let mut p_vert = Array2::from_elem((n, n), UNREACHABLE);
    let mut p_hor = Array2::from_elem((n, n), UNREACHABLE);

    for src in 0..n {
        p_vert[[src, src]] = 0;
        p_hor[[src, src]] = 0;
        let mut queue = VecDeque::new();
        queue.push_back(src);
        while let Some(cur) = queue.pop_front() {
            let (cv, ch) = (p_vert[[src, cur]], p_hor[[src, cur]]);
            for dir in DIRECTIONS {
                if let Some(next) = direction_edges[cur][dir as usize] {
                    if p_vert[[src, next]] != UNREACHABLE || next == src {
                        continue;
                    }
                    let (dv, dh) = dir.displacement();
                    p_vert[[src, next]] = cv + dv;
                    p_hor[[src, next]] = ch + dh;
                    queue.push_back(next);
                }
            }
        }
    }
    (p_vert, p_hor)
}

/// Hop matrices of an already-built graph.
pub fn hop_matrices(g: &PageGraph) -> (Array2<i32>, Array2<i32>) {
    hop_matrices_from_edges(&g.direction_edges)
}

impl PageGraph {
    pub fn len(&self) -> usize {
        self.spans.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spans.is_empty()
    }

    /// Net hop displacement from i to j, if any path exists.
    pub fn hop(&self, i: usize, j: usize) -> Option<(i32, i32)> {
        let v = self.p_vert[[i, j]];
        if v == UNREACHABLE {
            None
        } else {
            Some((v, self.p_hor[[i, j]]))
        }
    }
}

/// Expand the neighborhood to order `x`.
///
/// Order 1 is the directional five-vertex neighborhood itself. For x >= 2
/// the adjacency is a ball in hop space: both axis hops within x under the
/// default `And` rule, either axis within x under the literal `Or` rule.
pub fn expand_neighborhood(g: &PageGraph, x: u32, rule: NeighborhoodRule) -> Result<Array2<u8>> {
    if x < 1 {
        return Err(SpanflowError::validation("neighborhood order must be >= 1"));
    }
    if x == 1 && rule == NeighborhoodRule::And {
        return Ok(g.adjacency.clone());
    }
    let n = g.len();
    let mut a = Array2::<u8>::zeros((n, n));
    let xi = x as i32;
    for i in 0..n {
        for j in 0..n {
            let (v, h) = match g.hop(i, j) {
                Some(p) => p,
                None => continue,
            };
            let inside = match rule {
                NeighborhoodRule::And => v.abs() <= xi && h.abs() <= xi,
                NeighborhoodRule::Or => v.abs() <= xi || h.abs() <= xi,
            };
            if inside {
                a[[i, j]] = 1;
            }
        }
    }
    Ok(a)
}

/// Value-pathway support for the order-x regularization: pairs whose hop
/// displacement has Euclidean norm <= 1, i.e. self plus the four direct
/// displacements.
pub fn value_support(g: &PageGraph) -> Array2<u8> {
    let n = g.len();
    let mut z = Array2::<u8>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            if let Some((v, h)) = g.hop(i, j) {
                if v * v + h * h <= 1 {
                    z[[i, j]] = 1;
                }
            }
        }
    }
    z
}

/// Bind two graphs into one block-diagonal input graph. No edges connect the
/// blocks; cross-block hops stay unreachable.
pub fn bind_pair(g1: &PageGraph, g2: &PageGraph) -> PageGraph {
    let n1 = g1.len();
    let n2 = g2.len();
    let n = n1 + n2;

    let mut spans = g1.spans.clone();
    spans.extend(g2.spans.iter().cloned());

    let mut direction_edges = g1.direction_edges.clone();
    direction_edges.extend(g2.direction_edges.iter().map(|dirs| {
        let mut shifted = [None; 4];
        for (d, t) in dirs.iter().enumerate() {
            shifted[d] = t.map(|j| j + n1);
        }
        shifted
    }));

    let mut adjacency = Array2::<u8>::zeros((n, n));
    let mut p_vert = Array2::from_elem((n, n), UNREACHABLE);
    let mut p_hor = Array2::from_elem((n, n), UNREACHABLE);
    for i in 0..n1 {
        for j in 0..n1 {
            adjacency[[i, j]] = g1.adjacency[[i, j]];
            p_vert[[i, j]] = g1.p_vert[[i, j]];
            p_hor[[i, j]] = g1.p_hor[[i, j]];
        }
    }
    for i in 0..n2 {
        for j in 0..n2 {
            adjacency[[n1 + i, n1 + j]] = g2.adjacency[[i, j]];
            p_vert[[n1 + i, n1 + j]] = g2.p_vert[[i, j]];
            p_hor[[n1 + i, n1 + j]] = g2.p_hor[[i, j]];
        }
    }

    PageGraph {
        spans,
        direction_edges,
        adjacency,
        p_vert,
        p_hor,
    }
}

/// Serializable graph export: directional edges plus sparse hop triplets.
#[derive(Debug, Serialize, Deserialize)]
pub struct GraphExport {
    pub vertices: Vec<VertexExport>,
    pub edges: Vec<(usize, usize)>,
    pub p_vert: Vec<(usize, usize, i32)>,
    pub p_hor: Vec<(usize, usize, i32)>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct VertexExport {
    pub page_id: String,
    pub span_id: usize,
    pub text: String,
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl GraphExport {
    pub fn from_graph(g: &PageGraph) -> GraphExport {
        let vertices = g
            .spans
            .iter()
            .map(|s| VertexExport {
                page_id: s.page_id.clone(),
                span_id: s.span_id,
                text: s.text(),
                x0: s.x0,
                y0: s.y0,
                x1: s.x1,
                y1: s.y1,
            })
            .collect();
        let mut edges = Vec::new();
        for (i, dirs) in g.direction_edges.iter().enumerate() {
            for target in dirs.iter().flatten() {
                edges.push((i, *target));
            }
        }
        edges.sort_unstable();
        edges.dedup();
        let mut p_vert = Vec::new();
        let mut p_hor = Vec::new();
        let n = g.len();
        for i in 0..n {
            for j in 0..n {
                if g.p_vert[[i, j]] != UNREACHABLE {
                    p_vert.push((i, j, g.p_vert[[i, j]]));
                    p_hor.push((i, j, g.p_hor[[i, j]]));
                }
            }
        }
        GraphExport {
            vertices,
            edges,
            p_vert,
            p_hor,
        }
    }
}
