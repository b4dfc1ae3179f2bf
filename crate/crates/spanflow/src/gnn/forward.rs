//! Forward pass with state caching for reverse mode.

use ndarray::{s, Array1, Array2};

use super::{AttentionMode, AttentionTensor, EncoderLayer, EncoderStack, ModelConfig};
use crate::error::{Result, SpanflowError};
use crate::pagegraph::{expand_neighborhood, value_support, PageGraph};

pub(crate) const LN_EPS: f64 = 1e-9;
const DEGENERATE_LIMIT: f64 = 1e-12;

/// Attention support and value-pathway support for one graph at one
/// configuration.
#[derive(Debug, Clone)]
pub struct GraphMasks {
    /// Order-x adjacency: which keys each query may attend to.
    pub attn: Array2<u8>,
    /// Which neighbors may contribute value content.
    pub value: Array2<u8>,
}

pub fn build_masks(g: &PageGraph, config: &ModelConfig) -> Result<GraphMasks> {
    config.validate()?;
    let attn = expand_neighborhood(g, config.order, config.rule)?;
    let value = if config.regularization_active() {
        value_support(g)
    } else {
        attn.clone()
    };
    Ok(GraphMasks { attn, value })
}

/// Layer-normalization cache: normalized rows and per-row sigma.
#[derive(Debug, Clone)]
pub(crate) struct LnCache {
    pub xhat: Array2<f64>,
    pub sigma: Array1<f64>,
}

pub(crate) fn layer_norm(
    x: &Array2<f64>,
    gamma: &Array1<f64>,
    beta: &Array1<f64>,
) -> (Array2<f64>, LnCache) {
    let (n, d) = x.dim();
    let mut xhat = Array2::zeros((n, d));
    let mut sigma = Array1::zeros(n);
    let mut out = Array2::zeros((n, d));
    for i in 0..n {
        let row = x.row(i);
        let mu = row.mean().unwrap();
        let var = row.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / d as f64;
        let sd = (var + LN_EPS).sqrt();
        sigma[i] = sd;
        for j in 0..d {
            let h = (x[[i, j]] - mu) / sd;
            xhat[[i, j]] = h;
            out[[i, j]] = gamma[j] * h + beta[j];
        }
    }
    (out, LnCache { xhat, sigma })
}

/// Everything one layer's backward pass needs.
#[derive(Debug, Clone)]
pub(crate) struct LayerCache {
    pub x: Array2<f64>,
    pub q: Array2<f64>,
    pub k: Array2<f64>,
    pub v: Array2<f64>,
    /// Per head: attention coefficients.
    pub alpha: Vec<Array2<f64>>,
    /// Per head, literal mode only: raw masked scores and row denominators.
    pub literal: Option<Vec<(Array2<f64>, Array1<f64>)>>,
    /// Concatenated head outputs before the output projection.
    pub heads_out: Array2<f64>,
    pub ln1: LnCache,
    /// LN1 output, input of the feed-forward block.
    pub y: Array2<f64>,
    /// Pre-activation of the feed-forward hidden layer.
    pub u: Array2<f64>,
    pub ln2: LnCache,
}

pub(crate) fn attention_layer_cached(
    x: &Array2<f64>,
    masks: &GraphMasks,
    layer: &EncoderLayer,
    config: &ModelConfig,
) -> Result<(Array2<f64>, LayerCache)> {
    attention_core(x, x, masks, layer, config)
}

fn attention_core(
    x: &Array2<f64>,
    x_value: &Array2<f64>,
    masks: &GraphMasks,
    layer: &EncoderLayer,
    config: &ModelConfig,
) -> Result<(Array2<f64>, LayerCache)> {
    let n = x.nrows();
    let d = config.d;
    let heads = config.heads;
    let dh = config.head_dim();

    let q = x.dot(&layer.wq);
    let k = x.dot(&layer.wk);
    let v = x_value.dot(&layer.wv);

    let mut alpha: Vec<Array2<f64>> = Vec::with_capacity(heads);
    let mut literal: Option<Vec<(Array2<f64>, Array1<f64>)>> = match config.attention_mode {
        AttentionMode::LiteralEq2 => Some(Vec::with_capacity(heads)),
        AttentionMode::Softmax => None,
    };
    let mut heads_out = Array2::<f64>::zeros((n, d));

    for h in 0..heads {
        let cols = s![.., h * dh..(h + 1) * dh];
        let qh = q.slice(cols);
        let kh = k.slice(cols);
        let vh = v.slice(cols);

        // raw dot-product scores over the attention support
        let mut scores = qh.dot(&kh.t());
        let mut a = Array2::<f64>::zeros((n, n));
        match config.attention_mode {
            AttentionMode::Softmax => {
                let scale = 1.0 / (dh as f64).sqrt();
                scores *= scale;
                for i in 0..n {
                    let mut max = f64::NEG_INFINITY;
                    for j in 0..n {
                        if masks.attn[[i, j]] == 1 && scores[[i, j]] > max {
                            max = scores[[i, j]];
                        }
                    }
                    let mut sum = 0.0;
                    for j in 0..n {
                        if masks.attn[[i, j]] == 1 {
                            let e = (scores[[i, j]] - max).exp();
                            a[[i, j]] = e;
                            sum += e;
                        }
                    }
                    for j in 0..n {
                        a[[i, j]] /= sum;
                    }
                }
            }
            AttentionMode::LiteralEq2 => {
                let c = 1.0 / (d as f64).sqrt();
                let mut denoms = Array1::<f64>::zeros(n);
                for i in 0..n {
                    let mut denom = 0.0;
                    for j in 0..n {
                        if masks.attn[[i, j]] == 1 {
                            denom += scores[[i, j]];
                        }
                    }
                    if denom.abs() < DEGENERATE_LIMIT {
                        return Err(SpanflowError::DegenerateAttentionRow {
                            vertex: i,
                            limit: DEGENERATE_LIMIT,
                        });
                    }
                    denoms[i] = denom;
                    for j in 0..n {
                        if masks.attn[[i, j]] == 1 {
                            a[[i, j]] = c * scores[[i, j]] / denom;
                        }
                    }
                }
                literal.as_mut().unwrap().push((scores.clone(), denoms));
            }
        }

        // aggregate values over the value support only: distant vertices
        // keep their keys but contribute zero content
        let mut az = a.clone();
        for i in 0..n {
            for j in 0..n {
                if masks.value[[i, j]] == 0 {
                    az[[i, j]] = 0.0;
                }
            }
        }
        let out_h = az.dot(&vh);
        heads_out.slice_mut(cols).assign(&out_h);
        alpha.push(a);
    }

    let attn_out = heads_out.dot(&layer.wo);
    let r1 = x + &attn_out;
    let (y, ln1) = layer_norm(&r1, &layer.ln1_gamma, &layer.ln1_beta);

    let u = y.dot(&layer.w1) + &layer.b1;
    let relu = u.mapv(|v| v.max(0.0));
    let f = relu.dot(&layer.w2) + &layer.b2;
    let r2 = &y + &f;
    let (out, ln2) = layer_norm(&r2, &layer.ln2_gamma, &layer.ln2_beta);

    Ok((
        out,
        LayerCache {
            x: x.clone(),
            q,
            k,
            v,
            alpha,
            literal,
            heads_out,
            ln1,
            y,
            u,
            ln2,
        },
    ))
}

/// One encoder layer applied to vertex features. Returns the transformed
/// features and the per-head attention coefficients.
pub fn attention_layer(
    feats: &Array2<f64>,
    masks: &GraphMasks,
    layer: &EncoderLayer,
    config: &ModelConfig,
) -> Result<(Array2<f64>, Vec<Array2<f64>>)> {
    let (out, cache) = attention_layer_cached(feats, masks, layer, config)?;
    Ok((out, cache.alpha))
}

/// Mechanism probe: evaluate one layer with the value pathway fed from a
/// separate source while queries and keys stay on `feats`. Used to verify
/// that vertices outside the value support contribute keys but no content.
pub fn attention_layer_probe(
    feats: &Array2<f64>,
    value_source: &Array2<f64>,
    masks: &GraphMasks,
    layer: &EncoderLayer,
    config: &ModelConfig,
) -> Result<(Array2<f64>, Vec<Array2<f64>>)> {
    if value_source.dim() != feats.dim() {
        return Err(SpanflowError::validation(
            "value source must match the feature shape",
        ));
    }
    let (out, cache) = attention_core(feats, value_source, masks, layer, config)?;
    Ok((out, cache.alpha))
}

/// Full forward state, kept for the backward pass and rollout.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub(crate) layers: Vec<LayerCache>,
    pub output: Array2<f64>,
}

impl ForwardCache {
    pub fn attention(&self) -> AttentionTensor {
        AttentionTensor {
            maps: self.layers.iter().map(|l| l.alpha.clone()).collect(),
        }
    }
}

pub fn forward_cached(
    feats: &Array2<f64>,
    masks: &GraphMasks,
    stack: &EncoderStack,
    config: &ModelConfig,
) -> Result<ForwardCache> {
    config.validate()?;
    if !stack.check_shape(config) {
        return Err(SpanflowError::validation(
            "encoder stack shapes do not match the model config",
        ));
    }
    if feats.iter().any(|v| !v.is_finite()) {
        return Err(SpanflowError::validation("non-finite input features"));
    }
    if feats.ncols() != config.d {
        return Err(SpanflowError::validation(format!(
            "features have dimension {}, config expects {}",
            feats.ncols(),
            config.d
        )));
    }
    let n = feats.nrows();
    if masks.attn.dim() != (n, n) {
        return Err(SpanflowError::validation(
            "mask size does not match feature count",
        ));
    }

    let mut layers = Vec::with_capacity(stack.layers.len());
    let mut x = feats.clone();
    for layer in &stack.layers {
        let (next, cache) = attention_layer_cached(&x, masks, layer, config)?;
        layers.push(cache);
        x = next;
    }
    Ok(ForwardCache { layers, output: x })
}

/// Embed all vertices of a graph: the spec-level entry point. Builds masks
/// from the graph, runs the stack, and returns embeddings plus the captured
/// attention maps.
pub fn forward(
    g: &PageGraph,
    feats: &Array2<f64>,
    stack: &EncoderStack,
    config: &ModelConfig,
) -> Result<(Array2<f64>, AttentionTensor)> {
    if feats.nrows() != g.len() {
        return Err(SpanflowError::validation(format!(
            "{} feature rows for {} vertices",
            feats.nrows(),
            g.len()
        )));
    }
    let masks = build_masks(g, config)?;
    let cache = forward_cached(feats, &masks, stack, config)?;
    let attention = cache.attention();
    Ok((cache.output, attention))
}
