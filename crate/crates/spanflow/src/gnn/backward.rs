//! Exact reverse-mode gradients through the cached forward pass.

use ndarray::{s, Array1, Array2};

use super::forward::{ForwardCache, GraphMasks, LayerCache, LnCache};
use super::{AttentionMode, EncoderLayer, EncoderStack, ModelConfig};
use crate::error::{Result, SpanflowError};

/// Gradients mirror the parameter layout exactly.
pub type StackGrads = EncoderStack;

/// d(loss)/d(input) of a layer-norm given d(loss)/d(output) and the cache.
fn layer_norm_backward(
    dy: &Array2<f64>,
    cache: &LnCache,
    gamma: &Array1<f64>,
    dgamma: &mut Array1<f64>,
    dbeta: &mut Array1<f64>,
) -> Array2<f64> {
    let (n, d) = dy.dim();
    let mut dx = Array2::zeros((n, d));
    for i in 0..n {
        let mut mean_dxhat = 0.0;
        let mut mean_dxhat_xhat = 0.0;
        for j in 0..d {
            let g = dy[[i, j]];
            dgamma[j] += g * cache.xhat[[i, j]];
            dbeta[j] += g;
            let dxhat = g * gamma[j];
            mean_dxhat += dxhat;
            mean_dxhat_xhat += dxhat * cache.xhat[[i, j]];
        }
        mean_dxhat /= d as f64;
        mean_dxhat_xhat /= d as f64;
        let inv_sigma = 1.0 / cache.sigma[i];
        for j in 0..d {
            let dxhat = dy[[i, j]] * gamma[j];
            dx[[i, j]] =
                inv_sigma * (dxhat - mean_dxhat - cache.xhat[[i, j]] * mean_dxhat_xhat);
        }
    }
    dx
}

fn layer_backward(
    cache: &LayerCache,
    masks: &GraphMasks,
    layer: &EncoderLayer,
    grads: &mut EncoderLayer,
    config: &ModelConfig,
    d_out: &Array2<f64>,
) -> Array2<f64> {
    let n = d_out.nrows();
    let d = config.d;
    let heads = config.heads;
    let dh = config.head_dim();

    // x_next = LN2(y + ff(y))
    let d_r2 = layer_norm_backward(
        d_out,
        &cache.ln2,
        &layer.ln2_gamma,
        &mut grads.ln2_gamma,
        &mut grads.ln2_beta,
    );
    let mut d_y = d_r2.clone();
    let d_f = d_r2;

    // ff(y) = relu(y w1 + b1) w2 + b2
    let relu = cache.u.mapv(|v| v.max(0.0));
    grads.w2 += &relu.t().dot(&d_f);
    for j in 0..d {
        grads.b2[j] += d_f.column(j).sum();
    }
    let d_relu = d_f.dot(&layer.w2.t());
    let mut d_u = d_relu;
    for (du, u) in d_u.iter_mut().zip(cache.u.iter()) {
        if *u <= 0.0 {
            *du = 0.0;
        }
    }
    grads.w1 += &cache.y.t().dot(&d_u);
    for j in 0..config.d_ff() {
        grads.b1[j] += d_u.column(j).sum();
    }
    d_y += &d_u.dot(&layer.w1.t());

    // y = LN1(x + heads_out wo)
    let d_r1 = layer_norm_backward(
        &d_y,
        &cache.ln1,
        &layer.ln1_gamma,
        &mut grads.ln1_gamma,
        &mut grads.ln1_beta,
    );
    let mut d_x = d_r1.clone();
    let d_attn_out = d_r1;

    grads.wo += &cache.heads_out.t().dot(&d_attn_out);
    let d_heads = d_attn_out.dot(&layer.wo.t());

    let mut d_q = Array2::<f64>::zeros((n, d));
    let mut d_k = Array2::<f64>::zeros((n, d));
    let mut d_v = Array2::<f64>::zeros((n, d));

    for h in 0..heads {
        let cols = s![.., h * dh..(h + 1) * dh];
        let qh = cache.q.slice(cols);
        let kh = cache.k.slice(cols);
        let vh = cache.v.slice(cols);
        let d_oh = d_heads.slice(cols);
        let alpha = &cache.alpha[h];

        // o_h = (alpha .* z) vh
        let mut az = alpha.clone();
        for i in 0..n {
            for j in 0..n {
                if masks.value[[i, j]] == 0 {
                    az[[i, j]] = 0.0;
                }
            }
        }
        let mut d_alpha = d_oh.dot(&vh.t());
        for i in 0..n {
            for j in 0..n {
                if masks.value[[i, j]] == 0 {
                    d_alpha[[i, j]] = 0.0;
                }
            }
        }
        d_v.slice_mut(cols).assign(&az.t().dot(&d_oh));

        let d_scores = match config.attention_mode {
            AttentionMode::Softmax => {
                let mut ds = Array2::<f64>::zeros((n, n));
                for i in 0..n {
                    let mut t = 0.0;
                    for j in 0..n {
                        t += alpha[[i, j]] * d_alpha[[i, j]];
                    }
                    for j in 0..n {
                        ds[[i, j]] = alpha[[i, j]] * (d_alpha[[i, j]] - t);
                    }
                }
                let scale = 1.0 / (dh as f64).sqrt();
                ds *= scale;
                ds
            }
            AttentionMode::LiteralEq2 => {
                let (scores, denoms) = &cache.literal.as_ref().unwrap()[h];
                let c = 1.0 / (d as f64).sqrt();
                let mut ds = Array2::<f64>::zeros((n, n));
                for i in 0..n {
                    let denom = denoms[i];
                    let mut t = 0.0;
                    for j in 0..n {
                        if masks.attn[[i, j]] == 1 {
                            t += d_alpha[[i, j]] * scores[[i, j]];
                        }
                    }
                    for j in 0..n {
                        if masks.attn[[i, j]] == 1 {
                            ds[[i, j]] = c * (d_alpha[[i, j]] * denom - t) / (denom * denom);
                        }
                    }
                }
                ds
            }
        };

        d_q.slice_mut(cols).assign(&d_scores.dot(&kh));
        d_k.slice_mut(cols).assign(&d_scores.t().dot(&qh));
    }

    grads.wq += &cache.x.t().dot(&d_q);
    grads.wk += &cache.x.t().dot(&d_k);
    grads.wv += &cache.x.t().dot(&d_v);
    d_x += &d_q.dot(&layer.wq.t());
    d_x += &d_k.dot(&layer.wk.t());
    d_x += &d_v.dot(&layer.wv.t());
    d_x
}

/// Backpropagate a loss gradient on the output embeddings through the whole
/// stack. Returns parameter gradients and the gradient on the input
/// features.
pub fn backward(
    cache: &ForwardCache,
    masks: &GraphMasks,
    stack: &EncoderStack,
    config: &ModelConfig,
    loss_grad: &Array2<f64>,
) -> Result<(StackGrads, Array2<f64>)> {
    if loss_grad.dim() != cache.output.dim() {
        return Err(SpanflowError::validation(format!(
            "loss gradient shape {:?} does not match output {:?}",
            loss_grad.dim(),
            cache.output.dim()
        )));
    }
    if cache.layers.len() != stack.layers.len() {
        return Err(SpanflowError::validation(
            "forward cache does not match the encoder stack",
        ));
    }
    let mut grads = EncoderStack::zeros(config);
    let mut upstream = loss_grad.clone();
    for (idx, layer) in stack.layers.iter().enumerate().rev() {
        upstream = layer_backward(
            &cache.layers[idx],
            masks,
            layer,
            &mut grads.layers[idx],
            config,
            &upstream,
        );
    }
    Ok((grads, upstream))
}
