//! Attention rollout: layer-wise product of identity-augmented,
//! row-normalized attention maps.

use ndarray::Array2;

use super::AttentionTensor;
use crate::error::{Result, SpanflowError};

/// Collapse captured attention into an N x N attribution map. Per layer the
/// heads are averaged, the identity added, and rows renormalized to sum 1;
/// the rollout is the product of these maps from first to last layer. Row i
/// attributes output vertex i over the input vertices.
pub fn rollout(attn: &AttentionTensor) -> Result<Array2<f64>> {
    let first = attn
        .maps
        .first()
        .ok_or_else(|| SpanflowError::validation("rollout needs at least one layer"))?;
    if first.is_empty() {
        return Err(SpanflowError::validation("rollout needs at least one head"));
    }
    let n = first[0].nrows();

    let mut acc: Option<Array2<f64>> = None;
    for layer in &attn.maps {
        let mut mean = Array2::<f64>::zeros((n, n));
        for head in layer {
            mean += head;
        }
        mean /= layer.len() as f64;
        for i in 0..n {
            mean[[i, i]] += 1.0;
            let sum: f64 = mean.row(i).sum();
            if sum != 0.0 {
                mean.row_mut(i).mapv_inplace(|v| v / sum);
            }
        }
        acc = Some(match acc {
            None => mean,
            Some(prev) => mean.dot(&prev),
        });
    }
    Ok(acc.unwrap())
}
