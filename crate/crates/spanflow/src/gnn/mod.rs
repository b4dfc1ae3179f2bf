//! The masked graph-transformer encoder.
//!
//! Each layer runs multi-head attention restricted to the order-x
//! neighborhood of the page graph, with the value pathway of vertices beyond
//! hop radius 1 zeroed when the regularized configuration is active: distant
//! vertices absorb attention mass through their keys but contribute no
//! content. Forward passes cache enough state for exact reverse-mode
//! gradients, and per-layer attention maps are retained for rollout.

mod backward;
mod forward;
mod params;
mod rollout;

pub use backward::{backward, StackGrads};
pub use forward::{
    attention_layer, attention_layer_probe, build_masks, forward, forward_cached, ForwardCache,
    GraphMasks,
};
pub use params::{EncoderLayer, EncoderStack};
pub use rollout::rollout;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SpanflowError};
use crate::pagegraph::NeighborhoodRule;

/// Attention normalization: masked softmax (default) or the literal ratio
/// form with its 1/sqrt(d) prefactor outside the normalization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttentionMode {
    Softmax,
    LiteralEq2,
}

impl Default for AttentionMode {
    fn default() -> Self {
        AttentionMode::Softmax
    }
}

impl std::str::FromStr for AttentionMode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "softmax" => Ok(AttentionMode::Softmax),
            "literal_eq2" => Ok(AttentionMode::LiteralEq2),
            other => Err(format!(
                "unknown attention mode {other:?}; expected softmax or literal_eq2"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Feature and model dimension.
    pub d: usize,
    pub heads: usize,
    pub layers: usize,
    /// Neighborhood order x.
    pub order: u32,
    #[serde(default)]
    pub rule: NeighborhoodRule,
    #[serde(default)]
    pub attention_mode: AttentionMode,
    /// Value-zeroing regularization; forced on whenever order > 1 and a
    /// structural no-op at order 1.
    #[serde(default)]
    pub regularization: bool,
}

impl ModelConfig {
    pub fn new(d: usize, heads: usize, layers: usize, order: u32) -> ModelConfig {
        ModelConfig {
            d,
            heads,
            layers,
            order,
            rule: NeighborhoodRule::And,
            attention_mode: AttentionMode::Softmax,
            regularization: order > 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.heads == 0 {
            return Err(SpanflowError::validation("d and heads must be positive"));
        }
        if self.d % self.heads != 0 {
            return Err(SpanflowError::validation(format!(
                "d = {} must be divisible by heads = {}",
                self.d, self.heads
            )));
        }
        if self.order < 1 {
            return Err(SpanflowError::validation("neighborhood order must be >= 1"));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.d / self.heads
    }

    /// Feed-forward width.
    pub fn d_ff(&self) -> usize {
        2 * self.d
    }

    pub fn regularization_active(&self) -> bool {
        self.regularization || self.order > 1
    }
}

/// Per-layer, per-head attention coefficients captured during a forward
/// pass.
#[derive(Debug, Clone)]
pub struct AttentionTensor {
    /// `maps[layer][head]` is an N x N coefficient matrix.
    pub maps: Vec<Vec<ndarray::Array2<f64>>>,
}

impl AttentionTensor {
    pub fn num_layers(&self) -> usize {
        self.maps.len()
    }
}
