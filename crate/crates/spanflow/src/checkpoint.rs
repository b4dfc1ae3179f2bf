//! Checkpoint and attention-dump serialization.
//!
//! JSON envelope with base64 little-endian f32 tensor payloads:
//! {version, config, tensors: {name -> {shape, dtype, data}}}.

use std::collections::BTreeMap;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SpanflowError};
use crate::featurize::{EmbeddingTable, Vocab};
use crate::gnn::{AttentionTensor, EncoderStack, ModelConfig};
use crate::train::ModelParams;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TensorRecord {
    pub shape: Vec<usize>,
    pub dtype: String,
    pub data: String,
}

impl TensorRecord {
    pub fn from_f64(shape: Vec<usize>, values: &[f64]) -> TensorRecord {
        let expected: usize = shape.iter().product();
        debug_assert_eq!(expected, values.len());
        let mut bytes = Vec::with_capacity(values.len() * 4);
        for v in values {
            bytes.extend_from_slice(&(*v as f32).to_le_bytes());
        }
        TensorRecord {
            shape,
            dtype: "f32".to_string(),
            data: BASE64.encode(bytes),
        }
    }

    pub fn to_f64(&self) -> Result<Vec<f64>> {
        if self.dtype != "f32" {
            return Err(SpanflowError::validation(format!(
                "unsupported tensor dtype {:?}",
                self.dtype
            )));
        }
        let bytes = BASE64
            .decode(&self.data)
            .map_err(|e| SpanflowError::validation(format!("bad tensor payload: {e}")))?;
        if bytes.len() % 4 != 0 {
            return Err(SpanflowError::validation("tensor payload not f32-aligned"));
        }
        let count: usize = self.shape.iter().product();
        if bytes.len() / 4 != count {
            return Err(SpanflowError::validation(format!(
                "tensor payload holds {} values, shape {:?} wants {count}",
                bytes.len() / 4,
                self.shape
            )));
        }
        Ok(bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect())
    }
}

/// Model configuration plus the training margin, echoed into checkpoints.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointConfig {
    pub model: ModelConfig,
    pub margin: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub config: CheckpointConfig,
    pub vocab: Vocab,
    pub tensors: BTreeMap<String, TensorRecord>,
}

impl Checkpoint {
    pub fn from_params(params: &ModelParams, vocab: &Vocab, config: CheckpointConfig) -> Checkpoint {
        let mut tensors = BTreeMap::new();
        let shapes = params.tensor_shapes();
        for ((name, slice), (shape_name, shape)) in
            params.tensor_slices().into_iter().zip(shapes)
        {
            debug_assert_eq!(name, shape_name);
            tensors.insert(name, TensorRecord::from_f64(shape, slice));
        }
        Checkpoint {
            version: CHECKPOINT_VERSION,
            config,
            vocab: vocab.clone(),
            tensors,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| SpanflowError::runtime(format!("checkpoint serialization: {e}")))
    }

    pub fn from_json(text: &str) -> Result<Checkpoint> {
        let mut ckpt: Checkpoint = serde_json::from_str(text)
            .map_err(|e| SpanflowError::validation(format!("malformed checkpoint: {e}")))?;
        if ckpt.version != CHECKPOINT_VERSION {
            return Err(SpanflowError::validation(format!(
                "unsupported checkpoint version {}",
                ckpt.version
            )));
        }
        ckpt.vocab.reindex();
        Ok(ckpt)
    }

    /// Reassemble parameters; shapes come from the vocab and model config.
    pub fn to_params(&self) -> Result<ModelParams> {
        let d = self.config.model.d;
        if self.vocab.d != d {
            return Err(SpanflowError::validation(
                "vocab dimension does not match model config",
            ));
        }
        let mut params = ModelParams {
            table: EmbeddingTable {
                weights: Array2::zeros((self.vocab.rows(), d)),
            },
            stack: EncoderStack::zeros(&self.config.model),
        };
        for (name, slice) in params.tensor_slices_mut() {
            let record = self.tensors.get(&name).ok_or_else(|| {
                SpanflowError::validation(format!("checkpoint missing tensor {name:?}"))
            })?;
            let values = record.to_f64()?;
            if values.len() != slice.len() {
                return Err(SpanflowError::validation(format!(
                    "tensor {name:?} holds {} values, expected {}",
                    values.len(),
                    slice.len()
                )));
            }
            slice.copy_from_slice(&values);
        }
        Ok(params)
    }
}

/// Attention dump: per-layer head-averaged N x N maps, same tensor encoding
/// as checkpoints.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttentionDump {
    pub version: u32,
    pub layers: Vec<TensorRecord>,
}

impl AttentionDump {
    pub fn from_attention(attn: &AttentionTensor) -> AttentionDump {
        let layers = attn
            .maps
            .iter()
            .map(|heads| {
                let n = heads[0].nrows();
                let mut mean = Array2::<f64>::zeros((n, n));
                for h in heads {
                    mean += h;
                }
                mean /= heads.len() as f64;
                TensorRecord::from_f64(vec![n, n], mean.as_slice().unwrap())
            })
            .collect();
        AttentionDump {
            version: CHECKPOINT_VERSION,
            layers,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::featurize::build_vocab;
    use crate::layout::{segment_page, LayoutConfig, Token};

    #[test]
    fn checkpoint_roundtrip_preserves_f32_values() {
        let tokens = vec![
            Token::new("p", "alpha", 0.0, 0.0, 30.0, 12.0),
            Token::new("p", "$42", 0.0, 26.0, 24.0, 38.0),
        ];
        let spans = segment_page(&tokens, &LayoutConfig::default()).unwrap();
        let vocab = build_vocab(&spans, 1, 16, 8);
        let model = ModelConfig::new(8, 2, 2, 5);
        let params = ModelParams::init(&vocab, &model, 99);
        let ckpt = Checkpoint::from_params(
            &params,
            &vocab,
            CheckpointConfig {
                model: model.clone(),
                margin: 1.0,
                seed: 99,
            },
        );
        let json = ckpt.to_json().unwrap();
        let back = Checkpoint::from_json(&json).unwrap();
        let restored = back.to_params().unwrap();

        for ((name, a), (_, b)) in params
            .tensor_slices()
            .into_iter()
            .zip(restored.tensor_slices())
        {
            for (x, y) in a.iter().zip(b.iter()) {
                assert_eq!(*x as f32, *y as f32, "tensor {name}");
            }
        }
        // serialization is deterministic
        assert_eq!(json, back.to_json().unwrap());
    }

    #[test]
    fn tensor_record_validates_payload() {
        let record = TensorRecord {
            shape: vec![2, 2],
            dtype: "f32".into(),
            data: BASE64.encode([0u8; 8]),
        };
        assert!(record.to_f64().is_err());
        let record = TensorRecord {
            shape: vec![2],
            dtype: "f64".into(),
            data: BASE64.encode([0u8; 16]),
        };
        assert!(record.to_f64().is_err());
    }
}
