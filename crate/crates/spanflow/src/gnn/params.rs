//! Encoder parameters and their traversal.

use ndarray::{Array1, Array2};
use rand::Rng;

use super::ModelConfig;

fn xavier(rows: usize, cols: usize, rng: &mut impl Rng) -> Array2<f64> {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    let mut m = Array2::zeros((rows, cols));
    for w in m.iter_mut() {
        *w = rng.gen_range(-bound..bound);
    }
    m
}

/// One encoder layer: per-head query/key/value projections stored as
/// column-blocked d x d matrices, output projection, feed-forward, and two
/// normalization parameter pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderLayer {
    pub wq: Array2<f64>,
    pub wk: Array2<f64>,
    pub wv: Array2<f64>,
    pub wo: Array2<f64>,
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
    pub ln1_gamma: Array1<f64>,
    pub ln1_beta: Array1<f64>,
    pub ln2_gamma: Array1<f64>,
    pub ln2_beta: Array1<f64>,
}

impl EncoderLayer {
    pub fn init(config: &ModelConfig, rng: &mut impl Rng) -> EncoderLayer {
        let d = config.d;
        let d_ff = config.d_ff();
        EncoderLayer {
            wq: xavier(d, d, rng),
            wk: xavier(d, d, rng),
            wv: xavier(d, d, rng),
            wo: xavier(d, d, rng),
            w1: xavier(d, d_ff, rng),
            b1: Array1::zeros(d_ff),
            w2: xavier(d_ff, d, rng),
            b2: Array1::zeros(d),
            ln1_gamma: Array1::ones(d),
            ln1_beta: Array1::zeros(d),
            ln2_gamma: Array1::ones(d),
            ln2_beta: Array1::zeros(d),
        }
    }

    pub fn zeros(config: &ModelConfig) -> EncoderLayer {
        let d = config.d;
        let d_ff = config.d_ff();
        EncoderLayer {
            wq: Array2::zeros((d, d)),
            wk: Array2::zeros((d, d)),
            wv: Array2::zeros((d, d)),
            wo: Array2::zeros((d, d)),
            w1: Array2::zeros((d, d_ff)),
            b1: Array1::zeros(d_ff),
            w2: Array2::zeros((d_ff, d)),
            b2: Array1::zeros(d),
            ln1_gamma: Array1::zeros(d),
            ln1_beta: Array1::zeros(d),
            ln2_gamma: Array1::zeros(d),
            ln2_beta: Array1::zeros(d),
        }
    }

    pub fn check_shape(&self, config: &ModelConfig) -> bool {
        let d = config.d;
        let d_ff = config.d_ff();
        self.wq.dim() == (d, d)
            && self.wk.dim() == (d, d)
            && self.wv.dim() == (d, d)
            && self.wo.dim() == (d, d)
            && self.w1.dim() == (d, d_ff)
            && self.b1.len() == d_ff
            && self.w2.dim() == (d_ff, d)
            && self.b2.len() == d
            && [&self.ln1_gamma, &self.ln1_beta, &self.ln2_gamma, &self.ln2_beta]
                .iter()
                .all(|v| v.len() == d)
    }
}

/// The stacked encoder layers.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderStack {
    pub layers: Vec<EncoderLayer>,
}

impl EncoderStack {
    pub fn init(config: &ModelConfig, rng: &mut impl Rng) -> EncoderStack {
        EncoderStack {
            layers: (0..config.layers)
                .map(|_| EncoderLayer::init(config, rng))
                .collect(),
        }
    }

    pub fn zeros(config: &ModelConfig) -> EncoderStack {
        EncoderStack {
            layers: (0..config.layers)
                .map(|_| EncoderLayer::zeros(config))
                .collect(),
        }
    }

    pub fn check_shape(&self, config: &ModelConfig) -> bool {
        self.layers.len() == config.layers
            && self.layers.iter().all(|l| l.check_shape(config))
    }

    /// Flat views over every parameter tensor, in a fixed traversal order
    /// shared by gradients, optimizer state, and checkpoints.
    pub fn tensor_slices(&self) -> Vec<(String, &[f64])> {
        let mut out = Vec::new();
        for (i, l) in self.layers.iter().enumerate() {
            let mats: [(&str, &Array2<f64>); 6] = [
                ("wq", &l.wq),
                ("wk", &l.wk),
                ("wv", &l.wv),
                ("wo", &l.wo),
                ("w1", &l.w1),
                ("w2", &l.w2),
            ];
            for (name, m) in mats {
                out.push((format!("layers.{i}.{name}"), m.as_slice().unwrap()));
            }
            let vecs: [(&str, &Array1<f64>); 6] = [
                ("b1", &l.b1),
                ("b2", &l.b2),
                ("ln1_gamma", &l.ln1_gamma),
                ("ln1_beta", &l.ln1_beta),
                ("ln2_gamma", &l.ln2_gamma),
                ("ln2_beta", &l.ln2_beta),
            ];
            for (name, v) in vecs {
                out.push((format!("layers.{i}.{name}"), v.as_slice().unwrap()));
            }
        }
        out
    }

    pub fn tensor_slices_mut(&mut self) -> Vec<(String, &mut [f64])> {
        let mut out = Vec::new();
        for (i, l) in self.layers.iter_mut().enumerate() {
            let mats: [(&str, &mut Array2<f64>); 6] = [
                ("wq", &mut l.wq),
                ("wk", &mut l.wk),
                ("wv", &mut l.wv),
                ("wo", &mut l.wo),
                ("w1", &mut l.w1),
                ("w2", &mut l.w2),
            ];
            for (name, m) in mats {
                out.push((format!("layers.{i}.{name}"), m.as_slice_mut().unwrap()));
            }
            let vecs: [(&str, &mut Array1<f64>); 6] = [
                ("b1", &mut l.b1),
                ("b2", &mut l.b2),
                ("ln1_gamma", &mut l.ln1_gamma),
                ("ln1_beta", &mut l.ln1_beta),
                ("ln2_gamma", &mut l.ln2_gamma),
                ("ln2_beta", &mut l.ln2_beta),
            ];
            for (name, v) in vecs {
                out.push((format!("layers.{i}.{name}"), v.as_slice_mut().unwrap()));
            }
        }
        out
    }

    /// Tensor shapes in traversal order, for checkpoint round trips.
    pub fn tensor_shapes(&self) -> Vec<(String, Vec<usize>)> {
        let mut out = Vec::new();
        for (i, l) in self.layers.iter().enumerate() {
            let mats: [(&str, &Array2<f64>); 6] = [
                ("wq", &l.wq),
                ("wk", &l.wk),
                ("wv", &l.wv),
                ("wo", &l.wo),
                ("w1", &l.w1),
                ("w2", &l.w2),
            ];
            for (name, m) in mats {
                out.push((format!("layers.{i}.{name}"), m.shape().to_vec()));
            }
            let vecs: [(&str, &Array1<f64>); 6] = [
                ("b1", &l.b1),
                ("b2", &l.b2),
                ("ln1_gamma", &l.ln1_gamma),
                ("ln1_beta", &l.ln1_beta),
                ("ln2_gamma", &l.ln2_gamma),
                ("ln2_beta", &l.ln2_beta),
            ];
            for (name, v) in vecs {
                out.push((format!("layers.{i}.{name}"), vec![v.len()]));
            }
        }
        out
    }
}
