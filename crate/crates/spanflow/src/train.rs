//! Contrastive training on bound graph pairs.
//!
//! Every step embeds a bound page pair, re-mines the hardest negative for
//! each labeled anchor from the current embeddings, takes the margin loss,
//! and applies an adaptive-moment update. Batch order reshuffles
//! deterministically per epoch.

use ndarray::{Array1, Array2, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SpanflowError};
use crate::featurize::{accumulate_span_gradient, embed_indices, span_indices, EmbeddingTable, Vocab};
use crate::gnn::{backward, build_masks, forward_cached, EncoderStack, GraphMasks, ModelConfig};
use crate::pagegraph::{bind_pair, PageGraph};

/// Labeled anchor/positive vertex pairs between two graphs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabeledPair {
    pub graph1_id: String,
    pub graph2_id: String,
    /// (anchor span id in graph 1, positive span id in graph 2)
    pub pairs: Vec<(usize, usize)>,
}

impl LabeledPair {
    pub fn validate(&self, n1: usize, n2: usize) -> Result<()> {
        let mut anchors = std::collections::HashSet::new();
        for &(a, p) in &self.pairs {
            if a >= n1 || p >= n2 {
                return Err(SpanflowError::validation(format!(
                    "label ({a}, {p}) out of bounds for graphs of sizes {n1}, {n2}"
                )));
            }
            if !anchors.insert(a) {
                return Err(SpanflowError::validation(format!(
                    "anchor {a} labeled more than once"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub margin: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Cross-validation fold count; `None` trains a single model.
    pub folds: Option<usize>,
    pub seed: u64,
}

impl TrainConfig {
    pub fn with_seed(seed: u64) -> TrainConfig {
        TrainConfig {
            margin: 1.0,
            epochs: 400,
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            folds: None,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.margin > 0.0) {
            return Err(SpanflowError::validation("margin must be > 0"));
        }
        if self.epochs < 1 {
            return Err(SpanflowError::validation("epochs must be >= 1"));
        }
        if let Some(k) = self.folds {
            if k < 2 {
                return Err(SpanflowError::validation("folds must be >= 2"));
            }
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(SpanflowError::validation("learning rate must be finite and >= 0"));
        }
        Ok(())
    }
}

/// Euclidean margin loss on an (anchor, positive, negative) triple.
pub fn contrastive_loss(
    anchor: ArrayView1<f64>,
    pos: ArrayView1<f64>,
    neg: ArrayView1<f64>,
    margin: f64,
) -> f64 {
    let d_pos = (&anchor - &pos).mapv(|v| v * v).sum().sqrt();
    let d_neg = (&anchor - &neg).mapv(|v| v * v).sum().sqrt();
    d_pos + (margin - d_neg).max(0.0)
}

/// Loss plus gradients on the three embeddings. Subgradient 0 at both the
/// hinge kink and coincident points.
pub fn contrastive_loss_grads(
    anchor: ArrayView1<f64>,
    pos: ArrayView1<f64>,
    neg: ArrayView1<f64>,
    margin: f64,
) -> (f64, Array1<f64>, Array1<f64>, Array1<f64>) {
    let d = anchor.len();
    let mut g_anchor = Array1::zeros(d);
    let mut g_pos = Array1::zeros(d);
    let mut g_neg = Array1::zeros(d);

    let diff_pos = &anchor - &pos;
    let dist_pos = diff_pos.mapv(|v| v * v).sum().sqrt();
    if dist_pos > 0.0 {
        let unit = &diff_pos / dist_pos;
        g_anchor += &unit;
        g_pos -= &unit;
    }

    let diff_neg = &anchor - &neg;
    let dist_neg = diff_neg.mapv(|v| v * v).sum().sqrt();
    let hinge = margin - dist_neg;
    let mut loss = dist_pos;
    if hinge > 0.0 {
        loss += hinge;
        if dist_neg > 0.0 {
            let unit = &diff_neg / dist_neg;
            g_anchor -= &unit;
            g_neg += &unit;
        }
    }
    (loss, g_anchor, g_pos, g_neg)
}

/// Hardest negative: the candidate closest to the anchor, excluding the
/// positive; distance ties break toward the lower index.
pub fn mine_negative(
    anchor: ArrayView1<f64>,
    candidates: &Array2<f64>,
    pos_index: usize,
) -> Result<usize> {
    if candidates.nrows() < 2 {
        return Err(SpanflowError::validation(
            "negative mining needs at least two candidates",
        ));
    }
    let mut best: Option<(f64, usize)> = None;
    for (k, row) in candidates.rows().into_iter().enumerate() {
        if k == pos_index {
            continue;
        }
        let dist = (&anchor - &row).mapv(|v| v * v).sum().sqrt();
        if best.map_or(true, |(bd, _)| dist < bd) {
            best = Some((dist, k));
        }
    }
    Ok(best.unwrap().1)
}

/// Adaptive-moment optimizer state, aligned with the parameter traversal
/// order of [`ModelParams`].
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    pub step: u64,
}

impl AdamState {
    pub fn new(params: &ModelParams) -> AdamState {
        let sizes: Vec<usize> = params.tensor_slices().iter().map(|(_, s)| s.len()).collect();
        AdamState {
            m: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            step: 0,
        }
    }

    pub fn apply(&mut self, params: &mut ModelParams, grads: &ModelParams, config: &TrainConfig) {
        self.step += 1;
        let t = self.step as f64;
        let bc1 = 1.0 - config.beta1.powf(t);
        let bc2 = 1.0 - config.beta2.powf(t);
        let grad_slices = grads.tensor_slices();
        for (idx, (_, slice)) in params.tensor_slices_mut().into_iter().enumerate() {
            let g = grad_slices[idx].1;
            let m = &mut self.m[idx];
            let v = &mut self.v[idx];
            for i in 0..slice.len() {
                m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g[i];
                v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g[i] * g[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                slice[i] -= config.learning_rate * m_hat / (v_hat.sqrt() + config.epsilon);
            }
        }
    }
}

/// All trainable parameters: the embedding table and the encoder stack.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub table: EmbeddingTable,
    pub stack: EncoderStack,
}

impl ModelParams {
    pub fn init(vocab: &Vocab, config: &ModelConfig, seed: u64) -> ModelParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let table = EmbeddingTable::init(vocab, &mut rng);
        let stack = EncoderStack::init(config, &mut rng);
        ModelParams { table, stack }
    }

    pub fn zeros_like(&self) -> ModelParams {
        let mut copy = self.clone();
        for (_, slice) in copy.tensor_slices_mut() {
            slice.fill(0.0);
        }
        copy
    }

    pub fn tensor_slices(&self) -> Vec<(String, &[f64])> {
        let mut out = vec![("table".to_string(), self.table.weights.as_slice().unwrap())];
        out.extend(self.stack.tensor_slices());
        out
    }

    pub fn tensor_slices_mut(&mut self) -> Vec<(String, &mut [f64])> {
        let mut out = vec![(
            "table".to_string(),
            self.table.weights.as_slice_mut().unwrap(),
        )];
        out.extend(self.stack.tensor_slices_mut());
        out
    }

    pub fn tensor_shapes(&self) -> Vec<(String, Vec<usize>)> {
        let mut out = vec![("table".to_string(), self.table.weights.shape().to_vec())];
        out.extend(self.stack.tensor_shapes());
        out
    }
}

/// A bound page pair prepared for training: graph, masks, per-vertex token
/// indices, and labels in bound-vertex coordinates.
#[derive(Debug, Clone)]
pub struct TrainBatch {
    pub id: String,
    pub graph: PageGraph,
    /// Vertex count of block 1; block 2 occupies n1..graph.len().
    pub n1: usize,
    pub masks: GraphMasks,
    pub token_indices: Vec<Vec<usize>>,
    /// (anchor vertex, positive vertex) in bound coordinates.
    pub pairs: Vec<(usize, usize)>,
}

/// Bind two graphs and resolve labels into bound-vertex coordinates.
pub fn prepare_batch(
    id: &str,
    g1: &PageGraph,
    g2: &PageGraph,
    labels: &LabeledPair,
    vocab: &Vocab,
    model_config: &ModelConfig,
) -> Result<TrainBatch> {
    labels.validate(g1.len(), g2.len())?;
    let n1 = g1.len();
    let graph = bind_pair(g1, g2);
    let masks = build_masks(&graph, model_config)?;
    let token_indices = graph
        .spans
        .iter()
        .map(|s| span_indices(s, vocab))
        .collect::<Result<Vec<_>>>()?;
    let pairs = labels
        .pairs
        .iter()
        .map(|&(a, p)| (a, n1 + p))
        .collect();
    Ok(TrainBatch {
        id: id.to_string(),
        graph,
        n1,
        masks,
        token_indices,
        pairs,
    })
}

/// Input feature matrix of a batch under the current embedding table.
pub fn batch_features(batch: &TrainBatch, table: &EmbeddingTable) -> Array2<f64> {
    let d = table.weights.ncols();
    let mut feats = Array2::zeros((batch.graph.len(), d));
    for (i, indices) in batch.token_indices.iter().enumerate() {
        feats.row_mut(i).assign(&embed_indices(indices, table));
    }
    feats
}

/// Mean contrastive loss of a batch with freshly mined negatives, plus the
/// gradient on the output embeddings.
fn batch_loss_and_grad(
    batch: &TrainBatch,
    output: &Array2<f64>,
    margin: f64,
) -> Result<(f64, Array2<f64>)> {
    let n = output.nrows();
    let d = output.ncols();
    let candidates = output
        .slice(ndarray::s![batch.n1..n, ..])
        .to_owned();
    let mut d_out = Array2::zeros((n, d));
    let mut total = 0.0;
    let count = batch.pairs.len() as f64;
    for (pair_index, &(anchor, positive)) in batch.pairs.iter().enumerate() {
        let neg_local = mine_negative(output.row(anchor), &candidates, positive - batch.n1)?;
        let negative = batch.n1 + neg_local;
        let (loss, g_a, g_p, g_n) = contrastive_loss_grads(
            output.row(anchor),
            output.row(positive),
            output.row(negative),
            margin,
        );
        if !loss.is_finite() {
            return Err(SpanflowError::NonFiniteLoss {
                batch_id: batch.id.clone(),
                pair_index,
            });
        }
        total += loss;
        let scale = 1.0 / count;
        d_out.row_mut(anchor).scaled_add(scale, &g_a);
        d_out.row_mut(positive).scaled_add(scale, &g_p);
        d_out.row_mut(negative).scaled_add(scale, &g_n);
    }
    Ok((total / count, d_out))
}

/// Mean loss of a batch without touching parameters.
pub fn batch_validation_loss(
    batch: &TrainBatch,
    params: &ModelParams,
    model_config: &ModelConfig,
    margin: f64,
) -> Result<f64> {
    let feats = batch_features(batch, &params.table);
    let cache = forward_cached(&feats, &batch.masks, &params.stack, model_config)?;
    let (loss, _) = batch_loss_and_grad(batch, &cache.output, margin)?;
    Ok(loss)
}

/// Output embeddings of a batch under the current parameters.
pub fn batch_embeddings(
    batch: &TrainBatch,
    params: &ModelParams,
    model_config: &ModelConfig,
) -> Result<Array2<f64>> {
    let feats = batch_features(batch, &params.table);
    let cache = forward_cached(&feats, &batch.masks, &params.stack, model_config)?;
    Ok(cache.output)
}

/// Mutable training state: parameters, optimizer moments, epoch counter.
#[derive(Debug, Clone)]
pub struct TrainState {
    pub params: ModelParams,
    pub opt: AdamState,
    pub epoch: usize,
    pub config: TrainConfig,
    pub model_config: ModelConfig,
}

impl TrainState {
    pub fn new(params: ModelParams, config: TrainConfig, model_config: ModelConfig) -> TrainState {
        let opt = AdamState::new(&params);
        TrainState {
            params,
            opt,
            epoch: 0,
            config,
            model_config,
        }
    }
}

/// One optimizer step over one batch.
pub fn train_step(state: &mut TrainState, batch: &TrainBatch) -> Result<f64> {
    let feats = batch_features(batch, &state.params.table);
    let cache = forward_cached(&feats, &batch.masks, &state.params.stack, &state.model_config)?;
    let (loss, d_out) = batch_loss_and_grad(batch, &cache.output, state.config.margin)?;

    let (stack_grads, d_feats) = backward(
        &cache,
        &batch.masks,
        &state.params.stack,
        &state.model_config,
        &d_out,
    )?;
    let mut grads = state.params.zeros_like();
    grads.stack = stack_grads;
    for (i, indices) in batch.token_indices.iter().enumerate() {
        accumulate_span_gradient(indices, &d_feats.row(i).to_owned(), &mut grads.table.weights);
    }
    state.opt.apply(&mut state.params, &grads, &state.config);
    Ok(loss)
}

fn shuffled_indices(n: usize, seed: u64, epoch: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0x5u64 << 32 | epoch as u64);
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
    order
}

/// One epoch over all batches in seed-driven order. Returns the mean batch
/// loss.
pub fn train_epoch(state: &mut TrainState, batches: &[TrainBatch]) -> Result<f64> {
    let order = shuffled_indices(batches.len(), state.config.seed, state.epoch);
    let mut total = 0.0;
    for idx in order {
        total += train_step(state, &batches[idx])?;
    }
    state.epoch += 1;
    Ok(total / batches.len() as f64)
}

/// Deterministic k-fold partition: seeded shuffle, then contiguous split.
/// Returns (train, validation) index lists per fold.
pub fn kfold_split(n_batches: usize, k: usize, seed: u64) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    if k < 2 {
        return Err(SpanflowError::validation("folds must be >= 2"));
    }
    if k > n_batches {
        return Err(SpanflowError::validation(format!(
            "cannot split {n_batches} batches into {k} folds"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0xf01d);
    let mut order: Vec<usize> = (0..n_batches).collect();
    for i in (1..n_batches).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
    let base = n_batches / k;
    let extra = n_batches % k;
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        let val: Vec<usize> = order[start..start + size].to_vec();
        let train: Vec<usize> = order[..start]
            .iter()
            .chain(order[start + size..].iter())
            .copied()
            .collect();
        folds.push((train, val));
        start += size;
    }
    Ok(folds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr1;
    use proptest::prelude::*;

    #[test]
    fn loss_examples() {
        let a = arr1(&[0.0, 0.0]);
        let n_far = arr1(&[3.0, 4.0]);
        // anchor == pos and negative beyond margin: zero loss
        assert_eq!(contrastive_loss(a.view(), a.view(), n_far.view(), 1.0), 0.0);
        // anchor == pos == neg: hinge fully active at the margin
        assert_eq!(contrastive_loss(a.view(), a.view(), a.view(), 1.0), 1.0);
        // |a-p| = 0.5, |a-n| = 0.3, m = 1 -> 0.5 + 0.7
        let p = arr1(&[0.5, 0.0]);
        let n = arr1(&[0.0, 0.3]);
        let loss = contrastive_loss(a.view(), p.view(), n.view(), 1.0);
        assert!((loss - 1.2).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn loss_non_negative(
            a in proptest::collection::vec(-5.0f64..5.0, 4),
            p in proptest::collection::vec(-5.0f64..5.0, 4),
            n in proptest::collection::vec(-5.0f64..5.0, 4),
            m in 0.1f64..3.0,
        ) {
            let (a, p, n) = (Array1::from(a), Array1::from(p), Array1::from(n));
            let loss = contrastive_loss(a.view(), p.view(), n.view(), m);
            prop_assert!(loss >= 0.0);
            // zero exactly when anchor == pos and the hinge is inactive
            let d_neg = (&a - &n).mapv(|v| v * v).sum().sqrt();
            if loss == 0.0 {
                prop_assert!(a == p && d_neg >= m);
            }
        }
    }

    #[test]
    fn hinge_gradient_vanishes_beyond_margin() {
        let a = arr1(&[0.0, 0.0]);
        let p = arr1(&[1.0, 0.0]);
        let n = arr1(&[5.0, 0.0]);
        let (_, _, _, g_n) = contrastive_loss_grads(a.view(), p.view(), n.view(), 1.0);
        assert!(g_n.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn loss_grads_match_finite_differences() {
        let a = arr1(&[0.3, -0.2, 0.9]);
        let p = arr1(&[0.1, 0.4, 0.5]);
        let n = arr1(&[0.5, -0.1, 0.8]);
        let m = 1.0;
        let (_, g_a, g_p, g_n) = contrastive_loss_grads(a.view(), p.view(), n.view(), m);
        let eps = 1e-6;
        for i in 0..3 {
            let mut a2 = a.clone();
            a2[i] += eps;
            let up = contrastive_loss(a2.view(), p.view(), n.view(), m);
            a2[i] -= 2.0 * eps;
            let down = contrastive_loss(a2.view(), p.view(), n.view(), m);
            assert!(((up - down) / (2.0 * eps) - g_a[i]).abs() < 1e-6);

            let mut p2 = p.clone();
            p2[i] += eps;
            let up = contrastive_loss(a.view(), p2.view(), n.view(), m);
            p2[i] -= 2.0 * eps;
            let down = contrastive_loss(a.view(), p2.view(), n.view(), m);
            assert!(((up - down) / (2.0 * eps) - g_p[i]).abs() < 1e-6);

            let mut n2 = n.clone();
            n2[i] += eps;
            let up = contrastive_loss(a.view(), p.view(), n2.view(), m);
            n2[i] -= 2.0 * eps;
            let down = contrastive_loss(a.view(), p.view(), n2.view(), m);
            assert!(((up - down) / (2.0 * eps) - g_n[i]).abs() < 1e-6);
        }
    }

    #[test]
    fn mining_excludes_positive_and_prefers_nearest() {
        let anchor = arr1(&[0.0, 0.0]);
        let mut candidates = Array2::zeros((3, 2));
        candidates[[0, 0]] = 0.1; // positive
        candidates[[1, 0]] = 0.2;
        candidates[[2, 0]] = 0.9;
        assert_eq!(mine_negative(anchor.view(), &candidates, 0).unwrap(), 1);
    }

    #[test]
    fn mining_breaks_ties_toward_lower_index() {
        let anchor = arr1(&[0.0, 0.0]);
        let mut candidates = Array2::zeros((4, 2));
        candidates[[0, 0]] = 0.01; // positive
        candidates[[1, 0]] = 0.5;
        candidates[[2, 0]] = -0.5;
        candidates[[3, 0]] = 0.9;
        assert_eq!(mine_negative(anchor.view(), &candidates, 0).unwrap(), 1);
    }

    #[test]
    fn mining_rejects_single_candidate() {
        let anchor = arr1(&[0.0]);
        let candidates = Array2::zeros((1, 1));
        assert!(mine_negative(anchor.view(), &candidates, 0).is_err());
    }

    #[test]
    fn mining_matches_exhaustive_scan() {
        use rand::{Rng, SeedableRng};
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let k = 50;
            let d = 6;
            let mut candidates = Array2::zeros((k, d));
            for v in candidates.iter_mut() {
                *v = rng.gen_range(-1.0..1.0);
            }
            let anchor: Array1<f64> =
                Array1::from_iter((0..d).map(|_| rng.gen_range(-1.0..1.0)));
            let pos = rng.gen_range(0..k);

            let mut best = (f64::INFINITY, usize::MAX);
            for c in 0..k {
                if c == pos {
                    continue;
                }
                let dist: f64 = (0..d)
                    .map(|j| (anchor[j] - candidates[[c, j]]).powi(2))
                    .sum::<f64>()
                    .sqrt();
                if dist < best.0 {
                    best = (dist, c);
                }
            }
            assert_eq!(mine_negative(anchor.view(), &candidates, pos).unwrap(), best.1);
        }
    }

    proptest! {
        #[test]
        fn mined_negative_never_positive(seed in 0u64..100) {
            use rand::{Rng, SeedableRng};
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let k = rng.gen_range(2..20);
            let mut candidates = Array2::zeros((k, 3));
            for v in candidates.iter_mut() {
                *v = rng.gen_range(-1.0..1.0);
            }
            let anchor = arr1(&[rng.gen_range(-1.0..1.0), 0.0, 0.0]);
            let pos = rng.gen_range(0..k);
            let neg = mine_negative(anchor.view(), &candidates, pos).unwrap();
            prop_assert_ne!(neg, pos);
        }
    }

    #[test]
    fn kfold_partitions_are_disjoint_and_complete() {
        let folds = kfold_split(10, 5, 9).unwrap();
        assert_eq!(folds.len(), 5);
        let mut seen = std::collections::HashSet::new();
        for (train, val) in &folds {
            assert_eq!(val.len(), 2);
            assert_eq!(train.len(), 8);
            for v in val {
                assert!(seen.insert(*v));
                assert!(!train.contains(v));
            }
        }
        assert_eq!(seen.len(), 10);
    }

    #[test]
    fn kfold_is_seed_deterministic() {
        assert_eq!(kfold_split(7, 3, 4).unwrap(), kfold_split(7, 3, 4).unwrap());
        assert_ne!(kfold_split(7, 3, 4).unwrap(), kfold_split(7, 3, 5).unwrap());
    }

    #[test]
    fn kfold_rejects_more_folds_than_batches() {
        assert!(kfold_split(3, 5, 1).is_err());
        assert!(kfold_split(10, 1, 1).is_err());
    }
}
