//! Skip-gram with negative sampling over walk corpora.
//!
//! For a (center, context) pair with sampled negatives `n_1..n_K` the pair loss is
//!
//! ```text
//! -ln σ(out[context] · in[center]) - Σ_k ln σ(-out[n_k] · in[center])
//! ```
//!
//! which stands in for the full neighborhood softmax during training. Noise
//! ragams are drawn from the walk-token unigram distribution raised to 0.75.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{EmbeddingError, EmbeddingTable};
use crate::corpus::RagamId;
use crate::linalg::{axpy, dot, log_sigmoid, sigmoid, Matrix};

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SkipgramHyper {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    /// Initial learning rate, decayed linearly towards zero.
    pub lr: f64,
    pub seed: u64,
}

impl Default for SkipgramHyper {
    fn default() -> Self {
        Self {
            dim: 64,
            window: 5,
            negatives: 5,
            epochs: 5,
            lr: 0.025,
            seed: 42,
        }
    }
}

const MIN_LR_FRACTION: f64 = 1e-4;

/// Loss and gradients of one (center, context, negatives) term.
#[derive(Debug, Clone, PartialEq)]
pub struct SgnsGradient {
    pub loss: f64,
    pub d_center: Vec<f64>,
    pub d_context: Vec<f64>,
    pub d_negatives: Vec<Vec<f64>>,
}

pub fn sgns_loss(center: &[f64], context: &[f64], negatives: &[&[f64]]) -> f64 {
    -log_sigmoid(dot(context, center))
        - negatives
            .iter()
            .map(|n| log_sigmoid(-dot(n, center)))
            .sum::<f64>()
}

pub fn sgns_gradient(center: &[f64], context: &[f64], negatives: &[&[f64]]) -> SgnsGradient {
    let pos = dot(context, center);
    let g_pos = sigmoid(pos) - 1.0;
    let mut d_center: Vec<f64> = context.iter().map(|u| g_pos * u).collect();
    let d_context: Vec<f64> = center.iter().map(|v| g_pos * v).collect();
    let mut loss = -log_sigmoid(pos);
    let d_negatives = negatives
        .iter()
        .map(|n| {
            let s = dot(n, center);
            loss -= log_sigmoid(-s);
            let g = sigmoid(s);
            axpy(g, n, &mut d_center);
            center.iter().map(|v| g * v).collect()
        })
        .collect();
    SgnsGradient {
        loss,
        d_center,
        d_context,
        d_negatives,
    }
}

/// Cumulative unigram^0.75 distribution for negative draws.
struct NoiseSampler {
    cumulative: Vec<f64>,
}

impl NoiseSampler {
    fn new(counts: &[u64]) -> Self {
        let mut acc = 0.0;
        let cumulative = counts
            .iter()
            .map(|&c| {
                acc += (c as f64).powf(0.75);
                acc
            })
            .collect();
        Self { cumulative }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> usize {
        let total = *self.cumulative.last().expect("non-empty vocabulary");
        let u = rng.gen::<f64>() * total;
        self.cumulative
            .partition_point(|&c| c <= u)
            .min(self.cumulative.len() - 1)
    }
}

/// Trains in/out vectors on `walks`. Returns the table and the mean pair loss
/// of every epoch.
///
/// When no walk has two tokens there are no pairs to train on; the seeded
/// random initialization is returned with an empty loss trace.
pub fn train_skipgram(
    walks: &[Vec<RagamId>],
    vocab_size: usize,
    hyper: &SkipgramHyper,
) -> Result<(EmbeddingTable, Vec<f64>), EmbeddingError> {
    if hyper.dim < 2 {
        return Err(EmbeddingError::Config("embedding dim must be >= 2".into()));
    }
    if hyper.window < 1 {
        return Err(EmbeddingError::Config("window must be >= 1".into()));
    }
    if !(hyper.lr > 0.0) {
        return Err(EmbeddingError::Config("learning rate must be positive".into()));
    }
    for walk in walks {
        if let Some(bad) = walk.iter().find(|id| id.index() >= vocab_size) {
            return Err(EmbeddingError::Config(format!(
                "walk token {bad} outside vocabulary of {vocab_size}"
            )));
        }
    }

    let d = hyper.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let bound = 0.5 / d as f64;
    let mut table = EmbeddingTable {
        in_vectors: Matrix::uniform(vocab_size, d, bound, &mut rng),
        out_vectors: Matrix::zeros(vocab_size, d),
    };

    let pairs_per_epoch: usize = walks
        .iter()
        .map(|w| {
            (0..w.len())
                .map(|i| {
                    let lo = i.saturating_sub(hyper.window);
                    let hi = (i + hyper.window).min(w.len() - 1);
                    hi - lo
                })
                .sum::<usize>()
        })
        .sum();
    if pairs_per_epoch == 0 {
        log::warn!("no walk has two tokens; returning untrained embeddings");
        return Ok((table, Vec::new()));
    }

    let mut counts = vec![0u64; vocab_size];
    for id in walks.iter().flatten() {
        counts[id.index()] += 1;
    }
    let noise = NoiseSampler::new(&counts);

    let total_pairs = (pairs_per_epoch * hyper.epochs) as f64;
    let mut processed = 0usize;
    let mut order: Vec<usize> = (0..walks.len()).collect();
    let mut epoch_losses = Vec::with_capacity(hyper.epochs);
    let mut neg_ids = Vec::with_capacity(hyper.negatives);

    for _ in 0..hyper.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for &w in &order {
            let walk = &walks[w];
            for (i, center) in walk.iter().enumerate() {
                let lo = i.saturating_sub(hyper.window);
                let hi = (i + hyper.window).min(walk.len().saturating_sub(1));
                for j in lo..=hi {
                    if j == i {
                        continue;
                    }
                    let lr = hyper.lr * (1.0 - processed as f64 / total_pairs).max(MIN_LR_FRACTION);
                    processed += 1;
                    let context = walk[j].index();

                    neg_ids.clear();
                    for _ in 0..hyper.negatives {
                        let n = noise.sample(&mut rng);
                        if n != context {
                            neg_ids.push(n);
                        }
                    }

                    let c = center.index();
                    let negs: Vec<&[f64]> = neg_ids.iter().map(|&n| table.out_vectors.row(n)).collect();
                    let grad = sgns_gradient(table.in_vectors.row(c), table.out_vectors.row(context), &negs);
                    epoch_loss += grad.loss;
                    axpy(-lr, &grad.d_context, table.out_vectors.row_mut(context));
                    for (&n, g) in neg_ids.iter().zip(&grad.d_negatives) {
                        axpy(-lr, g, table.out_vectors.row_mut(n));
                    }
                    axpy(-lr, &grad.d_center, table.in_vectors.row_mut(c));
                }
            }
        }
        epoch_losses.push(epoch_loss / pairs_per_epoch as f64);
    }

    debug_assert!(table.in_vectors.is_finite() && table.out_vectors.is_finite());
    Ok((table, epoch_losses))
}
