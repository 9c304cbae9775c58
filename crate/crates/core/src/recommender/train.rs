//! Loss, gradients and mini-batch SGD for the ensemble head.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::RagamAIModel;
use crate::corpus::{Corpus, RagamId};
use crate::eval::expand_prefixes;
use crate::linalg::{axpy, Matrix};
use crate::ranking::RecommendError;

/// Probabilities are clamped to `[PROB_FLOOR, 1 - PROB_FLOOR]` inside the loss.
pub const PROB_FLOOR: f64 = 1e-12;

/// Instances per parallel gradient chunk. Fixed so the reduction order does
/// not depend on the thread count.
const CHUNK: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingInstance {
    pub prefix: Vec<RagamId>,
    /// Forthcoming ragams, de-duplicated and disjoint from the prefix.
    pub targets: Vec<RagamId>,
}

impl TrainingInstance {
    /// Removes prefix members from `forthcoming`; `None` if nothing remains.
    pub fn new(prefix: Vec<RagamId>, forthcoming: impl IntoIterator<Item = RagamId>) -> Option<Self> {
        let played: BTreeSet<RagamId> = prefix.iter().copied().collect();
        let targets: BTreeSet<RagamId> = forthcoming
            .into_iter()
            .filter(|id| !played.contains(id))
            .collect();
        if prefix.is_empty() || targets.is_empty() {
            None
        } else {
            Some(Self {
                prefix,
                targets: targets.into_iter().collect(),
            })
        }
    }

    pub fn from_corpus(corpus: &Corpus) -> Vec<Self> {
        corpus
            .concerts
            .iter()
            .flat_map(expand_prefixes)
            .filter_map(|inst| Self::new(inst.prefix, inst.relevant))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrainHyper {
    pub epochs: usize,
    pub lr: f64,
    pub batch: usize,
    pub seed: u64,
    pub l2: f64,
}

impl Default for TrainHyper {
    fn default() -> Self {
        Self {
            epochs: 40,
            lr: 0.03,
            batch: 16,
            seed: 42,
            l2: 1e-6,
        }
    }
}

/// `-Σ_i [y_i ln p_i + (1 - y_i) ln(1 - p_i)]` with `y` the multi-hot encoding
/// of `targets` and `p` clamped away from 0 and 1.
pub fn multilabel_cross_entropy(probs: &[f64], targets: &[RagamId]) -> f64 {
    let mut is_target = vec![false; probs.len()];
    for t in targets {
        is_target[t.index()] = true;
    }
    probs
        .iter()
        .zip(&is_target)
        .map(|(&p, &y)| {
            let p = p.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
            if y {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum()
}

/// Gradient accumulator for every trainable tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub w1: Matrix,
    pub w2: Matrix,
    pub c: Vec<f64>,
    pub w3: Matrix,
    /// Present only when the embeddings are trained.
    pub embeddings: Option<Matrix>,
}

impl Gradients {
    pub fn zeros_like(model: &RagamAIModel) -> Self {
        let d = model.dim();
        Self {
            w1: Matrix::zeros(d, d),
            w2: Matrix::zeros(d, d),
            c: vec![0.0; d],
            w3: Matrix::zeros(model.w3.rows(), model.w3.cols()),
            embeddings: model
                .variant
                .trains_embeddings()
                .then(|| Matrix::zeros(model.vocab_size(), d)),
        }
    }

    fn add(&mut self, other: &Gradients) {
        self.w1.add_scaled(1.0, &other.w1);
        self.w2.add_scaled(1.0, &other.w2);
        axpy(1.0, &other.c, &mut self.c);
        self.w3.add_scaled(1.0, &other.w3);
        if let (Some(a), Some(b)) = (self.embeddings.as_mut(), other.embeddings.as_ref()) {
            a.add_scaled(1.0, b);
        }
    }
}

impl RagamAIModel {
    /// Unregularized loss of one instance.
    pub fn instance_loss(&self, instance: &TrainingInstance) -> f64 {
        multilabel_cross_entropy(&self.forward(&instance.prefix).probs, &instance.targets)
    }

    /// Adds the gradient of [`instance_loss`](Self::instance_loss) into `grads`
    /// and returns the loss.
    pub fn accumulate_gradients(&self, instance: &TrainingInstance, grads: &mut Gradients) -> f64 {
        let prefix = &instance.prefix;
        let fwd = self.forward(prefix);
        let n = self.vocab_size();
        let d = self.dim();

        let mut is_target = vec![false; n];
        for t in &instance.targets {
            is_target[t.index()] = true;
        }

        // dL/dp, zero where the clamp is active.
        let mut loss = 0.0;
        let dp: Vec<f64> = fwd
            .probs
            .iter()
            .zip(&is_target)
            .map(|(&p, &y)| {
                let clamped = p.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
                loss -= if y { clamped.ln() } else { (1.0 - clamped).ln() };
                if clamped != p {
                    0.0
                } else if y {
                    -1.0 / p
                } else {
                    1.0 / (1.0 - p)
                }
            })
            .collect();
        // Softmax Jacobian: dz_j = p_j (dp_j - Σ_i dp_i p_i).
        let inner: f64 = dp.iter().zip(&fwd.probs).map(|(g, p)| g * p).sum();
        let dz: Vec<f64> = dp
            .iter()
            .zip(&fwd.probs)
            .map(|(g, p)| p * (g - inner))
            .collect();

        grads.w3.add_outer(1.0, &dz, &fwd.input);

        if !self.variant.uses_attention() {
            return loss;
        }

        let mut d_input = vec![0.0; self.w3.cols()];
        self.w3.matvec_t_acc(&dz, &mut d_input);
        let d_pool = &d_input[..d];

        let mut d_pre = vec![0.0; d];
        for (i, &id) in prefix.iter().enumerate() {
            let s = self.embeddings.vector(id);
            let gate = &fwd.gates[i];
            for j in 0..d {
                d_pre[j] = d_pool[j] * s[j] * gate[j] * (1.0 - gate[j]);
            }
            if i > 0 {
                grads
                    .w1
                    .add_outer(1.0, &d_pre, self.embeddings.vector(prefix[i - 1]));
            }
            grads.w2.add_outer(1.0, &d_pre, s);
            axpy(1.0, &d_pre, &mut grads.c);

            if let Some(d_emb) = grads.embeddings.as_mut() {
                let row = d_emb.row_mut(id.index());
                for j in 0..d {
                    row[j] += d_pool[j] * gate[j];
                }
                self.w2.matvec_t_acc(&d_pre, row);
                if i > 0 {
                    let prev = d_emb.row_mut(prefix[i - 1].index());
                    self.w1.matvec_t_acc(&d_pre, prev);
                }
            }
        }
        loss
    }

    /// Loss and gradient of one instance.
    pub fn instance_gradients(&self, instance: &TrainingInstance) -> (f64, Gradients) {
        let mut grads = Gradients::zeros_like(self);
        let loss = self.accumulate_gradients(instance, &mut grads);
        (loss, grads)
    }

    fn l2_step(&mut self, scale: f64) {
        for m in [&mut self.w1, &mut self.w2, &mut self.w3] {
            m.as_mut_slice().iter_mut().for_each(|x| *x *= scale);
        }
        if self.variant.trains_embeddings() {
            self.embeddings
                .in_vectors
                .as_mut_slice()
                .iter_mut()
                .for_each(|x| *x *= scale);
        }
    }

    fn apply(&mut self, grads: &Gradients, step: f64) {
        self.w3.add_scaled(-step, &grads.w3);
        if self.variant.uses_attention() {
            self.w1.add_scaled(-step, &grads.w1);
            self.w2.add_scaled(-step, &grads.w2);
            axpy(-step, &grads.c, &mut self.c);
        }
        if let Some(g) = &grads.embeddings {
            self.embeddings.in_vectors.add_scaled(-step, g);
        }
    }

    /// Trains on every prefix instance of `corpus`. Records the corpus concert
    /// ids as training provenance.
    pub fn train(&mut self, corpus: &Corpus, hyper: &TrainHyper) -> Result<Vec<f64>, RecommendError> {
        let instances = TrainingInstance::from_corpus(corpus);
        let trace = self.train_on_instances(&instances, hyper)?;
        self.training_concerts
            .extend(corpus.concert_ids().map(str::to_string));
        Ok(trace)
    }

    /// Mini-batch SGD over `instances`; returns the mean loss of each epoch.
    pub fn train_on_instances(
        &mut self,
        instances: &[TrainingInstance],
        hyper: &TrainHyper,
    ) -> Result<Vec<f64>, RecommendError> {
        if instances.is_empty() {
            return Err(RecommendError::NoInstances);
        }
        if hyper.batch == 0 || !(hyper.lr > 0.0) || hyper.l2 < 0.0 {
            return Err(RecommendError::Config(format!("invalid training hyperparameters {hyper:?}")));
        }
        for inst in instances {
            crate::ranking::check_prefix(&inst.prefix, self.vocab_size())?;
        }

        let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
        let mut order: Vec<usize> = (0..instances.len()).collect();
        let mut trace = Vec::with_capacity(hyper.epochs);

        for _ in 0..hyper.epochs {
            order.shuffle(&mut rng);
            let mut epoch_loss = 0.0;
            for batch in order.chunks(hyper.batch) {
                let partials: Vec<(f64, Gradients)> = batch
                    .par_chunks(CHUNK)
                    .map(|chunk| {
                        let mut g = Gradients::zeros_like(self);
                        let loss: f64 = chunk
                            .iter()
                            .map(|&i| self.accumulate_gradients(&instances[i], &mut g))
                            .sum();
                        (loss, g)
                    })
                    .collect();
                let mut iter = partials.into_iter();
                let (mut loss, mut total) = iter.next().expect("non-empty batch");
                for (l, g) in iter {
                    loss += l;
                    total.add(&g);
                }
                epoch_loss += loss;
                if hyper.l2 > 0.0 {
                    self.l2_step(1.0 - hyper.lr * hyper.l2);
                }
                self.apply(&total, hyper.lr / batch.len() as f64);
            }
            let mean = epoch_loss / instances.len() as f64;
            log::debug!("epoch loss {mean:.6}");
            trace.push(mean);
        }
        if !self.is_finite() {
            return Err(RecommendError::Config("training diverged to non-finite parameters".into()));
        }
        Ok(trace)
    }
}
