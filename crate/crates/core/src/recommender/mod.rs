//! The ensemble recommender.
//!
//! A prefix `s_1..s_k` of ragam vectors is pooled with an elementwise gate
//!
//! ```text
//! V_c1 = Σ_i σ(W1 s_{i-1} + W2 s_i + c) ⊙ s_i,     s_0 = 0
//! ```
//!
//! and concatenated with `V_c2`, the mean one-hot feature vector of the
//! prefix. `W3` maps the concatenation to one logit per ragam and a softmax
//! gives the score vector. Training minimizes the multi-label cross-entropy
//! against the set of all forthcoming ragams.

mod features;
mod train;

pub use features::{FeatureBlock, FeatureEncoding};
pub use train::{multilabel_cross_entropy, Gradients, TrainHyper, TrainingInstance};

use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{RagamId, Vocabulary};
use crate::embeddings::EmbeddingTable;
use crate::linalg::{sigmoid, softmax, Matrix};
use crate::ranking::{check_prefix, RecommendError, Recommender};

/// Which inputs feed the output layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelVariant {
    /// Attention over frozen walk embeddings plus concert features.
    Full,
    /// Attention over frozen walk embeddings only.
    Attention,
    /// Concert features only.
    ConcertEmbedding,
    /// Attention over embeddings initialized at random and trained with the head.
    AttentionScratch,
}

impl ModelVariant {
    pub const ALL: [ModelVariant; 4] = [
        ModelVariant::AttentionScratch,
        ModelVariant::Attention,
        ModelVariant::ConcertEmbedding,
        ModelVariant::Full,
    ];

    pub fn uses_attention(self) -> bool {
        !matches!(self, ModelVariant::ConcertEmbedding)
    }

    pub fn uses_features(self) -> bool {
        matches!(self, ModelVariant::Full | ModelVariant::ConcertEmbedding)
    }

    pub fn trains_embeddings(self) -> bool {
        matches!(self, ModelVariant::AttentionScratch)
    }

    pub fn label(self) -> &'static str {
        match self {
            ModelVariant::Full => "ragamai",
            ModelVariant::Attention => "attention",
            ModelVariant::ConcertEmbedding => "concert-embedding",
            ModelVariant::AttentionScratch => "attention-without-node2vec",
        }
    }
}

impl std::str::FromStr for ModelVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModelVariant::ALL
            .into_iter()
            .find(|v| v.label() == s || (s == "full" && *v == ModelVariant::Full))
            .ok_or_else(|| format!("unknown variant {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub variant: ModelVariant,
    /// 72-way mela-number one-hot instead of six buckets.
    pub full_mela: bool,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            variant: ModelVariant::Full,
            full_mela: false,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RagamAIModel {
    pub vocab: Vocabulary,
    pub encoding: FeatureEncoding,
    pub variant: ModelVariant,
    pub embeddings: EmbeddingTable,
    pub w1: Matrix,
    pub w2: Matrix,
    pub c: Vec<f64>,
    /// `|R| × (d + F)` for the full model, narrower for single-input variants.
    pub w3: Matrix,
    /// Concert ids behind every trained structure this model depends on.
    pub training_concerts: BTreeSet<String>,
}

/// Intermediate values of one forward pass.
#[derive(Debug, Clone)]
pub(crate) struct Forward {
    /// Gate vector per prefix position (empty without attention).
    pub gates: Vec<Vec<f64>>,
    /// Input to the output layer.
    pub input: Vec<f64>,
    pub probs: Vec<f64>,
}

impl RagamAIModel {
    pub fn new(vocab: Vocabulary, embeddings: EmbeddingTable, config: &ModelConfig) -> Result<Self, RecommendError> {
        if embeddings.vocab_size() != vocab.len() {
            return Err(RecommendError::Config(format!(
                "embedding table has {} rows for a vocabulary of {}",
                embeddings.vocab_size(),
                vocab.len()
            )));
        }
        let d = embeddings.dim();
        if d == 0 {
            return Err(RecommendError::Config("embedding dim must be positive".into()));
        }
        let encoding = FeatureEncoding::from_vocabulary(&vocab, config.full_mela);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let bound = 0.5 / d as f64;

        let mut embeddings = embeddings;
        if config.variant.trains_embeddings() {
            embeddings.in_vectors = Matrix::uniform(vocab.len(), d, bound, &mut rng);
            embeddings.out_vectors = Matrix::zeros(vocab.len(), d);
        }
        let input_width = if config.variant.uses_attention() { d } else { 0 }
            + if config.variant.uses_features() { encoding.width() } else { 0 };

        Ok(Self {
            w1: Matrix::uniform(d, d, bound, &mut rng),
            w2: Matrix::uniform(d, d, bound, &mut rng),
            c: vec![0.0; d],
            w3: Matrix::uniform(vocab.len(), input_width, bound, &mut rng),
            vocab,
            encoding,
            variant: config.variant,
            embeddings,
            training_concerts: BTreeSet::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.embeddings.dim()
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn is_finite(&self) -> bool {
        self.w1.is_finite()
            && self.w2.is_finite()
            && self.c.iter().all(|x| x.is_finite())
            && self.w3.is_finite()
            && self.embeddings.in_vectors.is_finite()
    }

    fn gates_and_pool(&self, prefix: &[RagamId]) -> (Vec<Vec<f64>>, Vec<f64>) {
        let d = self.dim();
        let mut pooled = vec![0.0; d];
        let mut gates = Vec::with_capacity(prefix.len());
        let mut pre_prev = vec![0.0; d];
        let mut pre_cur = vec![0.0; d];
        for (i, &id) in prefix.iter().enumerate() {
            let s = self.embeddings.vector(id);
            self.w2.matvec_into(s, &mut pre_cur);
            if i > 0 {
                self.w1
                    .matvec_into(self.embeddings.vector(prefix[i - 1]), &mut pre_prev);
            } else {
                pre_prev.iter_mut().for_each(|x| *x = 0.0);
            }
            let gate: Vec<f64> = (0..d)
                .map(|j| sigmoid(pre_prev[j] + pre_cur[j] + self.c[j]))
                .collect();
            for j in 0..d {
                pooled[j] += gate[j] * s[j];
            }
            gates.push(gate);
        }
        (gates, pooled)
    }

    /// Attention-pooled sequence vector `V_c1`.
    pub fn attention_aggregate(&self, prefix: &[RagamId]) -> Result<Vec<f64>, RecommendError> {
        check_prefix(prefix, self.vocab_size())?;
        Ok(self.gates_and_pool(prefix).1)
    }

    /// Mean one-hot feature vector `V_c2`.
    pub fn feature_embed_concert(&self, prefix: &[RagamId]) -> Result<Vec<f64>, RecommendError> {
        check_prefix(prefix, self.vocab_size())?;
        Ok(self.encoding.encode_concert(&self.vocab, prefix))
    }

    pub(crate) fn forward(&self, prefix: &[RagamId]) -> Forward {
        let mut input = Vec::with_capacity(self.w3.cols());
        let mut gates = Vec::new();
        if self.variant.uses_attention() {
            let (g, pooled) = self.gates_and_pool(prefix);
            gates = g;
            input.extend_from_slice(&pooled);
        }
        if self.variant.uses_features() {
            input.extend(self.encoding.encode_concert(&self.vocab, prefix));
        }
        let logits = self.w3.matvec(&input);
        Forward {
            gates,
            input,
            probs: softmax(&logits),
        }
    }

    /// Softmax score per ragam.
    pub fn forward_scores(&self, prefix: &[RagamId]) -> Result<Vec<f64>, RecommendError> {
        check_prefix(prefix, self.vocab_size())?;
        Ok(self.forward(prefix).probs)
    }

    /// Raw output-layer logits, before the softmax.
    pub fn logits(&self, prefix: &[RagamId]) -> Result<Vec<f64>, RecommendError> {
        check_prefix(prefix, self.vocab_size())?;
        Ok(self.w3.matvec(&self.forward(prefix).input))
    }
}

impl Recommender for RagamAIModel {
    fn name(&self) -> &str {
        self.variant.label()
    }

    fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    fn scores(&self, prefix: &[RagamId]) -> Result<Vec<f64>, RecommendError> {
        self.forward_scores(prefix)
    }

    fn training_concerts(&self) -> &BTreeSet<String> {
        &self.training_concerts
    }
}
