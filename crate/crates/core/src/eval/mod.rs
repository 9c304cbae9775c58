//! Offline evaluation: concert-level splits, prefix expansion, precision@k
//! and nDCG@k curves, leakage audits and the ablation grid.

mod ablation;
mod metrics;
mod pipeline;

pub use ablation::{run_ablation, AblationRow, AblationTable};
pub use metrics::{ideal_dcg, ndcg_at_k, precision_at_k};
pub use pipeline::{fit_embeddings, fit_ragamai, fit_ragamai_with_embeddings, PipelineConfig};

use std::collections::BTreeSet;
use std::io::Write;

use indexmap::IndexMap;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Concert, Corpus, RagamId};
use crate::embeddings::EmbeddingError;
use crate::ranking::{RecommendError, Recommender};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("need at least 2 concerts to split, got {0}")]
    TooFewConcerts(usize),
    #[error("split leaves the test set empty")]
    EmptyTestSet,
    #[error("split leaves the training set empty")]
    EmptyTrainSet,
    #[error("test split yields no evaluation instances")]
    NoInstances,
    #[error("{structure} was built from {count} test concerts (e.g. {example:?})")]
    Leakage {
        structure: String,
        count: usize,
        example: String,
    },
    #[error("model {0:?} uses a different vocabulary than the test corpus")]
    VocabularyMismatch(String),
    #[error(transparent)]
    Recommend(#[from] RecommendError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
}

/// Concert-level split. `ratio` of the concerts (rounded) go to training;
/// both halves keep corpus order.
pub fn split_corpus(corpus: &Corpus, ratio: f64, seed: u64) -> Result<(Corpus, Corpus), EvalError> {
    let n = corpus.concerts.len();
    if n < 2 {
        return Err(EvalError::TooFewConcerts(n));
    }
    let n_train = (ratio.clamp(0.0, 1.0) * n as f64).round() as usize;
    if n_train >= n {
        return Err(EvalError::EmptyTestSet);
    }
    if n_train == 0 {
        return Err(EvalError::EmptyTrainSet);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut train_idx = order[..n_train].to_vec();
    let mut test_idx = order[n_train..].to_vec();
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    let pick = |idx: &[usize]| -> Vec<Concert> { idx.iter().map(|&i| corpus.concerts[i].clone()).collect() };
    Ok((corpus.with_concerts(pick(&train_idx)), corpus.with_concerts(pick(&test_idx))))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalInstance {
    pub prefix: Vec<RagamId>,
    /// All ragams from the cut point to the end of the concert.
    pub relevant: BTreeSet<RagamId>,
}

/// One instance per cut point `j in 1..len`: the first `j` ragams against
/// the set of the rest.
pub fn expand_prefixes(concert: &Concert) -> Vec<EvalInstance> {
    (1..concert.items.len())
        .map(|j| EvalInstance {
            prefix: concert.items[..j].to_vec(),
            relevant: concert.items[j..].iter().copied().collect(),
        })
        .collect()
}

pub fn expand_corpus(corpus: &Corpus) -> Vec<EvalInstance> {
    corpus.concerts.iter().flat_map(expand_prefixes).collect()
}

/// Fails if any of `sources` names a concert in `test`.
pub fn audit_leakage<'a>(
    structure: &str,
    sources: impl IntoIterator<Item = &'a str>,
    test: &Corpus,
) -> Result<(), EvalError> {
    let test_ids: BTreeSet<&str> = test.concert_ids().collect();
    let leaked: Vec<&str> = sources.into_iter().filter(|id| test_ids.contains(id)).collect();
    match leaked.first() {
        None => Ok(()),
        Some(first) => Err(EvalError::Leakage {
            structure: structure.to_string(),
            count: leaked.len(),
            example: first.to_string(),
        }),
    }
}

/// Precision and nDCG curves of one model, keyed by `k` as a string.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelCurves {
    pub name: String,
    pub precision: IndexMap<String, f64>,
    pub ndcg: IndexMap<String, f64>,
}

impl ModelCurves {
    pub fn precision_at(&self, k: usize) -> f64 {
        self.precision[&k.to_string()]
    }

    pub fn ndcg_at(&self, k: usize) -> f64 {
        self.ndcg[&k.to_string()]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub models: Vec<ModelCurves>,
    pub instances: usize,
    pub seed: u64,
}

impl EvalReport {
    pub fn model(&self, name: &str) -> Option<&ModelCurves> {
        self.models.iter().find(|m| m.name == name)
    }

    /// `model,k,precision,ndcg` rows.
    pub fn write_csv<W: Write>(&self, mut sink: W) -> std::io::Result<()> {
        writeln!(sink, "model,k,precision,ndcg")?;
        for m in &self.models {
            for (k, p) in &m.precision {
                writeln!(sink, "{},{},{},{}", m.name, k, p, m.ndcg[k])?;
            }
        }
        sink.flush()
    }
}

/// Per-instance metric rows for one model: `[precision@1..k_max, ndcg@1..k_max]`.
fn score_instances(
    model: &dyn Recommender,
    instances: &[EvalInstance],
    k_max: usize,
) -> Result<Vec<(Vec<f64>, Vec<f64>)>, EvalError> {
    instances
        .par_iter()
        .map(|inst| {
            let ranked: Vec<RagamId> = match model.recommend(&inst.prefix, k_max, true) {
                Ok(r) => r.into_iter().map(|(id, _)| id).collect(),
                Err(RecommendError::KTooLarge) => Vec::new(),
                Err(e) => return Err(EvalError::from(e)),
            };
            let precision = (1..=k_max)
                .map(|k| precision_at_k(&ranked, &inst.relevant, k))
                .collect();
            let ndcg = (1..=k_max)
                .map(|k| ndcg_at_k(&ranked, &inst.relevant, k).expect("instances have relevant items"))
                .collect();
            Ok((precision, ndcg))
        })
        .collect()
}

/// Scores every prefix instance of `test` with every model and averages the
/// metrics per `k` over instances. Every model's training provenance is
/// audited against the test concerts first.
pub fn run_evaluation(
    models: &[&dyn Recommender],
    test: &Corpus,
    k_max: usize,
    seed: u64,
) -> Result<EvalReport, EvalError> {
    for model in models {
        if model.vocabulary() != &test.vocabulary {
            return Err(EvalError::VocabularyMismatch(model.name().to_string()));
        }
        audit_leakage(
            model.name(),
            model.training_concerts().iter().map(String::as_str),
            test,
        )?;
    }
    let instances = expand_corpus(test);
    if instances.is_empty() {
        return Err(EvalError::NoInstances);
    }
    let n = instances.len() as f64;

    let mut curves = Vec::with_capacity(models.len());
    for model in models {
        let rows = score_instances(*model, &instances, k_max)?;
        let mut p_sum = vec![0.0; k_max];
        let mut n_sum = vec![0.0; k_max];
        for (p, g) in &rows {
            for k in 0..k_max {
                p_sum[k] += p[k];
                n_sum[k] += g[k];
            }
        }
        let key = |k: usize| (k + 1).to_string();
        curves.push(ModelCurves {
            name: model.name().to_string(),
            precision: (0..k_max).map(|k| (key(k), p_sum[k] / n)).collect(),
            ndcg: (0..k_max).map(|k| (key(k), n_sum[k] / n)).collect(),
        });
    }

    Ok(EvalReport {
        models: curves,
        instances: instances.len(),
        seed,
    })
}
