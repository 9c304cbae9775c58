//! Shared ranking contract for every recommender.
//!
//! All models turn a prefix into one score per ragam; ranking masks played
//! ragams, sorts by descending score and breaks ties by ascending id.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::corpus::{RagamId, Vocabulary};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RecommendError {
    #[error("prefix is empty")]
    EmptyPrefix,
    #[error("ragam {0} is not in the vocabulary")]
    UnknownRagam(RagamId),
    #[error("no eligible ragams remain to recommend")]
    KTooLarge,
    #[error("no training instances")]
    NoInstances,
    #[error("no transitions to train on")]
    NoTransitions,
    #[error("invalid configuration: {0}")]
    Config(String),
}

pub fn check_prefix(prefix: &[RagamId], vocab_size: usize) -> Result<(), RecommendError> {
    if prefix.is_empty() {
        return Err(RecommendError::EmptyPrefix);
    }
    match prefix.iter().find(|id| id.index() >= vocab_size) {
        Some(&id) => Err(RecommendError::UnknownRagam(id)),
        None => Ok(()),
    }
}

/// Top `k` of `scores`, optionally excluding ragams in `prefix`.
///
/// Returns `min(k, eligible)` entries. Fails with `KTooLarge` only when
/// nothing is eligible.
pub fn rank_scores(
    scores: &[f64],
    prefix: &[RagamId],
    k: usize,
    mask_played: bool,
) -> Result<Vec<(RagamId, f64)>, RecommendError> {
    let played: BTreeSet<RagamId> = if mask_played {
        prefix.iter().copied().collect()
    } else {
        BTreeSet::new()
    };
    let mut eligible: Vec<(RagamId, f64)> = scores
        .iter()
        .enumerate()
        .map(|(i, &s)| (RagamId::from(i), s))
        .filter(|(id, _)| !played.contains(id))
        .collect();
    if eligible.is_empty() {
        return Err(RecommendError::KTooLarge);
    }
    eligible.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    eligible.truncate(k);
    Ok(eligible)
}

/// A model that scores every ragam given a concert prefix.
pub trait Recommender: Send + Sync {
    /// Short label used in reports.
    fn name(&self) -> &str;

    fn vocabulary(&self) -> &Vocabulary;

    /// One score per vocabulary entry; larger is better. Masking is not
    /// applied here.
    fn scores(&self, prefix: &[RagamId]) -> Result<Vec<f64>, RecommendError>;

    /// Concert ids this model was fit on, for leakage audits.
    fn training_concerts(&self) -> &BTreeSet<String>;

    fn recommend(
        &self,
        prefix: &[RagamId],
        k: usize,
        mask_played: bool,
    ) -> Result<Vec<(RagamId, f64)>, RecommendError> {
        check_prefix(prefix, self.vocabulary().len())?;
        let scores = self.scores(prefix)?;
        rank_scores(&scores, prefix, k, mask_played)
    }
}
