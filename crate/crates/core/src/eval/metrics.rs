//! Binary-relevance ranking metrics.

use std::collections::BTreeSet;

use crate::corpus::RagamId;

/// `|top-k ∩ relevant| / k`. The denominator is always `k`, even when fewer
/// than `k` items were recommended.
pub fn precision_at_k(recommended: &[RagamId], relevant: &BTreeSet<RagamId>, k: usize) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let hits = recommended
        .iter()
        .take(k)
        .filter(|id| relevant.contains(id))
        .count();
    hits as f64 / k as f64
}

/// Ideal DCG for `n_relevant` relevant items cut at `k`.
pub fn ideal_dcg(n_relevant: usize, k: usize) -> f64 {
    (1..=n_relevant.min(k))
        .map(|rank| 1.0 / (rank as f64 + 1.0).log2())
        .sum()
}

/// DCG with `1 / log2(rank + 1)` discount for each relevant hit in the top `k`,
/// normalized by the ideal DCG of the instance. `None` if `relevant` is empty.
pub fn ndcg_at_k(recommended: &[RagamId], relevant: &BTreeSet<RagamId>, k: usize) -> Option<f64> {
    if relevant.is_empty() {
        return None;
    }
    if k == 0 {
        return Some(0.0);
    }
    let dcg: f64 = recommended
        .iter()
        .take(k)
        .enumerate()
        .filter(|(_, id)| relevant.contains(id))
        .map(|(i, _)| 1.0 / (i as f64 + 2.0).log2())
        .sum();
    Some(dcg / ideal_dcg(relevant.len(), k))
}
