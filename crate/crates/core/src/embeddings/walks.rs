//! Second-order biased random walks over the transition network.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::EmbeddingError;
use crate::corpus::RagamId;
use crate::network::RaagaNetwork;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct WalkConfig {
    pub walks_per_node: usize,
    pub walk_length: usize,
    /// Return parameter: weight 1/p on stepping straight back to the previous node.
    pub p: f64,
    /// In-out parameter: weight 1/q on stepping to a node the previous node does not reach.
    pub q: f64,
    pub seed: u64,
}

impl Default for WalkConfig {
    fn default() -> Self {
        Self {
            walks_per_node: 10,
            walk_length: 20,
            p: 1.0,
            q: 1.0,
            seed: 42,
        }
    }
}

impl WalkConfig {
    pub fn validate(&self) -> Result<(), EmbeddingError> {
        if self.walks_per_node < 1 {
            return Err(EmbeddingError::Config("walks_per_node must be >= 1".into()));
        }
        if self.walk_length < 2 {
            return Err(EmbeddingError::Config("walk_length must be >= 2".into()));
        }
        if !(self.p > 0.0 && self.p.is_finite()) || !(self.q > 0.0 && self.q.is_finite()) {
            return Err(EmbeddingError::Config("p and q must be positive and finite".into()));
        }
        Ok(())
    }
}

/// SplitMix64 finalizer, used to derive independent per-walk seeds.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub(crate) fn walk_seed(seed: u64, node: usize, walk_index: usize) -> u64 {
    mix(mix(mix(seed) ^ node as u64) ^ walk_index as u64)
}

fn pick<R: Rng>(candidates: &[(RagamId, u64)], weight: impl Fn(RagamId, u64) -> f64, rng: &mut R) -> RagamId {
    let total: f64 = candidates.iter().map(|&(x, w)| weight(x, w)).sum();
    let mut u = rng.gen::<f64>() * total;
    for &(x, w) in candidates {
        u -= weight(x, w);
        if u < 0.0 {
            return x;
        }
    }
    candidates[candidates.len() - 1].0
}

/// One walk starting at `start`. A walk stops early when it reaches a node
/// with no out-edges.
pub fn walk_from(net: &RaagaNetwork, start: RagamId, cfg: &WalkConfig, rng: &mut impl Rng) -> Vec<RagamId> {
    let mut walk = Vec::with_capacity(cfg.walk_length);
    walk.push(start);
    while walk.len() < cfg.walk_length {
        let current = walk[walk.len() - 1];
        let out = net.neighbors(current.index());
        if out.is_empty() {
            break;
        }
        let next = if walk.len() == 1 {
            pick(out, |_, w| w as f64, rng)
        } else {
            let prev = walk[walk.len() - 2];
            pick(
                out,
                |x, w| {
                    let bias = if x == prev {
                        1.0 / cfg.p
                    } else if net.has_edge(prev, x) {
                        1.0
                    } else {
                        1.0 / cfg.q
                    };
                    w as f64 * bias
                },
                rng,
            )
        };
        walk.push(next);
    }
    walk
}

/// `walks_per_node` walks from every node, ordered by round then start node.
/// Each walk draws from its own stream seeded by `(seed, node, round)`, so the
/// output does not depend on thread scheduling.
pub fn generate_walks(net: &RaagaNetwork, cfg: &WalkConfig) -> Result<Vec<Vec<RagamId>>, EmbeddingError> {
    cfg.validate()?;
    let n = net.n_nodes();
    Ok((0..cfg.walks_per_node * n)
        .into_par_iter()
        .map(|flat| {
            let (round, node) = (flat / n, flat % n);
            let mut rng = ChaCha8Rng::seed_from_u64(walk_seed(cfg.seed, node, round));
            walk_from(net, RagamId::from(node), cfg, &mut rng)
        })
        .collect())
}
