//! Session-based ragam recommendation for Carnatic concert planning.
//!
//! Pipeline: concert logs ([`corpus`]) build a weighted transition network
//! ([`network`]); random walks over it train ragam vectors ([`embeddings`]);
//! the [`recommender`] fuses an attention-pooled sequence vector with averaged
//! hand-picked ragam features to score every forthcoming ragam of a partial
//! concert. [`baselines`] and [`eval`] provide the comparison models and the
//! offline evaluation protocol.

pub mod corpus;
pub mod embeddings;
pub mod linalg;
pub mod network;
pub mod ranking;
pub mod recommender;
pub mod baselines;
pub mod eval;
pub mod persist;
