//! Training-side pipeline: network, walks, skip-gram, then the recommender.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::corpus::Corpus;
use crate::embeddings::{generate_walks, train_skipgram, EmbeddingTable, SkipgramHyper, WalkConfig};
use crate::network::RaagaNetwork;
use crate::recommender::{ModelConfig, ModelVariant, RagamAIModel, TrainHyper};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub walk: WalkConfig,
    pub skipgram: SkipgramHyper,
    pub train: TrainHyper,
    pub full_mela: bool,
}

/// Node2vec embeddings of the network built from `train`, together with the
/// concert ids the network was built from.
pub fn fit_embeddings(train: &Corpus, cfg: &PipelineConfig) -> Result<(EmbeddingTable, BTreeSet<String>), EvalError> {
    let net = RaagaNetwork::build(train);
    let walks = generate_walks(&net, &cfg.walk)?;
    let (table, losses) = train_skipgram(&walks, train.vocabulary.len(), &cfg.skipgram)?;
    log::info!(
        "skip-gram on {} walks, final epoch loss {:?}",
        walks.len(),
        losses.last()
    );
    let sources = net.source_concerts().into_iter().map(str::to_string).collect();
    Ok((table, sources))
}

/// Trains a variant on top of precomputed embeddings. `sources` is the
/// provenance of `table` and is merged into the model's.
pub fn fit_ragamai_with_embeddings(
    train: &Corpus,
    variant: ModelVariant,
    table: EmbeddingTable,
    sources: &BTreeSet<String>,
    cfg: &PipelineConfig,
) -> Result<RagamAIModel, EvalError> {
    let model_cfg = ModelConfig {
        variant,
        full_mela: cfg.full_mela,
        seed: cfg.train.seed,
    };
    let mut model = RagamAIModel::new(train.vocabulary.clone(), table, &model_cfg)?;
    if !variant.trains_embeddings() {
        model.training_concerts.extend(sources.iter().cloned());
    }
    let trace = model.train(train, &cfg.train)?;
    log::info!("{} trained, final epoch loss {:?}", variant.label(), trace.last());
    Ok(model)
}

pub fn fit_ragamai(train: &Corpus, variant: ModelVariant, cfg: &PipelineConfig) -> Result<RagamAIModel, EvalError> {
    let (table, sources) = fit_embeddings(train, cfg)?;
    fit_ragamai_with_embeddings(train, variant, table, &sources, cfg)
}
