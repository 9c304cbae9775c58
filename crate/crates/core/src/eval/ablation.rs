//! Four-variant ablation grid at k = 15.

use serde::{Deserialize, Serialize};

use super::{fit_embeddings, fit_ragamai_with_embeddings, run_evaluation, split_corpus, EvalError, PipelineConfig};
use crate::corpus::Corpus;
use crate::ranking::Recommender;
use crate::recommender::ModelVariant;

pub const ABLATION_K: usize = 15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub variant: ModelVariant,
    pub precision: f64,
    pub ndcg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub seed: u64,
    pub instances: usize,
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    pub fn row(&self, variant: ModelVariant) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.variant == variant)
    }

    /// Tab-separated `variant precision@15 ndcg@15`.
    pub fn to_tsv(&self) -> String {
        let mut out = format!("variant\tprecision@{ABLATION_K}\tndcg@{ABLATION_K}\n");
        for r in &self.rows {
            out.push_str(&format!("{}\t{:.4}\t{:.4}\n", r.variant.label(), r.precision, r.ndcg));
        }
        out
    }
}

/// Splits `corpus` 80/20 with `seed`, trains the four variants on the train
/// half (sharing one set of node2vec embeddings) and scores them on the rest.
/// Every seed in `cfg` is replaced by `seed`.
pub fn run_ablation(corpus: &Corpus, seed: u64, cfg: &PipelineConfig) -> Result<AblationTable, EvalError> {
    let mut cfg = cfg.clone();
    cfg.walk.seed = seed;
    cfg.skipgram.seed = seed;
    cfg.train.seed = seed;

    let (train, test) = split_corpus(corpus, 0.8, seed)?;
    let (table, sources) = fit_embeddings(&train, &cfg)?;
    let models = ModelVariant::ALL
        .iter()
        .map(|&v| fit_ragamai_with_embeddings(&train, v, table.clone(), &sources, &cfg))
        .collect::<Result<Vec<_>, _>>()?;
    let refs: Vec<&dyn Recommender> = models.iter().map(|m| m as &dyn Recommender).collect();
    let report = run_evaluation(&refs, &test, ABLATION_K, seed)?;

    let rows = ModelVariant::ALL
        .iter()
        .zip(&report.models)
        .map(|(&variant, curves)| AblationRow {
            variant,
            precision: curves.precision_at(ABLATION_K),
            ndcg: curves.ndcg_at(ABLATION_K),
        })
        .collect();
    Ok(AblationTable {
        seed,
        instances: report.instances,
        rows,
    })
}
