//! Comparison recommenders: item co-occurrence kNN, a factorized first-order
//! Markov chain trained with BPR, training-set popularity, and seeded random
//! scores.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Corpus, RagamId, Vocabulary};
use crate::linalg::{dot, sigmoid, Matrix};
use crate::ranking::{check_prefix, RecommendError, Recommender};

fn concert_ids(corpus: &Corpus) -> BTreeSet<String> {
    corpus.concert_ids().map(str::to_string).collect()
}

/// Within-concert co-occurrence counts with cosine-style normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct CooccurrenceModel {
    pub vocab: Vocabulary,
    /// Symmetric; `counts[i][j]` is the number of concerts containing both.
    pub counts: Matrix,
    /// Number of concerts containing each ragam.
    pub popularity: Vec<f64>,
    pub training_concerts: BTreeSet<String>,
}

impl CooccurrenceModel {
    pub fn fit(corpus: &Corpus) -> Self {
        let n = corpus.vocabulary.len();
        let mut counts = Matrix::zeros(n, n);
        let mut popularity = vec![0.0; n];
        for concert in &corpus.concerts {
            let distinct: Vec<RagamId> = concert
                .items
                .iter()
                .copied()
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();
            for (a, &i) in distinct.iter().enumerate() {
                popularity[i.index()] += 1.0;
                for &j in &distinct[a + 1..] {
                    counts[(i.index(), j.index())] += 1.0;
                    counts[(j.index(), i.index())] += 1.0;
                }
            }
        }
        Self {
            vocab: corpus.vocabulary.clone(),
            counts,
            popularity,
            training_concerts: concert_ids(corpus),
        }
    }

    /// `score(j) = Σ_{i ∈ prefix} counts[i][j] / sqrt(pop[i] · pop[j])` over
    /// the distinct prefix ragams.
    pub fn itemknn_score(&self, prefix: &[RagamId]) -> Result<Vec<f64>, RecommendError> {
        check_prefix(prefix, self.vocab.len())?;
        let n = self.vocab.len();
        let mut scores = vec![0.0; n];
        let distinct: BTreeSet<RagamId> = prefix.iter().copied().collect();
        for i in distinct {
            let pi = self.popularity[i.index()];
            if pi == 0.0 {
                continue;
            }
            let row = self.counts.row(i.index());
            for j in 0..n {
                let pj = self.popularity[j];
                if row[j] > 0.0 && pj > 0.0 && j != i.index() {
                    scores[j] += row[j] / (pi * pj).sqrt();
                }
            }
        }
        Ok(scores)
    }
}

impl Recommender for CooccurrenceModel {
    fn name(&self) -> &str {
        "itemknn"
    }

    fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    fn scores(&self, prefix: &[RagamId]) -> Result<Vec<f64>, RecommendError> {
        self.itemknn_score(prefix)
    }

    fn training_concerts(&self) -> &BTreeSet<String> {
        &self.training_concerts
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FpmcHyper {
    pub factors: usize,
    pub epochs: usize,
    pub lr: f64,
    pub l2: f64,
    pub seed: u64,
}

impl Default for FpmcHyper {
    fn default() -> Self {
        Self {
            factors: 32,
            epochs: 30,
            lr: 0.05,
            l2: 1e-4,
            seed: 42,
        }
    }
}

/// Factorized transition model `x(l -> j) = V_LI[l] · V_IL[j]`.
///
/// Concerts carry no performer identity, so the user-item term of FPMC is
/// dropped and only the item-to-item transition factorization remains.
#[derive(Debug, Clone, PartialEq)]
pub struct FpmcModel {
    pub vocab: Vocabulary,
    /// Factors of the next item.
    pub v_il: Matrix,
    /// Factors of the last item.
    pub v_li: Matrix,
    pub training_concerts: BTreeSet<String>,
}

impl FpmcModel {
    /// BPR over `(last, next)` transitions with one uniformly drawn negative
    /// per positive.
    pub fn fit(corpus: &Corpus, hyper: &FpmcHyper) -> Result<Self, RecommendError> {
        if hyper.factors == 0 {
            return Err(RecommendError::Config("FPMC needs at least one factor".into()));
        }
        let n = corpus.vocabulary.len();
        let transitions: Vec<(usize, usize)> = corpus
            .concerts
            .iter()
            .flat_map(|c| c.items.windows(2).map(|w| (w[0].index(), w[1].index())))
            .collect();
        if transitions.is_empty() || n < 2 {
            return Err(RecommendError::NoTransitions);
        }

        let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
        let bound = 0.1;
        let mut v_il = Matrix::uniform(n, hyper.factors, bound, &mut rng);
        let mut v_li = Matrix::uniform(n, hyper.factors, bound, &mut rng);
        let mut order: Vec<usize> = (0..transitions.len()).collect();
        let (lr, l2) = (hyper.lr, hyper.l2);

        for _ in 0..hyper.epochs {
            order.shuffle(&mut rng);
            for &t in &order {
                let (l, j) = transitions[t];
                let k = loop {
                    let k = rng.gen_range(0..n);
                    if k != j {
                        break k;
                    }
                };
                let last = v_li.row(l).to_vec();
                let pos = v_il.row(j).to_vec();
                let neg = v_il.row(k).to_vec();
                let diff = dot(&last, &pos) - dot(&last, &neg);
                let delta = 1.0 - sigmoid(diff);

                for (f, x) in v_li.row_mut(l).iter_mut().enumerate() {
                    *x += lr * (delta * (pos[f] - neg[f]) - l2 * last[f]);
                }
                for (f, x) in v_il.row_mut(j).iter_mut().enumerate() {
                    *x += lr * (delta * last[f] - l2 * pos[f]);
                }
                for (f, x) in v_il.row_mut(k).iter_mut().enumerate() {
                    *x += lr * (-delta * last[f] - l2 * neg[f]);
                }
            }
        }

        Ok(Self {
            vocab: corpus.vocabulary.clone(),
            v_il,
            v_li,
            training_concerts: concert_ids(corpus),
        })
    }

    pub fn transition_score(&self, last: RagamId, next: RagamId) -> f64 {
        dot(self.v_li.row(last.index()), self.v_il.row(next.index()))
    }

    /// Scores depend only on the last prefix item.
    pub fn fpmc_score(&self, prefix: &[RagamId]) -> Result<Vec<f64>, RecommendError> {
        check_prefix(prefix, self.vocab.len())?;
        let last = *prefix.last().expect("checked non-empty");
        Ok(self.vocab.ids().map(|j| self.transition_score(last, j)).collect())
    }
}

impl Recommender for FpmcModel {
    fn name(&self) -> &str {
        "fpmc"
    }

    fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    fn scores(&self, prefix: &[RagamId]) -> Result<Vec<f64>, RecommendError> {
        self.fpmc_score(prefix)
    }

    fn training_concerts(&self) -> &BTreeSet<String> {
        &self.training_concerts
    }
}

/// Training-set occurrence counts.
#[derive(Debug, Clone, PartialEq)]
pub struct PopularityModel {
    pub vocab: Vocabulary,
    pub counts: Vec<f64>,
    pub training_concerts: BTreeSet<String>,
}

impl PopularityModel {
    pub fn fit(corpus: &Corpus) -> Self {
        let mut counts = vec![0.0; corpus.vocabulary.len()];
        for id in corpus.concerts.iter().flat_map(|c| &c.items) {
            counts[id.index()] += 1.0;
        }
        Self {
            vocab: corpus.vocabulary.clone(),
            counts,
            training_concerts: concert_ids(corpus),
        }
    }

    pub fn popularity_score(&self, prefix: &[RagamId]) -> Result<Vec<f64>, RecommendError> {
        check_prefix(prefix, self.vocab.len())?;
        Ok(self.counts.clone())
    }
}

impl Recommender for PopularityModel {
    fn name(&self) -> &str {
        "popularity"
    }

    fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    fn scores(&self, prefix: &[RagamId]) -> Result<Vec<f64>, RecommendError> {
        self.popularity_score(prefix)
    }

    fn training_concerts(&self) -> &BTreeSet<String> {
        &self.training_concerts
    }
}

/// Uniform random scores, reproducible per `(seed, prefix)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomModel {
    pub vocab: Vocabulary,
    pub seed: u64,
    empty: BTreeSet<String>,
}

impl RandomModel {
    pub fn new(vocab: Vocabulary, seed: u64) -> Self {
        Self {
            vocab,
            seed,
            empty: BTreeSet::new(),
        }
    }
}

impl Recommender for RandomModel {
    fn name(&self) -> &str {
        "random"
    }

    fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    fn scores(&self, prefix: &[RagamId]) -> Result<Vec<f64>, RecommendError> {
        check_prefix(prefix, self.vocab.len())?;
        // FNV-1a over the prefix ids, mixed with the seed.
        let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ self.seed;
        for id in prefix {
            for b in id.0.to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(h);
        Ok((0..self.vocab.len()).map(|_| rng.gen::<f64>()).collect())
    }

    fn training_concerts(&self) -> &BTreeSet<String> {
        &self.empty
    }
}
