//! Synthetic concert corpora with a planted first-order transition structure.
//!
//! Ragams sit on a ring. Each ragam sends most of its transition mass to 3-5
//! successors within a few steps of it on either side, and the rest uniformly
//! to every other ragam, so a concert tends to fill a neighborhood of its
//! opening ragam. Mela numbers (and so mela categories) also follow ring order,
//! which gives the hand-picked features a weak positional signal.

use std::ops::RangeInclusive;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Concert, Corpus, CorpusError, RagamId, RagamMeta, RagamType, Vocabulary};

/// Melakarta chakras, six melas each.
const CHAKRAS: [&str; 12] = [
    "indu", "netra", "agni", "veda", "bana", "rutu", "rishi", "vasu", "brahma", "disi", "rudra",
    "aditya",
];

/// Successors are drawn from this many positions on each side on the ring.
const SUCCESSOR_WINDOW: usize = 3;
/// Total probability placed on the planted successors.
const PLANTED_MASS: f64 = 0.95;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntheticConfig {
    pub n_concerts: usize,
    pub n_ragams: usize,
    pub seed: u64,
    pub length_range: RangeInclusive<usize>,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n_concerts: 1000,
            n_ragams: 40,
            seed: 7,
            length_range: 9..=16,
        }
    }
}

impl SyntheticConfig {
    fn validate(&self) -> Result<(), CorpusError> {
        let (min, max) = (*self.length_range.start(), *self.length_range.end());
        if min < 1 {
            return Err(CorpusError::Config("minimum concert length must be at least 1".into()));
        }
        if min > max {
            return Err(CorpusError::Config(format!("empty length range {min}..={max}")));
        }
        if self.n_ragams < max {
            return Err(CorpusError::Config(format!(
                "{} ragams cannot fill a {max}-song concert without repetition",
                self.n_ragams
            )));
        }
        Ok(())
    }
}

pub fn chakra_of(mela: u8) -> &'static str {
    CHAKRAS[(mela as usize - 1) / 6]
}

fn ring_mela(i: usize, n: usize) -> u8 {
    (1 + i * 72 / n).min(72) as u8
}

fn sample_type<R: Rng>(rng: &mut R) -> RagamType {
    let u: f64 = rng.gen();
    if u < 0.35 {
        RagamType::Audava
    } else if u < 0.55 {
        RagamType::Shadava
    } else {
        RagamType::Sampoorna
    }
}

fn synthetic_vocabulary<R: Rng>(n: usize, rng: &mut R) -> Vec<RagamMeta> {
    let mut used_melas = [false; 73];
    (0..n)
        .map(|i| {
            let mela = ring_mela(i, n);
            let melakarta = rng.gen_bool(0.25) && !used_melas[mela as usize];
            let name = format!("ragam-{i:03}");
            if melakarta {
                used_melas[mela as usize] = true;
                return RagamMeta {
                    id: RagamId::from(i),
                    name,
                    is_janya: false,
                    mela_number: Some(mela),
                    mela_category: Some(chakra_of(mela).to_string()),
                    ragam_type: RagamType::Sampoorna,
                    combo: None,
                    vakram: false,
                };
            }
            let ragam_type = sample_type(rng);
            let combo = if rng.gen_bool(0.1) {
                let others: Vec<RagamType> = RagamType::ALL
                    .into_iter()
                    .filter(|t| *t != ragam_type)
                    .collect();
                others.choose(rng).copied()
            } else {
                None
            };
            RagamMeta {
                id: RagamId::from(i),
                name,
                is_janya: true,
                mela_number: Some(mela),
                mela_category: Some(chakra_of(mela).to_string()),
                ragam_type,
                combo,
                vakram: rng.gen_bool(0.25),
            }
        })
        .collect()
}

fn planted_rows<R: Rng>(n: usize, rng: &mut R) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| {
            let mut candidates: Vec<usize> = (1..=SUCCESSOR_WINDOW)
                .flat_map(|off| [(i + off) % n, (i + n - off % n) % n])
                .filter(|&j| j != i)
                .collect();
            candidates.dedup();
            candidates.sort_unstable();
            candidates.dedup();
            candidates.shuffle(rng);
            let m = rng.gen_range(3..=5).min(candidates.len());
            let successors = &candidates[..m];

            let raw: Vec<f64> = successors.iter().map(|_| rng.gen_range(0.5..1.5)).collect();
            let raw_total: f64 = raw.iter().sum();
            let rest = n - 1 - m;
            let planted = if rest == 0 { 1.0 } else { PLANTED_MASS };

            let mut row = vec![0.0; n];
            if rest > 0 {
                let background = (1.0 - planted) / rest as f64;
                for (j, p) in row.iter_mut().enumerate() {
                    if j != i {
                        *p = background;
                    }
                }
            }
            for (&j, w) in successors.iter().zip(&raw) {
                row[j] = planted * w / raw_total;
            }
            row
        })
        .collect()
}

/// The planted row-stochastic transition matrix for `n_ragams` ragams under
/// `seed`. Exposed for tests and diagnostics; `generate_synthetic` samples
/// concerts from exactly this matrix.
pub fn planted_chain(config: &SyntheticConfig) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let _ = synthetic_vocabulary(config.n_ragams, &mut rng);
    planted_rows(config.n_ragams, &mut rng)
}

/// Generates a corpus deterministically from `config.seed`.
///
/// Concert lengths are uniform over `length_range`; the first ragam is
/// uniform and each following one is drawn from the planted row of its
/// predecessor restricted to ragams not yet played.
pub fn generate_synthetic(config: &SyntheticConfig) -> Result<Corpus, CorpusError> {
    config.validate()?;
    let n = config.n_ragams;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let vocabulary = Vocabulary::new(synthetic_vocabulary(n, &mut rng))?;
    let rows = planted_rows(n, &mut rng);

    let mut concerts = Vec::with_capacity(config.n_concerts);
    let mut played = vec![false; n];
    for c in 0..config.n_concerts {
        let len = rng.gen_range(config.length_range.clone());
        played.iter_mut().for_each(|p| *p = false);

        let mut current = rng.gen_range(0..n);
        let mut items = Vec::with_capacity(len);
        items.push(RagamId::from(current));
        played[current] = true;

        while items.len() < len {
            let row = &rows[current];
            let total: f64 = (0..n).filter(|&j| !played[j]).map(|j| row[j]).sum();
            let next = if total > 0.0 {
                let mut u = rng.gen::<f64>() * total;
                let mut chosen = None;
                for j in (0..n).filter(|&j| !played[j]) {
                    if row[j] <= 0.0 {
                        continue;
                    }
                    chosen = Some(j);
                    u -= row[j];
                    if u <= 0.0 {
                        break;
                    }
                }
                chosen.expect("positive mass implies a candidate")
            } else {
                let free: Vec<usize> = (0..n).filter(|&j| !played[j]).collect();
                *free.choose(&mut rng).expect("n_ragams >= max length")
            };
            items.push(RagamId::from(next));
            played[next] = true;
            current = next;
        }

        concerts.push(Concert {
            concert_id: format!("S{c:05}"),
            date: None,
            items,
        });
    }

    Ok(Corpus {
        vocabulary,
        concerts,
    })
}
