//! One-hot encoding of the hand-picked ragam features.

use serde::{Deserialize, Serialize};

use crate::corpus::{RagamId, RagamMeta, RagamType, Vocabulary};

/// Which block of the encoding a slot belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureBlock {
    IsJanya,
    RagamType,
    Combo,
    Vakram,
    MelaCategory,
    MelaNumber,
}

impl FeatureBlock {
    pub const ORDER: [FeatureBlock; 6] = [
        FeatureBlock::IsJanya,
        FeatureBlock::RagamType,
        FeatureBlock::Combo,
        FeatureBlock::Vakram,
        FeatureBlock::MelaCategory,
        FeatureBlock::MelaNumber,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FeatureBlock::IsJanya => "is_janya",
            FeatureBlock::RagamType => "ragam_type",
            FeatureBlock::Combo => "combo",
            FeatureBlock::Vakram => "vakram",
            FeatureBlock::MelaCategory => "mela_category",
            FeatureBlock::MelaNumber => "mela_number",
        }
    }
}

/// Frozen layout of the per-song feature vector.
///
/// Blocks, in order:
/// - `is_janya`: `[melakarta, janya]`
/// - `ragam_type`: `[audava, shadava, sampoorna]`
/// - `combo`: `[none, audava, shadava, sampoorna]`
/// - `vakram`: `[no, yes]`
/// - `mela_category`: one slot per category seen at creation, then `none`
/// - `mela_number`: six buckets of twelve melas (or 72 slots), then `absent`
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureEncoding {
    categories: Vec<String>,
    full_mela: bool,
}

const MELA_BUCKET: usize = 12;

impl FeatureEncoding {
    /// Freezes the layout from the categories present in `vocab`.
    pub fn from_vocabulary(vocab: &Vocabulary, full_mela: bool) -> Self {
        let mut categories: Vec<String> = vocab
            .metas()
            .iter()
            .filter_map(|m| m.mela_category.clone())
            .collect();
        categories.sort();
        categories.dedup();
        Self {
            categories,
            full_mela,
        }
    }

    pub fn categories(&self) -> &[String] {
        &self.categories
    }

    pub fn full_mela(&self) -> bool {
        self.full_mela
    }

    fn block_width(&self, block: FeatureBlock) -> usize {
        match block {
            FeatureBlock::IsJanya => 2,
            FeatureBlock::RagamType => 3,
            FeatureBlock::Combo => 4,
            FeatureBlock::Vakram => 2,
            FeatureBlock::MelaCategory => self.categories.len() + 1,
            FeatureBlock::MelaNumber => {
                if self.full_mela {
                    73
                } else {
                    72 / MELA_BUCKET + 1
                }
            }
        }
    }

    /// Human-readable name of every slot of `block`.
    pub fn slot_labels(&self, block: FeatureBlock) -> Vec<String> {
        let owned = |xs: &[&str]| xs.iter().map(|x| x.to_string()).collect();
        match block {
            FeatureBlock::IsJanya => owned(&["melakarta", "janya"]),
            FeatureBlock::RagamType => owned(&["audava", "shadava", "sampoorna"]),
            FeatureBlock::Combo => owned(&["none", "audava", "shadava", "sampoorna"]),
            FeatureBlock::Vakram => owned(&["no", "yes"]),
            FeatureBlock::MelaCategory => self
                .categories
                .iter()
                .cloned()
                .chain(std::iter::once("none".to_string()))
                .collect(),
            FeatureBlock::MelaNumber => {
                let mut labels: Vec<String> = if self.full_mela {
                    (1..=72).map(|m| m.to_string()).collect()
                } else {
                    (0..72 / MELA_BUCKET)
                        .map(|b| format!("{}-{}", b * MELA_BUCKET + 1, (b + 1) * MELA_BUCKET))
                        .collect()
                };
                labels.push("absent".into());
                labels
            }
        }
    }

    /// `(block, offset, width)` for every block in layout order.
    pub fn layout(&self) -> Vec<(FeatureBlock, usize, usize)> {
        let mut offset = 0;
        FeatureBlock::ORDER
            .iter()
            .map(|&b| {
                let w = self.block_width(b);
                let entry = (b, offset, w);
                offset += w;
                entry
            })
            .collect()
    }

    pub fn width(&self) -> usize {
        FeatureBlock::ORDER.iter().map(|&b| self.block_width(b)).sum()
    }

    /// Slot index inside each block, in layout order.
    fn slots(&self, meta: &RagamMeta) -> [usize; 6] {
        let janya = usize::from(meta.is_janya);
        let ty = meta.ragam_type.index();
        let combo = meta.combo.map_or(0, |t: RagamType| t.index() + 1);
        let vakram = usize::from(meta.vakram);
        let category = meta
            .mela_category
            .as_ref()
            .and_then(|c| self.categories.binary_search(c).ok())
            .unwrap_or(self.categories.len());
        let mela = match meta.mela_number {
            Some(m) if self.full_mela => m as usize - 1,
            Some(m) => (m as usize - 1) / MELA_BUCKET,
            None => self.block_width(FeatureBlock::MelaNumber) - 1,
        };
        [janya, ty, combo, vakram, category, mela]
    }

    /// Adds `weight` at every hot slot of `meta` into `out`.
    pub fn accumulate(&self, meta: &RagamMeta, weight: f64, out: &mut [f64]) {
        for ((_, offset, _), slot) in self.layout().into_iter().zip(self.slots(meta)) {
            out[offset + slot] += weight;
        }
    }

    pub fn encode_song(&self, meta: &RagamMeta) -> Vec<f64> {
        let mut out = vec![0.0; self.width()];
        self.accumulate(meta, 1.0, &mut out);
        out
    }

    /// Elementwise mean of the song encodings of `prefix`. Every block of the
    /// result sums to one. Returns zeros for an empty prefix.
    pub fn encode_concert(&self, vocab: &Vocabulary, prefix: &[RagamId]) -> Vec<f64> {
        let mut out = vec![0.0; self.width()];
        if prefix.is_empty() {
            return out;
        }
        let w = 1.0 / prefix.len() as f64;
        for &id in prefix {
            self.accumulate(vocab.meta(id), w, &mut out);
        }
        out
    }

    /// Splits an encoded vector into named blocks.
    pub fn split<'a>(&self, encoded: &'a [f64]) -> Vec<(FeatureBlock, &'a [f64])> {
        self.layout()
            .into_iter()
            .map(|(b, offset, width)| (b, &encoded[offset..offset + width]))
            .collect()
    }
}
