//! Versioned model container shared by the CLI and the service.
//!
//! Layout (little-endian):
//! `b"RGMD"`, `u32` version, `u32` header length, JSON header, `u32` tensor
//! count, then per tensor `u16` name length, name, `u32` rows, `u32` cols and
//! `rows * cols` f32 values. Parameters are computed in f64 and stored as f32.

use std::collections::BTreeSet;
use std::io::{Read, Write};
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::{CooccurrenceModel, FpmcModel, PopularityModel, RandomModel};
use crate::corpus::{CorpusError, RagamId, RagamMeta, Vocabulary};
use crate::embeddings::EmbeddingTable;
use crate::linalg::Matrix;
use crate::ranking::{RecommendError, Recommender};
use crate::recommender::{FeatureEncoding, ModelVariant, RagamAIModel};

pub const MODEL_MAGIC: [u8; 4] = *b"RGMD";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum PersistError {
    #[error("malformed model file: {0}")]
    Format(String),
    #[error("invalid vocabulary in model file: {0}")]
    Vocabulary(#[from] CorpusError),
    #[error("bad model header: {0}")]
    Header(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Ragamai,
    Itemknn,
    Fpmc,
    Popularity,
    Random,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    kind: ModelKind,
    vocab: Vec<RagamMeta>,
    training_concerts: BTreeSet<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    variant: Option<ModelVariant>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    encoding: Option<FeatureEncoding>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

/// Any persisted recommender.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyModel {
    Ragamai(RagamAIModel),
    Itemknn(CooccurrenceModel),
    Fpmc(FpmcModel),
    Popularity(PopularityModel),
    Random(RandomModel),
}

impl AnyModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            AnyModel::Ragamai(_) => ModelKind::Ragamai,
            AnyModel::Itemknn(_) => ModelKind::Itemknn,
            AnyModel::Fpmc(_) => ModelKind::Fpmc,
            AnyModel::Popularity(_) => ModelKind::Popularity,
            AnyModel::Random(_) => ModelKind::Random,
        }
    }

    fn inner(&self) -> &dyn Recommender {
        match self {
            AnyModel::Ragamai(m) => m,
            AnyModel::Itemknn(m) => m,
            AnyModel::Fpmc(m) => m,
            AnyModel::Popularity(m) => m,
            AnyModel::Random(m) => m,
        }
    }

    pub fn write<W: Write>(&self, mut sink: W) -> Result<(), PersistError> {
        let mut header = Header {
            kind: self.kind(),
            vocab: self.vocabulary().metas().to_vec(),
            training_concerts: self.training_concerts().clone(),
            variant: None,
            encoding: None,
            seed: None,
        };
        let mut tensors: IndexMap<&str, Matrix> = IndexMap::new();
        match self {
            AnyModel::Ragamai(m) => {
                header.variant = Some(m.variant);
                header.encoding = Some(m.encoding.clone());
                tensors.insert("embeddings.in", m.embeddings.in_vectors.clone());
                tensors.insert("embeddings.out", m.embeddings.out_vectors.clone());
                tensors.insert("w1", m.w1.clone());
                tensors.insert("w2", m.w2.clone());
                tensors.insert("c", Matrix::from_vec(1, m.c.len(), m.c.clone()));
                tensors.insert("w3", m.w3.clone());
            }
            AnyModel::Itemknn(m) => {
                tensors.insert("counts", m.counts.clone());
                tensors.insert("popularity", Matrix::from_vec(1, m.popularity.len(), m.popularity.clone()));
            }
            AnyModel::Fpmc(m) => {
                tensors.insert("v_il", m.v_il.clone());
                tensors.insert("v_li", m.v_li.clone());
            }
            AnyModel::Popularity(m) => {
                tensors.insert("counts", Matrix::from_vec(1, m.counts.len(), m.counts.clone()));
            }
            AnyModel::Random(m) => header.seed = Some(m.seed),
        }

        let json = serde_json::to_vec(&header)?;
        sink.write_all(&MODEL_MAGIC)?;
        sink.write_all(&MODEL_VERSION.to_le_bytes())?;
        sink.write_all(&(json.len() as u32).to_le_bytes())?;
        sink.write_all(&json)?;
        sink.write_all(&(tensors.len() as u32).to_le_bytes())?;
        for (name, t) in &tensors {
            sink.write_all(&(name.len() as u16).to_le_bytes())?;
            sink.write_all(name.as_bytes())?;
            sink.write_all(&(t.rows() as u32).to_le_bytes())?;
            sink.write_all(&(t.cols() as u32).to_le_bytes())?;
            for &x in t.as_slice() {
                sink.write_all(&(x as f32).to_le_bytes())?;
            }
        }
        sink.flush()?;
        Ok(())
    }

    pub fn read<R: Read>(mut source: R) -> Result<Self, PersistError> {
        let mut magic = [0u8; 4];
        source.read_exact(&mut magic)?;
        if magic != MODEL_MAGIC {
            return Err(PersistError::Format("bad magic".into()));
        }
        let version = read_u32(&mut source)?;
        if version != MODEL_VERSION {
            return Err(PersistError::Format(format!("unsupported version {version}")));
        }
        let header_len = read_u32(&mut source)? as usize;
        let mut json = vec![0u8; header_len];
        source.read_exact(&mut json)?;
        let header: Header = serde_json::from_slice(&json)?;

        let n_tensors = read_u32(&mut source)?;
        let mut tensors: IndexMap<String, Matrix> = IndexMap::new();
        for _ in 0..n_tensors {
            let mut len = [0u8; 2];
            source.read_exact(&mut len)?;
            let mut name = vec![0u8; u16::from_le_bytes(len) as usize];
            source.read_exact(&mut name)?;
            let name = String::from_utf8(name).map_err(|_| PersistError::Format("tensor name is not UTF-8".into()))?;
            let rows = read_u32(&mut source)? as usize;
            let cols = read_u32(&mut source)? as usize;
            let mut bytes = vec![0u8; rows * cols * 4];
            source
                .read_exact(&mut bytes)
                .map_err(|e| PersistError::Format(format!("tensor {name:?} truncated ({e})")))?;
            let data = bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
                .collect();
            tensors.insert(name, Matrix::from_vec(rows, cols, data));
        }

        let vocab = Vocabulary::new(header.vocab)?;
        let n = vocab.len();
        let mut take = |name: &str, rows: Option<usize>| -> Result<Matrix, PersistError> {
            let t = tensors
                .shift_remove(name)
                .ok_or_else(|| PersistError::Format(format!("missing tensor {name:?}")))?;
            match rows {
                Some(r) if t.rows() != r => Err(PersistError::Format(format!(
                    "tensor {name:?} has {} rows, expected {r}",
                    t.rows()
                ))),
                _ => Ok(t),
            }
        };
        let training_concerts = header.training_concerts;

        let model = match header.kind {
            ModelKind::Ragamai => {
                let variant = header
                    .variant
                    .ok_or_else(|| PersistError::Format("ragamai model without variant".into()))?;
                let encoding = header
                    .encoding
                    .ok_or_else(|| PersistError::Format("ragamai model without feature encoding".into()))?;
                let embeddings = EmbeddingTable {
                    in_vectors: take("embeddings.in", Some(n))?,
                    out_vectors: take("embeddings.out", Some(n))?,
                };
                let d = embeddings.dim();
                let w1 = take("w1", Some(d))?;
                let w2 = take("w2", Some(d))?;
                let c = take("c", Some(1))?.as_slice().to_vec();
                let w3 = take("w3", Some(n))?;
                let expected = if variant.uses_attention() { d } else { 0 }
                    + if variant.uses_features() { encoding.width() } else { 0 };
                if w1.cols() != d || w2.cols() != d || c.len() != d || w3.cols() != expected {
                    return Err(PersistError::Format("parameter shapes do not match the embedding dim".into()));
                }
                AnyModel::Ragamai(RagamAIModel {
                    vocab,
                    encoding,
                    variant,
                    embeddings,
                    w1,
                    w2,
                    c,
                    w3,
                    training_concerts,
                })
            }
            ModelKind::Itemknn => AnyModel::Itemknn(CooccurrenceModel {
                counts: take("counts", Some(n))?,
                popularity: take("popularity", Some(1))?.as_slice().to_vec(),
                vocab,
                training_concerts,
            }),
            ModelKind::Fpmc => AnyModel::Fpmc(FpmcModel {
                v_il: take("v_il", Some(n))?,
                v_li: take("v_li", Some(n))?,
                vocab,
                training_concerts,
            }),
            ModelKind::Popularity => AnyModel::Popularity(PopularityModel {
                counts: take("counts", Some(1))?.as_slice().to_vec(),
                vocab,
                training_concerts,
            }),
            ModelKind::Random => {
                let seed = header
                    .seed
                    .ok_or_else(|| PersistError::Format("random model without seed".into()))?;
                AnyModel::Random(RandomModel::new(vocab, seed))
            }
        };
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), PersistError> {
        let file = std::fs::File::create(path)?;
        self.write(std::io::BufWriter::new(file))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PersistError> {
        let file = std::fs::File::open(path)?;
        Self::read(std::io::BufReader::new(file))
    }

    /// The model as it behaves after a save/load round trip.
    pub fn quantized(&self) -> Self {
        let mut buf = Vec::new();
        self.write(&mut buf).expect("in-memory write");
        Self::read(buf.as_slice()).expect("own output parses")
    }
}

fn read_u32<R: Read>(source: &mut R) -> Result<u32, PersistError> {
    let mut word = [0u8; 4];
    source.read_exact(&mut word)?;
    Ok(u32::from_le_bytes(word))
}

impl Recommender for AnyModel {
    fn name(&self) -> &str {
        self.inner().name()
    }

    fn vocabulary(&self) -> &Vocabulary {
        self.inner().vocabulary()
    }

    fn scores(&self, prefix: &[RagamId]) -> Result<Vec<f64>, RecommendError> {
        self.inner().scores(prefix)
    }

    fn training_concerts(&self) -> &BTreeSet<String> {
        self.inner().training_concerts()
    }
}

impl From<RagamAIModel> for AnyModel {
    fn from(m: RagamAIModel) -> Self {
        AnyModel::Ragamai(m)
    }
}

impl From<CooccurrenceModel> for AnyModel {
    fn from(m: CooccurrenceModel) -> Self {
        AnyModel::Itemknn(m)
    }
}

impl From<FpmcModel> for AnyModel {
    fn from(m: FpmcModel) -> Self {
        AnyModel::Fpmc(m)
    }
}

impl From<PopularityModel> for AnyModel {
    fn from(m: PopularityModel) -> Self {
        AnyModel::Popularity(m)
    }
}

impl From<RandomModel> for AnyModel {
    fn from(m: RandomModel) -> Self {
        AnyModel::Random(m)
    }
}
