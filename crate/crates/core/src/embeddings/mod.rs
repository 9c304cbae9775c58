//! Ragam vectors learned from random walks over the transition network.

mod skipgram;
mod walks;

pub use skipgram::{sgns_gradient, sgns_loss, train_skipgram, SgnsGradient, SkipgramHyper};
pub use walks::{generate_walks, walk_from, WalkConfig};

use std::io::{Read, Write};

use thiserror::Error;

use crate::corpus::RagamId;
use crate::linalg::{dot, softmax, Matrix};

/// Magic bytes of the embedding file.
pub const EMBEDDING_MAGIC: [u8; 4] = *b"RGEM";
pub const EMBEDDING_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("embedding file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Input vectors (the ragam representations) and skip-gram context vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    pub in_vectors: Matrix,
    pub out_vectors: Matrix,
}

impl EmbeddingTable {
    pub fn zeros(vocab_size: usize, dim: usize) -> Self {
        Self {
            in_vectors: Matrix::zeros(vocab_size, dim),
            out_vectors: Matrix::zeros(vocab_size, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.in_vectors.cols()
    }

    pub fn vocab_size(&self) -> usize {
        self.in_vectors.rows()
    }

    pub fn vector(&self, id: RagamId) -> &[f64] {
        self.in_vectors.row(id.index())
    }

    /// Exact softmax neighborhood distribution `P(m | v) ∝ exp(f(m)·f(v))`
    /// over the whole vocabulary.
    pub fn neighborhood_softmax(&self, v: RagamId) -> Vec<f64> {
        let fv = self.vector(v);
        let logits: Vec<f64> = (0..self.vocab_size())
            .map(|m| dot(self.in_vectors.row(m), fv))
            .collect();
        softmax(&logits)
    }

    /// Header `{magic, version, |R|, d}` then row-major little-endian f32,
    /// in-vectors followed by out-vectors.
    pub fn write<W: Write>(&self, mut sink: W) -> Result<(), EmbeddingError> {
        sink.write_all(&EMBEDDING_MAGIC)?;
        sink.write_all(&EMBEDDING_VERSION.to_le_bytes())?;
        sink.write_all(&(self.vocab_size() as u32).to_le_bytes())?;
        sink.write_all(&(self.dim() as u32).to_le_bytes())?;
        for m in [&self.in_vectors, &self.out_vectors] {
            for &x in m.as_slice() {
                sink.write_all(&(x as f32).to_le_bytes())?;
            }
        }
        sink.flush()?;
        Ok(())
    }

    pub fn read<R: Read>(mut source: R) -> Result<Self, EmbeddingError> {
        let mut word = [0u8; 4];
        source.read_exact(&mut word)?;
        if word != EMBEDDING_MAGIC {
            return Err(EmbeddingError::Format("bad magic".into()));
        }
        let mut next_u32 = || -> Result<u32, EmbeddingError> {
            source.read_exact(&mut word)?;
            Ok(u32::from_le_bytes(word))
        };
        let version = next_u32()?;
        if version != EMBEDDING_VERSION {
            return Err(EmbeddingError::Format(format!("unsupported version {version}")));
        }
        let n = next_u32()? as usize;
        let d = next_u32()? as usize;
        let mut bytes = vec![0u8; 2 * n * d * 4];
        source.read_exact(&mut bytes).map_err(|e| {
            EmbeddingError::Format(format!("truncated body ({e})"))
        })?;
        let floats: Vec<f64> = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        let (a, b) = floats.split_at(n * d);
        Ok(Self {
            in_vectors: Matrix::from_vec(n, d, a.to_vec()),
            out_vectors: Matrix::from_vec(n, d, b.to_vec()),
        })
    }
}
