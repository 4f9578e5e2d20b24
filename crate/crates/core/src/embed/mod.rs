// Copyright 2026 The ctxalign Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! Contextual and static embedding stores.
//!
//! Contextual sets use a little-endian binary layout:
//!
//! ```text
//! "CTXE" | version u32 = 1 | dim u32 | sentence_count u32
//! per sentence: token_count u32 | token_count·dim f32
//! ```
//!
//! Values are held as `f64` in memory; `f32 → f64 → f32` is exact so
//! load/write round-trips are bit-exact.

mod augment;
mod static_vectors;

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

pub use augment::{augment_set, sentence_augment};
pub use static_vectors::{
    load_static_vectors, mean_center, normalize_center_normalize, parse_static_vectors, unit_normalize,
    StaticEmbeddingTable,
};

use crate::corpus::{ParallelCorpus, Sentence};
use crate::error::{Error, Result};

pub const EMBEDDING_MAGIC: [u8; 4] = *b"CTXE";
pub const EMBEDDING_VERSION: u32 = 1;

/// Per-token vectors for every sentence of one corpus side.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextualEmbeddingSet {
    dim: usize,
    /// `offsets[s]..offsets[s + 1]` are the token rows of sentence `s`.
    offsets: Vec<usize>,
    data: Vec<f64>,
}

impl ContextualEmbeddingSet {
    pub fn new(dim: usize) -> Self {
        ContextualEmbeddingSet {
            dim,
            offsets: vec![0],
            data: Vec::new(),
        }
    }

    /// Builds a set from per-sentence lists of token vectors.
    pub fn from_sentences(dim: usize, sentences: &[Vec<Vec<f64>>]) -> Result<Self> {
        let mut set = ContextualEmbeddingSet::new(dim);
        for s in sentences {
            set.push_sentence(s.iter().map(Vec::as_slice))?;
        }
        Ok(set)
    }

    pub fn push_sentence<'a>(&mut self, vectors: impl IntoIterator<Item = &'a [f64]>) -> Result<()> {
        let mut count = 0;
        for v in vectors {
            if v.len() != self.dim {
                self.data.truncate(self.offsets.last().copied().unwrap_or(0) * self.dim);
                return Err(Error::DimensionMismatch {
                    expected: self.dim,
                    found: v.len(),
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                self.data.truncate(self.offsets.last().copied().unwrap_or(0) * self.dim);
                return Err(Error::Numeric("embedding component is not finite".into()));
            }
            self.data.extend_from_slice(v);
            count += 1;
        }
        let last = *self.offsets.last().expect("offsets start at 0");
        self.offsets.push(last + count);
        Ok(())
    }

    /// Appends a sentence from a flat `token_count × dim` buffer.
    pub fn push_flat(&mut self, flat: &[f64]) -> Result<()> {
        if self.dim == 0 || flat.len() % self.dim != 0 {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: flat.len(),
            });
        }
        self.push_sentence(flat.chunks_exact(self.dim))
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_sentences(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn total_tokens(&self) -> usize {
        *self.offsets.last().expect("offsets start at 0")
    }

    pub fn is_empty(&self) -> bool {
        self.total_tokens() == 0
    }

    pub fn token_count(&self, sentence: usize) -> usize {
        self.offsets[sentence + 1] - self.offsets[sentence]
    }

    /// Flat `token_count × dim` slice of one sentence.
    #[inline]
    pub fn sentence(&self, sentence: usize) -> &[f64] {
        &self.data[self.offsets[sentence] * self.dim..self.offsets[sentence + 1] * self.dim]
    }

    #[inline]
    pub fn vector(&self, sentence: usize, token: usize) -> &[f64] {
        let row = self.offsets[sentence] + token;
        debug_assert!(row < self.offsets[sentence + 1]);
        &self.data[row * self.dim..(row + 1) * self.dim]
    }

    /// Global row index of a token, in (sentence, token) order.
    #[inline]
    pub fn row_index(&self, sentence: usize, token: usize) -> usize {
        self.offsets[sentence] + token
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    /// The sentences in `range`, renumbered from zero.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Result<Self> {
        if range.start > range.end || range.end > self.num_sentences() {
            return Err(Error::IndexOutOfRange {
                sentence: range.end,
                side: "embeddings",
                index: range.start,
                len: self.num_sentences(),
            });
        }
        let mut out = ContextualEmbeddingSet::new(self.dim);
        for s in range {
            out.push_flat(self.sentence(s))?;
        }
        Ok(out)
    }

    /// Same layout, each vector replaced by `f(vector)` of dimension `out_dim`.
    pub fn map_vectors<F>(&self, out_dim: usize, mut f: F) -> Result<Self>
    where
        F: FnMut(&[f64]) -> Result<Vec<f64>>,
    {
        let mut data = Vec::with_capacity(self.total_tokens() * out_dim);
        for v in self.data.chunks_exact(self.dim.max(1)) {
            let out = f(v)?;
            if out.len() != out_dim {
                return Err(Error::DimensionMismatch {
                    expected: out_dim,
                    found: out.len(),
                });
            }
            data.extend(out);
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numeric("mapped embedding is not finite".into()));
        }
        Ok(ContextualEmbeddingSet {
            dim: out_dim,
            offsets: self.offsets.clone(),
            data,
        })
    }

    /// Checks that sentence count and per-sentence token counts match one
    /// side of `corpus`.
    pub fn check_covers<'a>(&self, sentences: impl ExactSizeIterator<Item = &'a Sentence>) -> Result<()> {
        if sentences.len() != self.num_sentences() {
            return Err(Error::LineCountMismatch {
                what: format!(
                    "embedding set has {} sentences, corpus side has {}",
                    self.num_sentences(),
                    sentences.len()
                ),
            });
        }
        for (k, s) in sentences.enumerate() {
            if s.len() != self.token_count(k) {
                return Err(Error::LineCountMismatch {
                    what: format!(
                        "sentence {k}: {} vectors for {} tokens",
                        self.token_count(k),
                        s.len()
                    ),
                });
            }
        }
        Ok(())
    }

    pub fn check_covers_corpus(src: &Self, tgt: &Self, corpus: &ParallelCorpus) -> Result<()> {
        src.check_covers(corpus.entries().iter().map(|e| &e.src))?;
        tgt.check_covers(corpus.entries().iter().map(|e| &e.tgt))?;
        if src.dim != tgt.dim {
            return Err(Error::DimensionMismatch {
                expected: src.dim,
                found: tgt.dim,
            });
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + 4 * self.num_sentences() + 4 * self.data.len());
        out.extend_from_slice(&EMBEDDING_MAGIC);
        out.extend_from_slice(&EMBEDDING_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.extend_from_slice(&(self.num_sentences() as u32).to_le_bytes());
        for s in 0..self.num_sentences() {
            out.extend_from_slice(&(self.token_count(s) as u32).to_le_bytes());
            for x in self.sentence(s) {
                out.extend_from_slice(&(*x as f32).to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader { bytes, pos: 0 };
        let magic: [u8; 4] = r.take(4, "magic")?.try_into().expect("4 bytes");
        if magic != EMBEDDING_MAGIC {
            return Err(Error::BadMagic {
                expected: EMBEDDING_MAGIC,
                found: magic,
            });
        }
        let version = r.u32("version")?;
        if version != EMBEDDING_VERSION {
            return Err(Error::UnsupportedVersion(version));
        }
        let dim = r.u32("dim")? as usize;
        let count = r.u32("sentence count")? as usize;
        if dim == 0 && count > 0 {
            return Err(Error::DimensionMismatch { expected: 1, found: 0 });
        }
        let mut set = ContextualEmbeddingSet::new(dim);
        for s in 0..count {
            let tokens = r.u32(&format!("token count of sentence {s}"))? as usize;
            let payload = r.take(tokens * dim * 4, &format!("vectors of sentence {s} of {count}"))?;
            let flat: Vec<f64> = payload
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
                .collect();
            set.push_sentence(flat.chunks_exact(dim))?;
        }
        if r.pos != bytes.len() {
            return Err(Error::Parse {
                line: 0,
                message: format!("{} trailing bytes after {count} sentences", bytes.len() - r.pos),
            });
        }
        Ok(set)
    }
}

pub fn load_embeddings(path: &Path) -> Result<ContextualEmbeddingSet> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    ContextualEmbeddingSet::from_bytes(&bytes)
}

pub fn write_embeddings(set: &ContextualEmbeddingSet, path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(&set.to_bytes()).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub(crate) struct ByteReader<'a> {
    pub bytes: &'a [u8],
    pub pos: usize,
}

impl<'a> ByteReader<'a> {
    pub fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::Truncated(format!(
                "{what}: need {n} bytes at offset {}, have {}",
                self.pos,
                self.bytes.len() - self.pos
            ))),
        }
    }

    pub fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    pub fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }

    pub fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    pub fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }

    pub fn finished(&self) -> bool {
        self.pos == self.bytes.len()
    }
}
