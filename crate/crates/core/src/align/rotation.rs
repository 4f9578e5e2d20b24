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

use std::path::Path;

use super::codec::{self, Envelope, ROTATION_MAGIC};
use crate::corpus::ParallelCorpus;
use crate::embed::ContextualEmbeddingSet;
use crate::error::{Error, Result};
use crate::numeric::{svd, Matrix};

/// Largest tolerated `||WᵀW − I||_F` for a rotation.
pub const ORTHOGONALITY_TOLERANCE: f64 = 1e-8;

/// Orthogonal `d×d` map applied to column vectors (`v ↦ W·v`).
#[derive(Debug, Clone, PartialEq)]
pub struct RotationMap {
    w: Matrix,
}

impl RotationMap {
    pub fn new(w: Matrix) -> Result<Self> {
        if w.rows() != w.cols() {
            return Err(Error::DimensionMismatch {
                expected: w.rows(),
                found: w.cols(),
            });
        }
        let err = w.orthonormality_error();
        if err.is_nan() || err >= ORTHOGONALITY_TOLERANCE {
            return Err(Error::Numeric(format!("matrix is not orthogonal (||WᵀW−I|| = {err:e})")));
        }
        Ok(RotationMap { w })
    }

    pub fn identity(dim: usize) -> Self {
        RotationMap {
            w: Matrix::identity(dim),
        }
    }

    pub fn matrix(&self) -> &Matrix {
        &self.w
    }

    pub fn dim(&self) -> usize {
        self.w.rows()
    }

    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.w.mul_vec(v)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        codec::encode(
            ROTATION_MAGIC,
            &Envelope {
                kind: 0,
                dim: self.dim() as u32,
                hidden_dim: 0,
                params: self.w.as_slice().to_vec(),
            },
        )
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let env = codec::decode(ROTATION_MAGIC, bytes)?;
        if env.kind != 0 {
            return Err(Error::Parse {
                line: 0,
                message: format!("unknown rotation kind {}", env.kind),
            });
        }
        let d = env.dim as usize;
        RotationMap::new(Matrix::from_vec(d, d, env.params)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        codec::write_file(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        RotationMap::from_bytes(&codec::read_file(path)?)
    }
}

/// `Σ_i ||W·x_i − y_i||²` over paired rows.
pub fn procrustes_objective(w: &RotationMap, x: &Matrix, y: &Matrix) -> f64 {
    (0..x.rows())
        .map(|r| {
            let wx = w.w.mul_vec(x.row(r)).expect("conformant");
            crate::numeric::squared_distance(&wx, y.row(r))
        })
        .sum()
}

/// Orthogonal `W` minimizing `Σ ||W·x_i − y_i||²`: with `XᵀY = UΣVᵀ`,
/// `W = V·Uᵀ`. Reflections are allowed.
pub fn procrustes_fit(x: &Matrix, y: &Matrix) -> Result<RotationMap> {
    if x.cols() != y.cols() {
        return Err(Error::DimensionMismatch {
            expected: x.cols(),
            found: y.cols(),
        });
    }
    if x.rows() != y.rows() {
        return Err(Error::DimensionMismatch {
            expected: x.rows(),
            found: y.rows(),
        });
    }
    if x.rows() == 0 {
        return Err(Error::Empty("no paired vectors to fit a rotation".into()));
    }
    let cross = x.t_matmul(y)?;
    let d = svd(&cross)?;
    RotationMap::new(d.v.matmul(&d.u.transpose())?)
}

pub fn rotation_apply(w: &RotationMap, set: &ContextualEmbeddingSet) -> Result<ContextualEmbeddingSet> {
    if set.dim() != w.dim() {
        return Err(Error::DimensionMismatch {
            expected: w.dim(),
            found: set.dim(),
        });
    }
    set.map_vectors(w.dim(), |v| w.apply(v))
}

/// Stacks the source and target vectors of every word pair as rows.
pub fn word_pair_rows(
    src: &ContextualEmbeddingSet,
    tgt: &ContextualEmbeddingSet,
    corpus: &ParallelCorpus,
) -> Result<(Matrix, Matrix)> {
    ContextualEmbeddingSet::check_covers_corpus(src, tgt, corpus)?;
    let d = src.dim();
    let n = corpus.num_pairs();
    let mut x = Vec::with_capacity(n * d);
    let mut y = Vec::with_capacity(n * d);
    for (s, e) in corpus.entries().iter().enumerate() {
        for p in e.pairs.iter() {
            x.extend_from_slice(src.vector(s, p.src));
            y.extend_from_slice(tgt.vector(s, p.tgt));
        }
    }
    Ok((Matrix::from_vec(n, d, x)?, Matrix::from_vec(n, d, y)?))
}

/// Word-level rotation fit on the corpus's word pairs.
pub fn rotation_fit(
    src: &ContextualEmbeddingSet,
    tgt: &ContextualEmbeddingSet,
    corpus: &ParallelCorpus,
) -> Result<RotationMap> {
    let (x, y) = word_pair_rows(src, tgt, corpus)?;
    procrustes_fit(&x, &y)
}

/// Rotation fit on sentence vectors, each the mean of its word vectors.
pub fn sentence_rotation_fit(
    src: &ContextualEmbeddingSet,
    tgt: &ContextualEmbeddingSet,
    corpus: &ParallelCorpus,
) -> Result<RotationMap> {
    ContextualEmbeddingSet::check_covers_corpus(src, tgt, corpus)?;
    let d = src.dim();
    let mut x = Vec::with_capacity(corpus.len() * d);
    let mut y = Vec::with_capacity(corpus.len() * d);
    for s in 0..corpus.len() {
        for (set, out) in [(src, &mut x), (tgt, &mut y)] {
            let n = set.token_count(s);
            if n == 0 {
                return Err(Error::EmptySentence { sentence: s });
            }
            let mut mean = vec![0.0; d];
            for row in set.sentence(s).chunks_exact(d) {
                for (m, v) in mean.iter_mut().zip(row) {
                    *m += v;
                }
            }
            out.extend(mean.iter().map(|m| m / n as f64));
        }
    }
    procrustes_fit(&Matrix::from_vec(corpus.len(), d, x)?, &Matrix::from_vec(corpus.len(), d, y)?)
}
