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

use serde::{Deserialize, Serialize};

use crate::embed::ContextualEmbeddingSet;
use crate::error::{Error, Result};

/// A token position: sentence index and token index within it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TokenRef {
    pub sentence: usize,
    pub token: usize,
}

impl TokenRef {
    pub fn new(sentence: usize, token: usize) -> Self {
        TokenRef { sentence, token }
    }
}

/// Unit-normalized vectors with a back-reference to their token position.
/// Zero vectors stay zero, so their cosine with anything is 0.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidatePool {
    dim: usize,
    unit: Vec<f64>,
    refs: Vec<TokenRef>,
}

impl CandidatePool {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.refs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.refs.is_empty()
    }

    pub fn refs(&self) -> &[TokenRef] {
        &self.refs
    }

    pub fn unit(&self, i: usize) -> &[f64] {
        &self.unit[i * self.dim..(i + 1) * self.dim]
    }

    /// All unit vectors, row-major.
    pub fn units(&self) -> &[f64] {
        &self.unit
    }

    fn push(&mut self, v: &[f64], r: TokenRef) {
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 0.0 {
            self.unit.extend(v.iter().map(|x| x / n));
        } else {
            self.unit.extend(std::iter::repeat(0.0).take(self.dim));
        }
        self.refs.push(r);
    }
}

/// Every token of every sentence, in `(sentence, token)` order.
pub fn build_pool(set: &ContextualEmbeddingSet) -> Result<CandidatePool> {
    if set.total_tokens() == 0 {
        return Err(Error::Empty("embedding set has no tokens".into()));
    }
    let mut pool = CandidatePool {
        dim: set.dim(),
        unit: Vec::with_capacity(set.as_flat().len()),
        refs: Vec::with_capacity(set.total_tokens()),
    };
    for s in 0..set.num_sentences() {
        for (t, v) in set.sentence(s).chunks_exact(set.dim()).enumerate() {
            pool.push(v, TokenRef::new(s, t));
        }
    }
    Ok(pool)
}

/// The listed positions, in the order given.
pub fn pool_from_refs(set: &ContextualEmbeddingSet, refs: &[TokenRef]) -> Result<CandidatePool> {
    if refs.is_empty() {
        return Err(Error::Empty("no positions selected for the pool".into()));
    }
    let mut pool = CandidatePool {
        dim: set.dim(),
        unit: Vec::with_capacity(refs.len() * set.dim()),
        refs: Vec::with_capacity(refs.len()),
    };
    for &r in refs {
        if r.sentence >= set.num_sentences() || r.token >= set.token_count(r.sentence) {
            return Err(Error::IndexOutOfRange {
                sentence: r.sentence,
                side: "pool",
                index: r.token,
                len: if r.sentence < set.num_sentences() { set.token_count(r.sentence) } else { 0 },
            });
        }
        pool.push(set.vector(r.sentence, r.token), r);
    }
    Ok(pool)
}
