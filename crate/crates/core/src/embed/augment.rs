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

use super::ContextualEmbeddingSet;
use crate::error::{Error, Result};

/// `[word; mean; max; min]` where the pooled statistics are taken
/// component-wise over `sentence_vectors`.
pub fn sentence_augment<V: AsRef<[f64]>>(word_vec: &[f64], sentence_vectors: &[V]) -> Result<Vec<f64>> {
    let dim = word_vec.len();
    if sentence_vectors.is_empty() {
        return Err(Error::Empty("sentence has no vectors to pool".into()));
    }
    let mut sum = vec![0.0; dim];
    let mut max = vec![f64::NEG_INFINITY; dim];
    let mut min = vec![f64::INFINITY; dim];
    for v in sentence_vectors {
        let v = v.as_ref();
        if v.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: v.len(),
            });
        }
        for i in 0..dim {
            sum[i] += v[i];
            max[i] = max[i].max(v[i]);
            min[i] = min[i].min(v[i]);
        }
    }
    let n = sentence_vectors.len() as f64;
    let mut out = Vec::with_capacity(4 * dim);
    out.extend_from_slice(word_vec);
    out.extend(sum.iter().map(|s| s / n));
    out.extend(max);
    out.extend(min);
    Ok(out)
}

/// Augments every token of `set` with its own sentence's pooled vector.
pub fn augment_set(set: &ContextualEmbeddingSet) -> Result<ContextualEmbeddingSet> {
    let dim = set.dim();
    let mut out = ContextualEmbeddingSet::new(4 * dim);
    for s in 0..set.num_sentences() {
        let rows: Vec<&[f64]> = set.sentence(s).chunks_exact(dim.max(1)).collect();
        let augmented = rows
            .iter()
            .map(|w| sentence_augment(w, &rows))
            .collect::<Result<Vec<_>>>()?;
        out.push_sentence(augmented.iter().map(Vec::as_slice))?;
    }
    Ok(out)
}
