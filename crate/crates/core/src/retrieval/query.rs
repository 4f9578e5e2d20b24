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

use serde::Serialize;

use super::pool::{build_pool, TokenRef};
use super::scoring::{scores_for, Similarity};
use crate::corpus::ParallelCorpus;
use crate::embed::ContextualEmbeddingSet;
use crate::error::{Error, Result};

/// A ranked target occurrence with its surrounding sentence.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Neighbor {
    pub sentence: usize,
    pub token: usize,
    pub score: f64,
    pub word: String,
    pub text: String,
}

/// The `top_n` target positions closest to one source occurrence. The
/// query pool for CSLS penalties is every source position.
pub fn query_neighbors(
    query: TokenRef,
    src: &ContextualEmbeddingSet,
    tgt: &ContextualEmbeddingSet,
    corpus: &ParallelCorpus,
    sim: Similarity,
    k: usize,
    top_n: usize,
) -> Result<Vec<Neighbor>> {
    ContextualEmbeddingSet::check_covers_corpus(src, tgt, corpus)?;
    if query.sentence >= corpus.len() || query.token >= src.token_count(query.sentence) {
        return Err(Error::IndexOutOfRange {
            sentence: query.sentence,
            side: "source",
            index: query.token,
            len: if query.sentence < corpus.len() { src.token_count(query.sentence) } else { 0 },
        });
    }
    let queries = build_pool(src)?;
    let candidates = build_pool(tgt)?;
    let q = queries.refs().binary_search(&query).expect("query is in the pool");
    let scores = scores_for(&queries, q, &candidates, sim, k)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    Ok(order
        .into_iter()
        .take(top_n)
        .map(|i| {
            let r = candidates.refs()[i];
            let sentence = &corpus.entries()[r.sentence].tgt;
            Neighbor {
                sentence: r.sentence,
                token: r.token,
                score: scores[i],
                word: sentence.tokens()[r.token].clone(),
                text: sentence.text(),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::testutil::{corpus, entry};

    #[test]
    fn ranks_and_clamps() {
        let c = corpus(vec![entry("a b", "x y", &[(0, 0), (1, 1)]), entry("a", "x", &[(0, 0)])]);
        let set = ContextualEmbeddingSet::from_sentences(
            2,
            &[vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![vec![0.8, 0.6]]],
        )
        .unwrap();
        let top = query_neighbors(TokenRef::new(1, 0), &set, &set, &c, Similarity::Csls, 10, 1).unwrap();
        assert_eq!((top[0].sentence, top[0].token), (1, 0));
        assert_eq!(top[0].word, "x");
        let all = query_neighbors(TokenRef::new(0, 0), &set, &set, &c, Similarity::Cosine, 10, 99).unwrap();
        assert_eq!(all.len(), 3);
        assert!(all.windows(2).all(|w| w[0].score >= w[1].score));
        assert_eq!(all[0].text, "x y");
        assert!(query_neighbors(TokenRef::new(0, 2), &set, &set, &c, Similarity::Cosine, 10, 1).is_err());
    }
}
