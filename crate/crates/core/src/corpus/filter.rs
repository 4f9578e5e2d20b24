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

use std::collections::HashSet;

use super::{ParallelCorpus, WordPairSet};
use crate::error::{Error, Result};

/// Drops evaluation pairs whose word-type pair occurs in `train`, and
/// pairs whose source and target tokens match case-insensitively.
/// Sentences left with no pairs stay in the corpus as distractors.
pub fn filter_eval_pairs(eval: &ParallelCorpus, train: &ParallelCorpus) -> Result<ParallelCorpus> {
    if !train.is_empty()
        && (eval.src_language() != train.src_language() || eval.tgt_language() != train.tgt_language())
    {
        return Err(Error::Invalid(format!(
            "language pair {}-{} does not match training pair {}-{}",
            eval.src_language(),
            eval.tgt_language(),
            train.src_language(),
            train.tgt_language()
        )));
    }
    let seen: HashSet<(&str, &str)> = train
        .entries()
        .iter()
        .flat_map(|e| e.pairs.iter().map(move |p| e.words(p)))
        .collect();
    Ok(eval.map_pairs(|_, e| {
        let mut kept = e.pairs.clone();
        kept.retain(|p| {
            let (s, t) = e.words(p);
            !seen.contains(&(s, t)) && s.to_lowercase() != t.to_lowercase()
        });
        kept
    }))
}

/// Keeps a pair only if neither its source type nor its target type has
/// appeared in an earlier kept pair. Sentence text is unchanged.
pub fn dedupe_first_occurrence(corpus: &ParallelCorpus) -> ParallelCorpus {
    let mut src_types: HashSet<String> = HashSet::new();
    let mut tgt_types: HashSet<String> = HashSet::new();
    corpus.map_pairs(|_, e| {
        let mut kept = Vec::new();
        for p in e.pairs.iter() {
            let (s, t) = e.words(p);
            if src_types.contains(s) || tgt_types.contains(t) {
                continue;
            }
            src_types.insert(s.to_owned());
            tgt_types.insert(t.to_owned());
            kept.push((p.src, p.tgt));
        }
        WordPairSet::from_pairs(kept).expect("subset of a one-to-one set")
    })
}

#[cfg(test)]
mod tests {
    use super::super::testutil::{corpus, entry};
    use super::*;
    use std::collections::HashMap;

    fn kept_words(c: &ParallelCorpus) -> Vec<(String, String)> {
        c.entries()
            .iter()
            .flat_map(|e| {
                e.pairs
                    .iter()
                    .map(|p| {
                        let (s, t) = e.words(p);
                        (s.to_owned(), t.to_owned())
                    })
                    .collect::<Vec<_>>()
            })
            .collect()
    }

    #[test]
    fn drops_seen_and_exact_match_pairs() {
        let train = corpus(vec![entry("the cat", "die Katze", &[(0, 0), (1, 1)])]);
        let eval = corpus(vec![
            entry("a cat", "eine Katze", &[(0, 0), (1, 1)]),
            entry("in 2007 .", "2007 in .", &[(1, 0), (2, 2)]),
            entry("the dog", "der Hund", &[(1, 1)]),
            entry("Paris", "paris", &[(0, 0)]),
        ]);
        let out = filter_eval_pairs(&eval, &train).unwrap();
        assert_eq!(
            kept_words(&out),
            vec![("a".into(), "eine".into()), ("dog".into(), "Hund".into())]
        );
        // Emptied sentences stay as distractors.
        assert_eq!(out.len(), 4);
        assert!(out.entries()[1].pairs.is_empty());
        assert_eq!(out.entries()[1].src.text(), "in 2007 .");
    }

    #[test]
    fn filter_is_idempotent() {
        let train = corpus(vec![entry("x y", "u v", &[(0, 0)])]);
        let eval = corpus(vec![
            entry("x y z", "u v Z", &[(0, 0), (1, 1), (2, 2)]),
            entry("y", "v", &[(0, 0)]),
        ]);
        let once = filter_eval_pairs(&eval, &train).unwrap();
        let twice = filter_eval_pairs(&once, &train).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn rejects_language_mismatch() {
        let train = corpus(vec![entry("a", "b", &[])]).reversed();
        let eval = corpus(vec![entry("a", "b", &[])]);
        assert!(filter_eval_pairs(&eval, &train).is_err());
    }

    #[test]
    fn dedupe_keeps_first_occurrence() {
        let c = corpus(vec![entry("a", "x", &[(0, 0)]), entry("a", "x", &[(0, 0)])]);
        let d = dedupe_first_occurrence(&c);
        assert_eq!(d.entries()[0].pairs.len(), 1);
        assert!(d.entries()[1].pairs.is_empty());
        assert_eq!(d.entries()[1].src.text(), "a");
    }

    #[test]
    fn dedupe_drops_target_type_repeat() {
        // Scan oracle: seen-sets grow only with kept pairs.
        let c = corpus(vec![entry("a b", "x x", &[(0, 0), (1, 1)])]);
        assert_eq!(kept_words(&dedupe_first_occurrence(&c)), vec![("a".into(), "x".into())]);
    }

    #[test]
    fn dedupe_distinct_types_is_identity() {
        let c = corpus(vec![entry("a b", "x y", &[(0, 1), (1, 0)]), entry("c", "z", &[(0, 0)])]);
        assert_eq!(dedupe_first_occurrence(&c), c);
    }

    #[test]
    fn dedupe_types_occur_at_most_once() {
        let c = corpus(vec![
            entry("a b c", "x y z", &[(0, 0), (1, 1), (2, 2)]),
            entry("c a d", "z w v", &[(0, 0), (1, 1), (2, 2)]),
            entry("d e", "q v", &[(0, 0), (1, 1)]),
        ]);
        let d = dedupe_first_occurrence(&c);
        let mut src = HashMap::new();
        let mut tgt = HashMap::new();
        for (s, t) in kept_words(&d) {
            *src.entry(s).or_insert(0) += 1;
            *tgt.entry(t).or_insert(0) += 1;
        }
        assert!(src.values().chain(tgt.values()).all(|&n| n == 1));
    }
}
