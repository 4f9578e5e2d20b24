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

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::Serialize;

use super::{pair_outcomes, AnalysisDirection};
use crate::corpus::{ParallelCorpus, Sentence};
use crate::error::{Error, Result};
use crate::retrieval::RetrievalReport;

/// Word-type frequency ranks for one language; rank 1 is the most
/// frequent type, ties broken lexicographically.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RankTable {
    ranks: HashMap<String, usize>,
}

impl RankTable {
    pub fn from_sentences<'a>(sentences: impl IntoIterator<Item = &'a Sentence>) -> Self {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for s in sentences {
            for t in s.tokens() {
                *counts.entry(t.as_str()).or_default() += 1;
            }
        }
        let mut types: Vec<(&str, usize)> = counts.into_iter().collect();
        types.sort_unstable_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        RankTable {
            ranks: types
                .into_iter()
                .enumerate()
                .map(|(i, (w, _))| (w.to_owned(), i + 1))
                .collect(),
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.ranks.len()
    }

    /// Rank of `word`, or `vocab_size + 1` for an unseen type.
    pub fn rank(&self, word: &str) -> usize {
        self.ranks.get(word).copied().unwrap_or(self.ranks.len() + 1)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrequencyRanks {
    pub src: RankTable,
    pub tgt: RankTable,
}

impl FrequencyRanks {
    pub fn from_corpus(corpus: &ParallelCorpus) -> Self {
        FrequencyRanks {
            src: RankTable::from_sentences(corpus.src_sentences()),
            tgt: RankTable::from_sentences(corpus.tgt_sentences()),
        }
    }
}

/// Bin edges `e_0 < e_1 < …`; bin `i` is `[e_i, e_{i+1})` and the last
/// edge may be `+∞`.
pub const DEFAULT_BIN_EDGES: [f64; 6] = [0.0, 10.0, 100.0, 1000.0, 10000.0, f64::INFINITY];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FreqBin {
    pub lo: f64,
    /// `None` for an unbounded bin.
    pub hi: Option<f64>,
    pub pairs: usize,
    pub correct: usize,
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FreqRankCurve {
    pub bins: Vec<FreqBin>,
}

impl FreqRankCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("lo,hi,pairs,correct,accuracy\n");
        for b in &self.bins {
            let hi = b.hi.map(|h| h.to_string()).unwrap_or_else(|| "inf".into());
            let acc = b.accuracy.map(|a| a.to_string()).unwrap_or_default();
            writeln!(out, "{},{hi},{},{},{acc}", b.lo, b.pairs, b.correct).expect("string write");
        }
        out
    }
}

/// Retrieval accuracy binned by `|rank(target type) − rank(source type)|`.
///
/// `corpus` is the evaluation corpus the report was computed on; ranks
/// usually come from the training corpus.
pub fn freq_rank_curve(
    report: &RetrievalReport,
    corpus: &ParallelCorpus,
    ranks: &FrequencyRanks,
    edges: &[f64],
    direction: AnalysisDirection,
) -> Result<FreqRankCurve> {
    if edges.len() < 2 {
        return Err(Error::Invalid("at least two bin edges are required".into()));
    }
    if edges.iter().any(|e| e.is_nan()) || edges.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Invalid(format!("bin edges must be strictly increasing: {edges:?}")));
    }
    let mut counts = vec![(0usize, 0usize); edges.len() - 1];
    for (src, tgt, correct) in pair_outcomes(report, direction) {
        let entry = corpus.entries().get(src.sentence).ok_or_else(|| Error::IndexOutOfRange {
            sentence: src.sentence,
            side: "source",
            index: src.token,
            len: corpus.len(),
        })?;
        let (sw, tw) = match (entry.src.tokens().get(src.token), entry.tgt.tokens().get(tgt.token)) {
            (Some(s), Some(t)) => (s, t),
            _ => {
                return Err(Error::Invalid(format!(
                    "report position ({}, {}) does not fit the corpus",
                    src.sentence, src.token
                )))
            }
        };
        let delta = ranks.tgt.rank(tw).abs_diff(ranks.src.rank(sw)) as f64;
        let bin = edges
            .windows(2)
            .position(|w| w[0] <= delta && delta < w[1])
            .ok_or_else(|| Error::Invalid(format!("rank difference {delta} falls outside the bin edges")))?;
        counts[bin].0 += 1;
        counts[bin].1 += usize::from(correct);
    }
    Ok(FreqRankCurve {
        bins: edges
            .windows(2)
            .zip(counts)
            .map(|(w, (n, c))| FreqBin {
                lo: w[0],
                hi: w[1].is_finite().then_some(w[1]),
                pairs: n,
                correct: c,
                accuracy: (n > 0).then(|| c as f64 / n as f64),
            })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::tests::report_with;
    use crate::corpus::testutil::{corpus, entry};

    #[test]
    fn ranks_break_ties_lexicographically() {
        let c = corpus(vec![entry("b a c a", "x y z w", &[])]);
        let r = FrequencyRanks::from_corpus(&c);
        assert_eq!((r.src.rank("a"), r.src.rank("b"), r.src.rank("c")), (1, 2, 3));
        assert_eq!(r.src.rank("zzz"), 4);
        let mut all: Vec<usize> = ["w", "x", "y", "z"].iter().map(|w| r.tgt.rank(w)).collect();
        all.sort();
        assert_eq!(all, vec![1, 2, 3, 4]);
    }

    #[test]
    fn binning() {
        // Train ranks: src a=1; tgt: x=1 (3 occurrences), y=2.
        let train = corpus(vec![entry("a", "x x x y", &[])]);
        let ranks = FrequencyRanks::from_corpus(&train);
        let eval = corpus(vec![entry("a a", "x y", &[(0, 0), (1, 1)])]);
        let report = report_with(&[((0, 0), true), ((0, 1), false)]);
        let curve = freq_rank_curve(&report, &eval, &ranks, &[0.0, 1.0, 2.0, f64::INFINITY], AnalysisDirection::SrcToTgt)
            .unwrap();
        let counts: Vec<usize> = curve.bins.iter().map(|b| b.pairs).collect();
        assert_eq!(counts, vec![1, 1, 0]);
        assert_eq!(curve.bins[2].accuracy, None);
        assert_eq!(curve.bins[1].accuracy, Some(0.0));
        assert!(curve.to_csv().ends_with("2,inf,0,0,\n"));
        let both = freq_rank_curve(&report, &eval, &ranks, &DEFAULT_BIN_EDGES, AnalysisDirection::Both).unwrap();
        assert_eq!(both.bins[0].pairs, 4);
    }

    #[test]
    fn rejects_bad_edges() {
        let c = corpus(vec![entry("a", "x", &[(0, 0)])]);
        let ranks = FrequencyRanks::from_corpus(&c);
        let report = report_with(&[((0, 0), true)]);
        for edges in [&[0.0, 10.0, 5.0][..], &[0.0][..], &[1.0, 2.0][..]] {
            assert!(freq_rank_curve(&report, &c, &ranks, edges, AnalysisDirection::SrcToTgt).is_err());
        }
    }
}
