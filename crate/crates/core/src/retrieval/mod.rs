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

//! Contextual word retrieval.
//!
//! For every word pair of an evaluation corpus, the source occurrence is
//! used as a query against all target positions (and vice versa). A
//! prediction is correct only if it lands on the exact gold token of the
//! exact gold sentence.

mod pool;
mod query;
mod scoring;

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use pool::{build_pool, pool_from_refs, CandidatePool, TokenRef};
pub use query::{query_neighbors, Neighbor};
pub use scoring::{
    csls_penalties, csls_scores, retrieve, score_matrix, Match, Penalties, Similarity, DEFAULT_BLOCK, DEFAULT_K,
};

use crate::corpus::{dedupe_first_occurrence, ParallelCorpus};
use crate::embed::ContextualEmbeddingSet;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RetrievalMode {
    Contextual,
    /// Only the first occurrence of each word type is evaluated, and pools
    /// hold only the kept pairs' positions.
    NonContextual,
}

impl std::fmt::Display for RetrievalMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RetrievalMode::Contextual => "contextual",
            RetrievalMode::NonContextual => "non-contextual",
        })
    }
}

impl std::str::FromStr for RetrievalMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "contextual" => Ok(RetrievalMode::Contextual),
            "non-contextual" => Ok(RetrievalMode::NonContextual),
            other => Err(Error::Invalid(format!("unknown retrieval mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetrievalConfig {
    pub sim: Similarity,
    pub k: usize,
    pub mode: RetrievalMode,
    /// Query rows per scoring work unit; does not affect results.
    pub block_size: usize,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        RetrievalConfig {
            sim: Similarity::Csls,
            k: DEFAULT_K,
            mode: RetrievalMode::Contextual,
            block_size: DEFAULT_BLOCK,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    SrcToTgt,
    TgtToSrc,
}

impl std::fmt::Display for Direction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Direction::SrcToTgt => "src-to-tgt",
            Direction::TgtToSrc => "tgt-to-src",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairOutcome {
    pub query: TokenRef,
    pub gold: TokenRef,
    pub predicted: TokenRef,
    pub correct: bool,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionReport {
    pub accuracy: f64,
    pub correct: usize,
    pub evaluated: usize,
    #[serde(skip)]
    pub outcomes: Vec<PairOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalReport {
    pub mode: RetrievalMode,
    pub sim: Similarity,
    pub k: usize,
    pub src_to_tgt: DirectionReport,
    pub tgt_to_src: DirectionReport,
    /// Arithmetic mean of the two directional accuracies.
    pub mean_accuracy: f64,
}

impl RetrievalReport {
    pub fn direction(&self, d: Direction) -> &DirectionReport {
        match d {
            Direction::SrcToTgt => &self.src_to_tgt,
            Direction::TgtToSrc => &self.tgt_to_src,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json() + "\n").map_err(|e| Error::io(path, e))
    }

    /// Per-pair outcomes of both directions.
    pub fn pairs_csv(&self) -> String {
        let mut out = String::from("direction,query_sent,query_tok,gold_sent,gold_tok,pred_sent,pred_tok,correct,score\n");
        for d in [Direction::SrcToTgt, Direction::TgtToSrc] {
            for o in &self.direction(d).outcomes {
                writeln!(
                    out,
                    "{d},{},{},{},{},{},{},{},{:e}",
                    o.query.sentence,
                    o.query.token,
                    o.gold.sentence,
                    o.gold.token,
                    o.predicted.sentence,
                    o.predicted.token,
                    u8::from(o.correct),
                    o.score
                )
                .expect("string write");
            }
        }
        out
    }

    pub fn write_pairs_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.pairs_csv()).map_err(|e| Error::io(path, e))
    }

    /// Reads a report back from its JSON summary and per-pair CSV, checking
    /// that the outcome counts agree with the summary.
    pub fn load(json_path: &Path, pairs_path: &Path) -> Result<Self> {
        let json = std::fs::read_to_string(json_path).map_err(|e| Error::io(json_path, e))?;
        let mut report: RetrievalReport =
            serde_json::from_str(&json).map_err(|e| Error::Parse {
                line: e.line(),
                message: e.to_string(),
            })?;
        let csv = std::fs::read_to_string(pairs_path).map_err(|e| Error::io(pairs_path, e))?;
        report.read_pairs_csv(&csv)?;
        Ok(report)
    }

    fn read_pairs_csv(&mut self, csv: &str) -> Result<()> {
        let mut lines = csv.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.starts_with("direction,") => {}
            _ => {
                return Err(Error::Parse {
                    line: 1,
                    message: "missing per-pair CSV header".into(),
                })
            }
        }
        self.src_to_tgt.outcomes.clear();
        self.tgt_to_src.outcomes.clear();
        for (i, line) in lines {
            let bad = |message: String| Error::Parse { line: i + 1, message };
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 9 {
                return Err(bad(format!("expected 9 fields, found {}", f.len())));
            }
            let n = |j: usize| f[j].parse::<usize>().map_err(|e| bad(format!("field {}: {e}", j + 1)));
            let outcome = PairOutcome {
                query: TokenRef { sentence: n(1)?, token: n(2)? },
                gold: TokenRef { sentence: n(3)?, token: n(4)? },
                predicted: TokenRef { sentence: n(5)?, token: n(6)? },
                correct: match f[7] {
                    "0" => false,
                    "1" => true,
                    other => return Err(bad(format!("bad correct flag {other:?}"))),
                },
                score: f[8].parse().map_err(|e| bad(format!("bad score: {e}")))?,
            };
            match f[0] {
                "src-to-tgt" => self.src_to_tgt.outcomes.push(outcome),
                "tgt-to-src" => self.tgt_to_src.outcomes.push(outcome),
                other => return Err(bad(format!("unknown direction {other:?}"))),
            }
        }
        for d in [&self.src_to_tgt, &self.tgt_to_src] {
            let correct = d.outcomes.iter().filter(|o| o.correct).count();
            if d.outcomes.len() != d.evaluated || correct != d.correct {
                return Err(Error::LineCountMismatch {
                    what: format!(
                        "per-pair CSV has {} outcomes ({correct} correct), summary says {} ({})",
                        d.outcomes.len(),
                        d.evaluated,
                        d.correct
                    ),
                });
            }
        }
        Ok(())
    }
}

fn direction_report(
    queries: &CandidatePool,
    gold: &[TokenRef],
    candidates: &CandidatePool,
    cfg: &RetrievalConfig,
) -> Result<DirectionReport> {
    let matches = retrieve(queries, candidates, cfg.sim, cfg.k, cfg.block_size)?;
    let outcomes: Vec<PairOutcome> = matches
        .iter()
        .zip(queries.refs())
        .zip(gold)
        .map(|((m, &q), &g)| {
            let predicted = candidates.refs()[m.index];
            PairOutcome {
                query: q,
                gold: g,
                predicted,
                correct: predicted == g,
                score: m.score,
            }
        })
        .collect();
    let correct = outcomes.iter().filter(|o| o.correct).count();
    Ok(DirectionReport {
        accuracy: correct as f64 / outcomes.len() as f64,
        correct,
        evaluated: outcomes.len(),
        outcomes,
    })
}

/// Bidirectional retrieval accuracy over the corpus's word pairs.
///
/// Accuracy is normalized by the number of evaluated pairs. The corpus is
/// expected to be filtered already.
pub fn evaluate(
    src: &ContextualEmbeddingSet,
    tgt: &ContextualEmbeddingSet,
    corpus: &ParallelCorpus,
    cfg: &RetrievalConfig,
) -> Result<RetrievalReport> {
    ContextualEmbeddingSet::check_covers_corpus(src, tgt, corpus)?;
    let deduped;
    let corpus = match cfg.mode {
        RetrievalMode::Contextual => corpus,
        RetrievalMode::NonContextual => {
            deduped = dedupe_first_occurrence(corpus);
            &deduped
        }
    };
    let (src_refs, tgt_refs): (Vec<TokenRef>, Vec<TokenRef>) = corpus
        .entries()
        .iter()
        .enumerate()
        .flat_map(|(s, e)| {
            e.pairs
                .iter()
                .map(move |p| (TokenRef::new(s, p.src), TokenRef::new(s, p.tgt)))
        })
        .unzip();
    if src_refs.is_empty() {
        return Err(Error::Empty("no evaluable word pairs".into()));
    }
    let src_queries = pool_from_refs(src, &src_refs)?;
    let tgt_queries = pool_from_refs(tgt, &tgt_refs)?;
    let (src_cands, tgt_cands) = match cfg.mode {
        RetrievalMode::Contextual => (build_pool(src)?, build_pool(tgt)?),
        RetrievalMode::NonContextual => {
            let sorted = |refs: &[TokenRef]| {
                let mut r = refs.to_vec();
                r.sort_unstable();
                r
            };
            (
                pool_from_refs(src, &sorted(&src_refs))?,
                pool_from_refs(tgt, &sorted(&tgt_refs))?,
            )
        }
    };
    let fwd = direction_report(&src_queries, &tgt_refs, &tgt_cands, cfg)?;
    let bwd = direction_report(&tgt_queries, &src_refs, &src_cands, cfg)?;
    let mean_accuracy = (fwd.accuracy + bwd.accuracy) / 2.0;
    Ok(RetrievalReport {
        mode: cfg.mode,
        sim: cfg.sim,
        k: cfg.k,
        src_to_tgt: fwd,
        tgt_to_src: bwd,
        mean_accuracy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::testutil::{corpus, entry};

    fn distinct_set() -> ContextualEmbeddingSet {
        ContextualEmbeddingSet::from_sentences(
            2,
            &[
                vec![vec![1.0, 0.0], vec![0.0, 1.0]],
                vec![vec![1.0, 1.0], vec![1.0, -1.0], vec![-1.0, 0.2]],
            ],
        )
        .unwrap()
    }

    fn identity_corpus() -> ParallelCorpus {
        corpus(vec![
            entry("a b", "x y", &[(0, 0), (1, 1)]),
            entry("c a d", "z x w", &[(0, 0), (1, 1), (2, 2)]),
        ])
    }

    #[test]
    fn perfect_alignment_scores_one() {
        let set = distinct_set();
        for sim in [Similarity::Cosine, Similarity::Csls] {
            for mode in [RetrievalMode::Contextual, RetrievalMode::NonContextual] {
                let cfg = RetrievalConfig {
                    sim,
                    mode,
                    ..RetrievalConfig::default()
                };
                let r = evaluate(&set, &set, &identity_corpus(), &cfg).unwrap();
                assert_eq!(r.src_to_tgt.accuracy, 1.0);
                assert_eq!(r.tgt_to_src.accuracy, 1.0);
                assert_eq!(r.mean_accuracy, 1.0);
            }
        }
    }

    #[test]
    fn non_contextual_drops_repeated_types() {
        let set = distinct_set();
        let cfg = RetrievalConfig {
            mode: RetrievalMode::NonContextual,
            ..RetrievalConfig::default()
        };
        let r = evaluate(&set, &set, &identity_corpus(), &cfg).unwrap();
        assert_eq!(r.src_to_tgt.evaluated, 4);
    }

    #[test]
    fn report_serialization() {
        let set = distinct_set();
        let r = evaluate(&set, &set, &identity_corpus(), &RetrievalConfig::default()).unwrap();
        let json: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let (jp, cp) = (dir.path().join("r.json"), dir.path().join("r.csv"));
        r.write_json(&jp).unwrap();
        r.write_pairs_csv(&cp).unwrap();
        assert_eq!(RetrievalReport::load(&jp, &cp).unwrap(), r);
        std::fs::write(&cp, "direction,x\n").unwrap();
        assert!(RetrievalReport::load(&jp, &cp).is_err());
        assert_eq!(json["src_to_tgt"]["evaluated"], 5);
        assert_eq!(json["sim"], "csls");
        let csv = r.pairs_csv();
        assert_eq!(csv.lines().count(), 11);
        assert!(csv.lines().nth(1).unwrap().starts_with("src-to-tgt,0,0,0,0,0,0,1,"));
    }

    #[test]
    fn no_pairs_is_an_error() {
        let set = distinct_set();
        let c = identity_corpus().map_pairs(|_, _| Default::default());
        assert!(evaluate(&set, &set, &c, &RetrievalConfig::default()).is_err());
    }
}
