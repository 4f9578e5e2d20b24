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

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

use super::{source_outcomes, AnalysisDirection};
use crate::corpus::ParallelCorpus;
use crate::error::{Error, Result};
use crate::retrieval::{RetrievalReport, TokenRef};

/// Universal POS tags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Upos {
    Adj,
    Adp,
    Adv,
    Aux,
    Cconj,
    Det,
    Intj,
    Noun,
    Num,
    Part,
    Pron,
    Propn,
    Punct,
    Sconj,
    Sym,
    Verb,
    X,
}

impl Upos {
    pub const ALL: [Upos; 17] = [
        Upos::Adj,
        Upos::Adp,
        Upos::Adv,
        Upos::Aux,
        Upos::Cconj,
        Upos::Det,
        Upos::Intj,
        Upos::Noun,
        Upos::Num,
        Upos::Part,
        Upos::Pron,
        Upos::Propn,
        Upos::Punct,
        Upos::Sconj,
        Upos::Sym,
        Upos::Verb,
        Upos::X,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Upos::Adj => "ADJ",
            Upos::Adp => "ADP",
            Upos::Adv => "ADV",
            Upos::Aux => "AUX",
            Upos::Cconj => "CCONJ",
            Upos::Det => "DET",
            Upos::Intj => "INTJ",
            Upos::Noun => "NOUN",
            Upos::Num => "NUM",
            Upos::Part => "PART",
            Upos::Pron => "PRON",
            Upos::Propn => "PROPN",
            Upos::Punct => "PUNCT",
            Upos::Sconj => "SCONJ",
            Upos::Sym => "SYM",
            Upos::Verb => "VERB",
            Upos::X => "X",
        }
    }

    /// Group used in the summary; `None` for tags reported only
    /// individually.
    pub fn group(self) -> Option<PosGroup> {
        match self {
            Upos::Num | Upos::Punct | Upos::Propn => Some(PosGroup::LexicalOverlap),
            Upos::Det | Upos::Adp | Upos::Cconj | Upos::Sconj | Upos::Pron | Upos::Aux => Some(PosGroup::Closed),
            Upos::Noun | Upos::Adv | Upos::Adj | Upos::Verb => Some(PosGroup::Open),
            Upos::Part | Upos::Sym | Upos::Intj | Upos::X => None,
        }
    }
}

impl FromStr for Upos {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Upos::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::Parse {
                line: 0,
                message: format!("unknown UPOS tag {s:?}"),
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PosGroup {
    LexicalOverlap,
    Closed,
    Open,
}

impl PosGroup {
    pub fn as_str(self) -> &'static str {
        match self {
            PosGroup::LexicalOverlap => "lexical-overlap",
            PosGroup::Closed => "closed",
            PosGroup::Open => "open",
        }
    }
}

/// Per-token UPOS tags for the source side of a corpus.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PosTable {
    tags: Vec<Vec<Upos>>,
}

impl PosTable {
    pub fn new(tags: Vec<Vec<Upos>>) -> Self {
        PosTable { tags }
    }

    /// The sentences in `range`, renumbered from zero.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Self {
        PosTable {
            tags: self.tags[range].to_vec(),
        }
    }

    pub fn get(&self, r: TokenRef) -> Option<Upos> {
        self.tags.get(r.sentence)?.get(r.token).copied()
    }

    /// One line per sentence, whitespace-separated tags. Lines must match
    /// the source sentences of `corpus` token for token.
    pub fn parse(text: &str, corpus: &ParallelCorpus) -> Result<Self> {
        let lines: Vec<&str> = text.lines().collect();
        if lines.len() != corpus.len() {
            return Err(Error::LineCountMismatch {
                what: format!("POS tag file has {} lines, corpus has {} sentences", lines.len(), corpus.len()),
            });
        }
        let mut tags = Vec::with_capacity(lines.len());
        for (i, (line, e)) in lines.iter().zip(corpus.entries()).enumerate() {
            let row = line
                .split_whitespace()
                .map(|t| {
                    t.parse::<Upos>().map_err(|_| Error::Parse {
                        line: i + 1,
                        message: format!("unknown UPOS tag {t:?}"),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            if row.len() != e.src.len() {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("{} tags for {} tokens", row.len(), e.src.len()),
                });
            }
            tags.push(row);
        }
        Ok(PosTable { tags })
    }

    pub fn load(path: &Path, corpus: &ParallelCorpus) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        PosTable::parse(&text, corpus)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AccuracyRow {
    pub name: String,
    pub pairs: usize,
    pub correct: usize,
    pub accuracy: Option<f64>,
}

impl AccuracyRow {
    fn new(name: &str, pairs: usize, correct: usize) -> Self {
        AccuracyRow {
            name: name.to_owned(),
            pairs,
            correct,
            accuracy: (pairs > 0).then(|| correct as f64 / pairs as f64),
        }
    }
}

/// Pair-weighted accuracy per source-word tag and per tag group.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PosBreakdown {
    /// Present tags only, in tag order, then `UNTAGGED` if any.
    pub tags: Vec<AccuracyRow>,
    pub groups: Vec<AccuracyRow>,
}

pub const UNTAGGED: &str = "UNTAGGED";

impl PosBreakdown {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("kind,name,pairs,correct,accuracy\n");
        for (kind, rows) in [("tag", &self.tags), ("group", &self.groups)] {
            for r in rows {
                let acc = r.accuracy.map(|a| a.to_string()).unwrap_or_default();
                writeln!(out, "{kind},{},{},{},{acc}", r.name, r.pairs, r.correct).expect("string write");
            }
        }
        out
    }
}

pub fn pos_breakdown(report: &RetrievalReport, tags: &PosTable, direction: AnalysisDirection) -> PosBreakdown {
    let mut per_tag: BTreeMap<Option<Upos>, (usize, usize)> = BTreeMap::new();
    for (src, correct) in source_outcomes(report, direction) {
        let slot = per_tag.entry(tags.get(src)).or_default();
        slot.0 += 1;
        slot.1 += usize::from(correct);
    }
    let mut rows: Vec<AccuracyRow> = per_tag
        .iter()
        .filter_map(|(t, &(n, c))| t.map(|t| AccuracyRow::new(t.as_str(), n, c)))
        .collect();
    if let Some(&(n, c)) = per_tag.get(&None) {
        rows.push(AccuracyRow::new(UNTAGGED, n, c));
    }
    let groups = [PosGroup::LexicalOverlap, PosGroup::Closed, PosGroup::Open]
        .into_iter()
        .map(|g| {
            let (n, c) = per_tag
                .iter()
                .filter(|(t, _)| t.and_then(Upos::group) == Some(g))
                .fold((0, 0), |(n, c), (_, &(tn, tc))| (n + tn, c + tc));
            AccuracyRow::new(g.as_str(), n, c)
        })
        .collect();
    PosBreakdown { tags: rows, groups }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::tests::report_with;

    fn table(rows: &[&[Upos]]) -> PosTable {
        PosTable::new(rows.iter().map(|r| r.to_vec()).collect())
    }

    #[test]
    fn counting_oracle() {
        // Source tokens (0,0) NOUN wrong, (0,1) NOUN right, (1,0) VERB right.
        let report = report_with(&[((0, 0), false), ((0, 1), true), ((1, 0), true)]);
        let tags = table(&[&[Upos::Noun, Upos::Noun], &[Upos::Verb]]);
        let b = pos_breakdown(&report, &tags, AnalysisDirection::SrcToTgt);
        let open = b.groups.iter().find(|g| g.name == "open").unwrap();
        assert_eq!((open.pairs, open.correct), (3, 2));
        assert!((open.accuracy.unwrap() - 2.0 / 3.0).abs() < 1e-15);
        let closed = b.groups.iter().find(|g| g.name == "closed").unwrap();
        assert_eq!(closed.accuracy, None);
        assert!(b.tags.iter().all(|t| t.name != "DET"));
        assert_eq!(b.tags.len(), 2);
    }

    #[test]
    fn untagged_and_omitted_tags() {
        let report = report_with(&[((0, 0), true), ((0, 1), true), ((1, 0), true)]);
        let tags = table(&[&[Upos::Part]]);
        let b = pos_breakdown(&report, &tags, AnalysisDirection::SrcToTgt);
        assert_eq!(b.tags[0].name, "PART");
        assert_eq!(b.tags[1].name, UNTAGGED);
        assert_eq!(b.tags[1].pairs, 2);
        assert!(b.groups.iter().all(|g| g.pairs == 0));
        assert!(b.to_csv().contains("tag,PART,1,1,1\n"));
    }

    #[test]
    fn group_is_pair_weighted_mean_of_members() {
        let report = report_with(&[((0, 0), true), ((0, 1), false), ((0, 2), false), ((1, 0), true)]);
        let tags = table(&[&[Upos::Det, Upos::Adp, Upos::Adp], &[Upos::Pron]]);
        let b = pos_breakdown(&report, &tags, AnalysisDirection::Both);
        let closed = b.groups.iter().find(|g| g.name == "closed").unwrap();
        let members: Vec<&AccuracyRow> = b.tags.iter().collect();
        let weighted: f64 = members.iter().map(|r| r.accuracy.unwrap() * r.pairs as f64).sum::<f64>()
            / members.iter().map(|r| r.pairs).sum::<usize>() as f64;
        assert!((closed.accuracy.unwrap() - weighted).abs() < 1e-15);
        assert_eq!(closed.pairs, 8);
    }

    #[test]
    fn parse_validates() {
        use crate::corpus::testutil::{corpus, entry};
        let c = corpus(vec![entry("a b", "x y", &[(0, 0)])]);
        assert_eq!(PosTable::parse("DET NOUN\n", &c).unwrap().get(TokenRef::new(0, 1)), Some(Upos::Noun));
        assert!(PosTable::parse("DET\n", &c).is_err());
        assert!(PosTable::parse("DET FOO\n", &c).is_err());
        assert!(PosTable::parse("", &c).is_err());
    }
}
