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

//! Tokenized parallel corpora with per-sentence word pairs.
//!
//! Text files hold one sentence per line with whitespace-separated tokens.
//! Word pairs use the Pharaoh format: zero-based `src-tgt` links separated
//! by spaces, one line per sentence pair.

mod filter;
mod split;
mod subword;

use std::collections::HashSet;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

pub use filter::{dedupe_first_occurrence, filter_eval_pairs};
pub use split::{split_corpus, CorpusSplits};
pub use subword::{map_subwords, SubwordMap};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    tokens: Vec<String>,
    language: String,
}

impl Sentence {
    pub fn new(tokens: Vec<String>, language: impl Into<String>) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::EmptySentence { sentence: 0 });
        }
        if let Some(t) = tokens.iter().find(|t| t.is_empty() || t.chars().any(char::is_whitespace)) {
            return Err(Error::Invalid(format!("token {t:?} is empty or contains whitespace")));
        }
        Ok(Sentence {
            tokens,
            language: language.into(),
        })
    }

    /// Splits a line on whitespace.
    pub fn parse(line: &str, language: impl Into<String>) -> Result<Self> {
        Sentence::new(line.split_whitespace().map(str::to_owned).collect(), language)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn language(&self) -> &str {
        &self.language
    }

    pub fn text(&self) -> String {
        self.tokens.join(" ")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct WordPair {
    pub src: usize,
    pub tgt: usize,
}

/// One-to-one links between positions of a sentence pair, kept in the
/// order they were read or constructed.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WordPairSet {
    pairs: Vec<WordPair>,
}

impl WordPairSet {
    pub fn new() -> Self {
        WordPairSet::default()
    }

    /// Builds a set, rejecting repeated source or target positions.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut set = WordPairSet::new();
        let mut seen_src = HashSet::new();
        let mut seen_tgt = HashSet::new();
        for (src, tgt) in pairs {
            if !seen_src.insert(src) {
                return Err(Error::NotOneToOne {
                    sentence: 0,
                    side: "source",
                    index: src,
                });
            }
            if !seen_tgt.insert(tgt) {
                return Err(Error::NotOneToOne {
                    sentence: 0,
                    side: "target",
                    index: tgt,
                });
            }
            set.pairs.push(WordPair { src, tgt });
        }
        Ok(set)
    }

    pub fn parse_pharaoh(line: &str) -> Result<Self> {
        let mut links = Vec::new();
        for tok in line.split_whitespace() {
            let (a, b) = tok
                .split_once('-')
                .ok_or_else(|| Error::Parse {
                    line: 0,
                    message: format!("malformed link {tok:?}"),
                })?;
            let parse = |s: &str| {
                s.parse::<usize>().map_err(|_| Error::Parse {
                    line: 0,
                    message: format!("malformed link {tok:?}"),
                })
            };
            links.push((parse(a)?, parse(b)?));
        }
        WordPairSet::from_pairs(links)
    }

    pub fn to_pharaoh(&self) -> String {
        self.pairs
            .iter()
            .map(|p| format!("{}-{}", p.src, p.tgt))
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn iter(&self) -> impl Iterator<Item = &WordPair> {
        self.pairs.iter()
    }

    pub fn as_slice(&self) -> &[WordPair] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn retain(&mut self, f: impl FnMut(&WordPair) -> bool) {
        self.pairs.retain(f);
    }

    fn check_bounds(&self, sentence: usize, src_len: usize, tgt_len: usize) -> Result<()> {
        for p in &self.pairs {
            if p.src >= src_len {
                return Err(Error::IndexOutOfRange {
                    sentence,
                    side: "source",
                    index: p.src,
                    len: src_len,
                });
            }
            if p.tgt >= tgt_len {
                return Err(Error::IndexOutOfRange {
                    sentence,
                    side: "target",
                    index: p.tgt,
                    len: tgt_len,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParallelEntry {
    pub src: Sentence,
    pub tgt: Sentence,
    pub pairs: WordPairSet,
}

impl ParallelEntry {
    pub fn new(src: Sentence, tgt: Sentence, pairs: WordPairSet) -> Result<Self> {
        pairs.check_bounds(0, src.len(), tgt.len())?;
        Ok(ParallelEntry { src, tgt, pairs })
    }

    /// Source and target word strings of a pair.
    pub fn words(&self, pair: &WordPair) -> (&str, &str) {
        (&self.src.tokens[pair.src], &self.tgt.tokens[pair.tgt])
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParallelCorpus {
    src_language: String,
    tgt_language: String,
    entries: Vec<ParallelEntry>,
}

impl ParallelCorpus {
    /// Validates that every entry carries the declared language pair.
    /// An empty entry list is allowed here so split blocks can be empty;
    /// loading from files requires at least one entry.
    pub fn new(
        src_language: impl Into<String>,
        tgt_language: impl Into<String>,
        entries: Vec<ParallelEntry>,
    ) -> Result<Self> {
        let src_language = src_language.into();
        let tgt_language = tgt_language.into();
        for (k, e) in entries.iter().enumerate() {
            if e.src.language != src_language || e.tgt.language != tgt_language {
                return Err(Error::Invalid(format!(
                    "entry {k} has language pair {}-{}, corpus is {src_language}-{tgt_language}",
                    e.src.language, e.tgt.language
                )));
            }
        }
        Ok(ParallelCorpus {
            src_language,
            tgt_language,
            entries,
        })
    }

    pub fn src_language(&self) -> &str {
        &self.src_language
    }

    pub fn tgt_language(&self) -> &str {
        &self.tgt_language
    }

    pub fn entries(&self) -> &[ParallelEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn num_pairs(&self) -> usize {
        self.entries.iter().map(|e| e.pairs.len()).sum()
    }

    pub fn src_sentences(&self) -> impl Iterator<Item = &Sentence> {
        self.entries.iter().map(|e| &e.src)
    }

    pub fn tgt_sentences(&self) -> impl Iterator<Item = &Sentence> {
        self.entries.iter().map(|e| &e.tgt)
    }

    /// Same text with replacement word-pair sets.
    pub fn with_pairs(&self, pairs: Vec<WordPairSet>) -> Result<Self> {
        if pairs.len() != self.entries.len() {
            return Err(Error::LineCountMismatch {
                what: format!("{} pair sets for {} entries", pairs.len(), self.entries.len()),
            });
        }
        let entries = self
            .entries
            .iter()
            .zip(pairs)
            .enumerate()
            .map(|(k, (e, p))| {
                p.check_bounds(k, e.src.len(), e.tgt.len())?;
                Ok(ParallelEntry {
                    src: e.src.clone(),
                    tgt: e.tgt.clone(),
                    pairs: p,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        ParallelCorpus::new(self.src_language.clone(), self.tgt_language.clone(), entries)
    }

    /// Swaps source and target sides, including every word pair.
    pub fn reversed(&self) -> Self {
        let entries = self
            .entries
            .iter()
            .map(|e| ParallelEntry {
                src: e.tgt.clone(),
                tgt: e.src.clone(),
                pairs: WordPairSet {
                    pairs: e
                        .pairs
                        .iter()
                        .map(|p| WordPair {
                            src: p.tgt,
                            tgt: p.src,
                        })
                        .collect(),
                },
            })
            .collect();
        ParallelCorpus {
            src_language: self.tgt_language.clone(),
            tgt_language: self.src_language.clone(),
            entries,
        }
    }

    pub(crate) fn subset(&self, range: std::ops::Range<usize>) -> Self {
        ParallelCorpus {
            src_language: self.src_language.clone(),
            tgt_language: self.tgt_language.clone(),
            entries: self.entries[range].to_vec(),
        }
    }

    pub(crate) fn map_pairs(&self, mut f: impl FnMut(usize, &ParallelEntry) -> WordPairSet) -> Self {
        let entries = self
            .entries
            .iter()
            .enumerate()
            .map(|(k, e)| ParallelEntry {
                src: e.src.clone(),
                tgt: e.tgt.clone(),
                pairs: f(k, e),
            })
            .collect();
        ParallelCorpus {
            src_language: self.src_language.clone(),
            tgt_language: self.tgt_language.clone(),
            entries,
        }
    }
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text.lines().map(str::to_owned).collect())
}

fn parse_sentences(lines: &[String], language: &str) -> Result<Vec<Sentence>> {
    lines
        .iter()
        .enumerate()
        .map(|(k, l)| {
            Sentence::parse(l, language).map_err(|e| match e {
                Error::EmptySentence { .. } => Error::EmptySentence { sentence: k },
                other => other,
            })
        })
        .collect()
}

/// Loads line-aligned source and target text with empty word-pair sets.
pub fn load_parallel_text(
    src_path: &Path,
    tgt_path: &Path,
    src_language: &str,
    tgt_language: &str,
) -> Result<ParallelCorpus> {
    let src_lines = read_lines(src_path)?;
    let tgt_lines = read_lines(tgt_path)?;
    if src_lines.len() != tgt_lines.len() {
        return Err(Error::LineCountMismatch {
            what: format!(
                "{} has {} lines, {} has {}",
                src_path.display(),
                src_lines.len(),
                tgt_path.display(),
                tgt_lines.len()
            ),
        });
    }
    if src_lines.is_empty() {
        return Err(Error::Empty(format!("{} has no sentences", src_path.display())));
    }
    let src = parse_sentences(&src_lines, src_language)?;
    let tgt = parse_sentences(&tgt_lines, tgt_language)?;
    let entries = src
        .into_iter()
        .zip(tgt)
        .map(|(s, t)| ParallelEntry {
            src: s,
            tgt: t,
            pairs: WordPairSet::new(),
        })
        .collect();
    ParallelCorpus::new(src_language, tgt_language, entries)
}

/// Reads a Pharaoh file with one line per entry of `corpus`.
pub fn load_pairs(corpus: &ParallelCorpus, pairs_path: &Path) -> Result<Vec<WordPairSet>> {
    let lines = read_lines(pairs_path)?;
    if lines.len() != corpus.len() {
        return Err(Error::LineCountMismatch {
            what: format!(
                "{} has {} lines, corpus has {} sentences",
                pairs_path.display(),
                lines.len(),
                corpus.len()
            ),
        });
    }
    lines
        .iter()
        .zip(corpus.entries())
        .enumerate()
        .map(|(k, (line, e))| {
            let set = WordPairSet::parse_pharaoh(line).map_err(|err| match err {
                Error::Parse { message, .. } => Error::Parse { line: k + 1, message },
                Error::NotOneToOne { side, index, .. } => Error::NotOneToOne {
                    sentence: k,
                    side,
                    index,
                },
                other => other,
            })?;
            set.check_bounds(k, e.src.len(), e.tgt.len())?;
            Ok(set)
        })
        .collect()
}

pub fn load_parallel_corpus(
    src_path: &Path,
    tgt_path: &Path,
    pairs_path: &Path,
    src_language: &str,
    tgt_language: &str,
) -> Result<ParallelCorpus> {
    let corpus = load_parallel_text(src_path, tgt_path, src_language, tgt_language)?;
    let pairs = load_pairs(&corpus, pairs_path)?;
    corpus.with_pairs(pairs)
}

fn write_lines(path: &Path, lines: impl Iterator<Item = String>) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for l in lines {
        writeln!(w, "{l}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_pairs(corpus: &ParallelCorpus, pairs_path: &Path) -> Result<()> {
    write_lines(pairs_path, corpus.entries.iter().map(|e| e.pairs.to_pharaoh()))
}

pub fn write_parallel_corpus(
    corpus: &ParallelCorpus,
    src_path: &Path,
    tgt_path: &Path,
    pairs_path: &Path,
) -> Result<()> {
    write_lines(src_path, corpus.entries.iter().map(|e| e.src.text()))?;
    write_lines(tgt_path, corpus.entries.iter().map(|e| e.tgt.text()))?;
    write_pairs(corpus, pairs_path)
}

#[cfg(test)]
pub(crate) mod testutil {
    use super::*;

    /// Entry from whitespace-separated text and `(src, tgt)` links.
    pub fn entry(src: &str, tgt: &str, links: &[(usize, usize)]) -> ParallelEntry {
        ParallelEntry::new(
            Sentence::parse(src, "src").unwrap(),
            Sentence::parse(tgt, "tgt").unwrap(),
            WordPairSet::from_pairs(links.iter().copied()).unwrap(),
        )
        .unwrap()
    }

    pub fn corpus(entries: Vec<ParallelEntry>) -> ParallelCorpus {
        ParallelCorpus::new("src", "tgt", entries).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::TempDir;

    fn files(dir: &TempDir, src: &str, tgt: &str, pairs: &str) -> [std::path::PathBuf; 3] {
        let p = [dir.path().join("s"), dir.path().join("t"), dir.path().join("a")];
        fs::write(&p[0], src).unwrap();
        fs::write(&p[1], tgt).unwrap();
        fs::write(&p[2], pairs).unwrap();
        p
    }

    #[test]
    fn loads_pharaoh_pairs() {
        let dir = TempDir::new().unwrap();
        let [s, t, a] = files(&dir, "a b\n", "x y z\n", "0-0 1-2\n");
        let c = load_parallel_corpus(&s, &t, &a, "de", "en").unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(
            c.entries()[0].pairs.as_slice(),
            &[WordPair { src: 0, tgt: 0 }, WordPair { src: 1, tgt: 2 }]
        );
        assert_eq!(c.src_language(), "de");
    }

    #[test]
    fn empty_pairs_line_is_empty_set() {
        let dir = TempDir::new().unwrap();
        let [s, t, a] = files(&dir, "a\n", "x\n", "\n");
        let c = load_parallel_corpus(&s, &t, &a, "src", "tgt").unwrap();
        assert!(c.entries()[0].pairs.is_empty());
    }

    #[test]
    fn rejects_out_of_range_target_index() {
        let dir = TempDir::new().unwrap();
        let [s, t, a] = files(&dir, "a b\n", "x\n", "0-0 1-1\n");
        let err = load_parallel_corpus(&s, &t, &a, "src", "tgt").unwrap_err();
        assert!(matches!(
            err,
            Error::IndexOutOfRange {
                side: "target",
                index: 1,
                ..
            }
        ));
    }

    #[test]
    fn rejects_line_count_mismatch_and_empty_sentence() {
        let dir = TempDir::new().unwrap();
        let [s, t, a] = files(&dir, "a\nb\n", "x\n", "\n");
        assert!(matches!(
            load_parallel_corpus(&s, &t, &a, "src", "tgt"),
            Err(Error::LineCountMismatch { .. })
        ));
        let [s, t, a] = files(&dir, "a\n\n", "x\ny\n", "\n\n");
        assert!(matches!(
            load_parallel_corpus(&s, &t, &a, "src", "tgt"),
            Err(Error::EmptySentence { sentence: 1 })
        ));
    }

    #[test]
    fn rejects_malformed_and_many_to_one_links() {
        assert!(WordPairSet::parse_pharaoh("0-0 1").is_err());
        assert!(WordPairSet::parse_pharaoh("0-x").is_err());
        assert!(matches!(
            WordPairSet::parse_pharaoh("0-0 1-0"),
            Err(Error::NotOneToOne { side: "target", .. })
        ));
    }

    #[test]
    fn write_then_load_round_trips_bytes() {
        let dir = TempDir::new().unwrap();
        let [s, t, a] = files(&dir, "a b c\nd\n", "x y\nz w\n", "0-1 2-0\n0-1\n");
        let c = load_parallel_corpus(&s, &t, &a, "src", "tgt").unwrap();
        let out = [dir.path().join("s2"), dir.path().join("t2"), dir.path().join("a2")];
        write_parallel_corpus(&c, &out[0], &out[1], &out[2]).unwrap();
        for (orig, new) in [s, t, a].iter().zip(&out) {
            assert_eq!(fs::read(orig).unwrap(), fs::read(new).unwrap());
        }
        let c2 = load_parallel_corpus(&out[0], &out[1], &out[2], "src", "tgt").unwrap();
        assert_eq!(c, c2);
    }

    #[test]
    fn reversed_swaps_links() {
        let c = testutil::corpus(vec![testutil::entry("a b", "x y z", &[(0, 2)])]);
        let r = c.reversed();
        assert_eq!(r.entries()[0].pairs.as_slice(), &[WordPair { src: 2, tgt: 0 }]);
        assert_eq!(r.src_language(), "tgt");
        assert_eq!(r.reversed(), c);
    }
}
