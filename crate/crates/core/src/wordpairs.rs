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

//! Unsupervised word pairs from parallel text: IBM Model 1 trained by EM
//! in both directions, Viterbi links per direction, and the one-to-one
//! intersection of the two link sets.

use std::collections::HashMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::corpus::{ParallelCorpus, Sentence, WordPairSet};
use crate::error::{Error, Result};

/// Probability used for `(src, tgt)` type pairs absent from the table.
pub const UNKNOWN_FLOOR: f64 = 1e-12;
/// Name of the empty source word in dumps.
pub const NULL_TOKEN: &str = "<NULL>";

#[derive(Debug, Clone, Default)]
struct Vocab {
    words: Vec<String>,
    ids: HashMap<String, u32>,
}

impl Vocab {
    fn intern(&mut self, w: &str) -> u32 {
        if let Some(&id) = self.ids.get(w) {
            return id;
        }
        let id = self.words.len() as u32;
        self.words.push(w.to_owned());
        self.ids.insert(w.to_owned(), id);
        id
    }

    fn get(&self, w: &str) -> Option<u32> {
        self.ids.get(w).copied()
    }
}

/// `p(tgt_type | src_type)` over co-occurring type pairs. Source id 0 is
/// the NULL word, which co-occurs with every target type.
#[derive(Debug, Clone)]
pub struct TranslationTable {
    src_vocab: Vocab,
    tgt_vocab: Vocab,
    slots: HashMap<(u32, u32), usize>,
    keys: Vec<(u32, u32)>,
    probs: Vec<f64>,
}

const NULL_ID: u32 = 0;
// Tokens never contain whitespace, so this key cannot collide with a word.
const NULL_KEY: &str = " NULL ";

impl TranslationTable {
    fn src_word(&self, id: u32) -> &str {
        if id == NULL_ID {
            NULL_TOKEN
        } else {
            &self.src_vocab.words[id as usize]
        }
    }

    /// `p(tgt | src)`, with `src = None` for NULL. Unknown pairs get
    /// [`UNKNOWN_FLOOR`].
    pub fn prob(&self, src: Option<&str>, tgt: &str) -> f64 {
        let s = match src {
            None => Some(NULL_ID),
            Some(w) => self.src_vocab.get(w),
        };
        match (s, self.tgt_vocab.get(tgt)) {
            (Some(s), Some(t)) => self.prob_ids(s, Some(t)),
            _ => UNKNOWN_FLOOR,
        }
    }

    #[inline]
    fn prob_ids(&self, s: u32, t: Option<u32>) -> f64 {
        t.and_then(|t| self.slots.get(&(s, t)))
            .map_or(UNKNOWN_FLOOR, |&k| self.probs[k])
    }

    pub fn num_entries(&self) -> usize {
        self.probs.len()
    }

    /// Sum of each source type's conditional distribution, NULL included.
    pub fn row_sums(&self) -> Vec<(String, f64)> {
        let mut sums = vec![0.0; self.src_vocab.words.len()];
        for (k, &(s, _)) in self.keys.iter().enumerate() {
            sums[s as usize] += self.probs[k];
        }
        sums.into_iter()
            .enumerate()
            .map(|(s, v)| (self.src_word(s as u32).to_owned(), v))
            .collect()
    }

    /// `(src, tgt, probability)` rows sorted lexicographically.
    pub fn entries(&self) -> Vec<(&str, &str, f64)> {
        let mut rows: Vec<_> = self
            .keys
            .iter()
            .zip(&self.probs)
            .map(|(&(s, t), &p)| (self.src_word(s), self.tgt_vocab.words[t as usize].as_str(), p))
            .collect();
        rows.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        rows
    }

    /// Most probable target type for a source word; ties go to the
    /// lexicographically smallest type.
    pub fn best_translation(&self, src: &str) -> Option<(&str, f64)> {
        let s = self.src_vocab.get(src)?;
        self.keys
            .iter()
            .zip(&self.probs)
            .filter(|((ks, _), _)| *ks == s)
            .map(|(&(_, t), &p)| (self.tgt_vocab.words[t as usize].as_str(), p))
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(a.0)))
    }

    pub fn write_tsv(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        for (s, t, p) in self.entries() {
            writeln!(w, "{s}\t{t}\t{p:e}").map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Trained table plus the corpus log-likelihood before training and after
/// every EM iteration (`iterations + 1` values).
#[derive(Debug, Clone)]
pub struct Ibm1Fit {
    pub table: TranslationTable,
    pub log_likelihood: Vec<f64>,
}

struct Encoded {
    /// Source ids with NULL prepended.
    src: Vec<u32>,
    tgt: Vec<u32>,
}

pub fn ibm1_train(corpus: &ParallelCorpus, iterations: usize) -> Result<Ibm1Fit> {
    if iterations == 0 {
        return Err(Error::Invalid("IBM Model 1 needs at least one EM iteration".into()));
    }
    if corpus.is_empty() {
        return Err(Error::Empty("corpus for IBM Model 1".into()));
    }
    let mut src_vocab = Vocab::default();
    src_vocab.intern(NULL_KEY);
    let mut tgt_vocab = Vocab::default();
    let encoded: Vec<Encoded> = corpus
        .entries()
        .iter()
        .map(|e| {
            let mut src = vec![NULL_ID];
            src.extend(e.src.tokens().iter().map(|w| src_vocab.intern(w)));
            let tgt = e.tgt.tokens().iter().map(|w| tgt_vocab.intern(w)).collect();
            Encoded { src, tgt }
        })
        .collect();

    // Co-occurrence slots in first-seen order.
    let mut slots = HashMap::new();
    let mut keys = Vec::new();
    for e in &encoded {
        for &t in &e.tgt {
            for &s in &e.src {
                slots.entry((s, t)).or_insert_with(|| {
                    keys.push((s, t));
                    keys.len() - 1
                });
            }
        }
    }
    let mut support = vec![0usize; src_vocab.words.len()];
    for &(s, _) in &keys {
        support[s as usize] += 1;
    }
    let mut probs: Vec<f64> = keys.iter().map(|&(s, _)| 1.0 / support[s as usize] as f64).collect();

    let mut counts = vec![0.0; keys.len()];
    let mut totals = vec![0.0; src_vocab.words.len()];
    let mut log_likelihood = Vec::with_capacity(iterations + 1);
    let mut slot_buf = Vec::new();
    for _ in 0..iterations {
        counts.iter_mut().for_each(|c| *c = 0.0);
        totals.iter_mut().for_each(|c| *c = 0.0);
        let mut ll = 0.0;
        for e in &encoded {
            let norm = (e.src.len() as f64).ln();
            for &t in &e.tgt {
                slot_buf.clear();
                slot_buf.extend(e.src.iter().map(|&s| slots[&(s, t)]));
                let denom: f64 = slot_buf.iter().map(|&k| probs[k]).sum();
                ll += denom.ln() - norm;
                for &k in &slot_buf {
                    counts[k] += probs[k] / denom;
                }
            }
        }
        log_likelihood.push(ll);
        for (k, &(s, _)) in keys.iter().enumerate() {
            totals[s as usize] += counts[k];
        }
        for (k, &(s, _)) in keys.iter().enumerate() {
            probs[k] = counts[k] / totals[s as usize];
        }
    }
    log_likelihood.push(corpus_log_likelihood(&encoded, &slots, &probs));

    Ok(Ibm1Fit {
        table: TranslationTable {
            src_vocab,
            tgt_vocab,
            slots,
            keys,
            probs,
        },
        log_likelihood,
    })
}

fn corpus_log_likelihood(encoded: &[Encoded], slots: &HashMap<(u32, u32), usize>, probs: &[f64]) -> f64 {
    let mut ll = 0.0;
    for e in encoded {
        let norm = (e.src.len() as f64).ln();
        for &t in &e.tgt {
            let denom: f64 = e.src.iter().map(|&s| probs[slots[&(s, t)]]).sum();
            ll += denom.ln() - norm;
        }
    }
    ll
}

/// Viterbi links of one sentence pair: `links[j]` is the source position
/// of target token `j`, or `None` for NULL.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectionalAlignment {
    pub links: Vec<Option<usize>>,
}

/// Links each target token to `argmax p(tgt | src)` over NULL and the
/// source positions. Ties go to the earliest candidate, with NULL first.
pub fn ibm1_align(table: &TranslationTable, src: &Sentence, tgt: &Sentence) -> DirectionalAlignment {
    let src_ids: Vec<Option<u32>> = src.tokens().iter().map(|w| table.src_vocab.get(w)).collect();
    let links = tgt
        .tokens()
        .iter()
        .map(|w| {
            let t = table.tgt_vocab.get(w);
            let mut best = None;
            let mut best_p = table.prob_ids(NULL_ID, t);
            for (i, s) in src_ids.iter().enumerate() {
                let p = s.map_or(UNKNOWN_FLOOR, |s| table.prob_ids(s, t));
                if p > best_p {
                    best_p = p;
                    best = Some(i);
                }
            }
            best
        })
        .collect();
    DirectionalAlignment { links }
}

/// Keeps `(i, j)` when the forward alignment links target `j` to source
/// `i` and the reverse alignment links source `i` to target `j`.
pub fn intersect(fwd: &DirectionalAlignment, rev: &DirectionalAlignment) -> WordPairSet {
    let pairs = fwd.links.iter().enumerate().filter_map(|(j, link)| {
        let i = (*link)?;
        (rev.links.get(i).copied().flatten() == Some(j)).then_some((i, j))
    });
    let mut pairs: Vec<_> = pairs.collect();
    pairs.sort_unstable();
    WordPairSet::from_pairs(pairs).expect("mutual links are one-to-one")
}

/// Output of [`extract_word_pairs`].
#[derive(Debug, Clone)]
pub struct PairExtraction {
    pub corpus: ParallelCorpus,
    pub forward: Ibm1Fit,
    pub reverse: Ibm1Fit,
}

/// Trains Model 1 in both directions and replaces every entry's word
/// pairs with the intersection of the two Viterbi alignments.
pub fn extract_word_pairs(corpus: &ParallelCorpus, iterations: usize) -> Result<PairExtraction> {
    let forward = ibm1_train(corpus, iterations)?;
    let reverse = ibm1_train(&corpus.reversed(), iterations)?;
    let pairs = corpus
        .entries()
        .iter()
        .map(|e| {
            let f = ibm1_align(&forward.table, &e.src, &e.tgt);
            let r = ibm1_align(&reverse.table, &e.tgt, &e.src);
            intersect(&f, &r)
        })
        .collect();
    Ok(PairExtraction {
        corpus: corpus.with_pairs(pairs)?,
        forward,
        reverse,
    })
}
