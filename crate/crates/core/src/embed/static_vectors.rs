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

//! Static word vectors in the fastText/word2vec text format: a
//! `count dim` header line, then `word x1 ... x_dim` per line.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use super::ContextualEmbeddingSet;
use crate::corpus::Sentence;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct StaticEmbeddingTable {
    dim: usize,
    words: Vec<String>,
    index: HashMap<String, usize>,
    data: Vec<f64>,
}

impl StaticEmbeddingTable {
    pub fn new(dim: usize) -> Self {
        StaticEmbeddingTable {
            dim,
            words: Vec::new(),
            index: HashMap::new(),
            data: Vec::new(),
        }
    }

    /// Inserts a vector; returns `false` (and keeps the existing entry)
    /// when the word is already present.
    pub fn insert(&mut self, word: &str, vector: &[f64]) -> Result<bool> {
        if vector.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: vector.len(),
            });
        }
        if vector.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numeric(format!("vector for {word:?} is not finite")));
        }
        if self.index.contains_key(word) {
            return Ok(false);
        }
        self.index.insert(word.to_owned(), self.words.len());
        self.words.push(word.to_owned());
        self.data.extend_from_slice(vector);
        Ok(true)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.index.get(word).map(|&i| self.row(i))
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    fn with_data(&self, data: Vec<f64>) -> Self {
        StaticEmbeddingTable {
            dim: self.dim,
            words: self.words.clone(),
            index: self.index.clone(),
            data,
        }
    }

    /// Looks up every token of every sentence; unknown words get a zero
    /// vector (cosine 0 against everything).
    pub fn embed_sentences<'a>(&self, sentences: impl Iterator<Item = &'a Sentence>) -> ContextualEmbeddingSet {
        let zero = vec![0.0; self.dim];
        let mut set = ContextualEmbeddingSet::new(self.dim);
        for s in sentences {
            set.push_sentence(s.tokens().iter().map(|t| self.get(t).unwrap_or(&zero)))
                .expect("table vectors are finite and uniform");
        }
        set
    }
}

pub fn load_static_vectors(path: &Path) -> Result<StaticEmbeddingTable> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_static_vectors(&text)
}

pub fn parse_static_vectors(text: &str) -> Result<StaticEmbeddingTable> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| Error::Empty("static vector file".into()))?;
    let header_err = || Error::Parse {
        line: 1,
        message: format!("expected `count dim` header, found {header:?}"),
    };
    let mut h = header.split_whitespace();
    let count: usize = h.next().and_then(|s| s.parse().ok()).ok_or_else(header_err)?;
    let dim: usize = h.next().and_then(|s| s.parse().ok()).ok_or_else(header_err)?;
    if h.next().is_some() || dim == 0 {
        return Err(header_err());
    }

    let mut table = StaticEmbeddingTable::new(dim);
    let mut seen = 0;
    let mut values = Vec::with_capacity(dim);
    for (k, line) in lines {
        let mut fields = line.split_whitespace();
        let word = fields.next().expect("non-blank line");
        values.clear();
        for f in fields {
            let x: f64 = f.parse().map_err(|_| Error::Parse {
                line: k + 1,
                message: format!("non-numeric component {f:?}"),
            })?;
            values.push(x);
        }
        if values.len() != dim {
            return Err(Error::Parse {
                line: k + 1,
                message: format!("{} components for dim {dim}", values.len()),
            });
        }
        table.insert(word, &values)?;
        seen += 1;
    }
    if seen != count {
        return Err(Error::LineCountMismatch {
            what: format!("header declares {count} vectors, file has {seen}"),
        });
    }
    Ok(table)
}

/// Scales every vector to unit length.
pub fn unit_normalize(table: &StaticEmbeddingTable) -> Result<StaticEmbeddingTable> {
    let mut data = table.data.clone();
    for (i, row) in data.chunks_exact_mut(table.dim).enumerate() {
        let n = crate::numeric::norm(row);
        if n == 0.0 || !n.is_finite() {
            return Err(Error::Numeric(format!(
                "cannot normalize zero vector for {:?}",
                table.words[i]
            )));
        }
        row.iter_mut().for_each(|x| *x /= n);
    }
    Ok(table.with_data(data))
}

/// Subtracts the table mean from every vector.
pub fn mean_center(table: &StaticEmbeddingTable) -> StaticEmbeddingTable {
    let mut mean = vec![0.0; table.dim];
    for row in table.data.chunks_exact(table.dim) {
        for (m, x) in mean.iter_mut().zip(row) {
            *m += x;
        }
    }
    let n = table.len().max(1) as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    let mut data = table.data.clone();
    for row in data.chunks_exact_mut(table.dim) {
        for (x, m) in row.iter_mut().zip(&mean) {
            *x -= m;
        }
    }
    table.with_data(data)
}

/// Unit-normalize, mean-center, unit-normalize again.
pub fn normalize_center_normalize(table: &StaticEmbeddingTable) -> Result<StaticEmbeddingTable> {
    if table.len() < 2 {
        return Err(Error::Invalid(format!(
            "centering needs at least 2 vectors, table has {}",
            table.len()
        )));
    }
    unit_normalize(&mean_center(&unit_normalize(table)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(rows: &[(&str, &[f64])]) -> StaticEmbeddingTable {
        let mut t = StaticEmbeddingTable::new(rows[0].1.len());
        for (w, v) in rows {
            t.insert(w, v).unwrap();
        }
        t
    }

    #[test]
    fn parses_text_format() {
        let t = parse_static_vectors("2 2\na 1 0\nb 0 1\n").unwrap();
        assert_eq!(t.get("a"), Some(&[1.0, 0.0][..]));
        assert_eq!(t.get("b"), Some(&[0.0, 1.0][..]));
    }

    #[test]
    fn duplicate_keeps_first() {
        let t = parse_static_vectors("3 2\na 1 0\na 5 5\nb 0 1\n").unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.get("a"), Some(&[1.0, 0.0][..]));
    }

    #[test]
    fn parse_errors() {
        assert!(parse_static_vectors("1 2\na 1\n").is_err());
        assert!(parse_static_vectors("1 2\na 1 z\n").is_err());
        assert!(matches!(
            parse_static_vectors("3 2\na 1 0\n"),
            Err(Error::LineCountMismatch { .. })
        ));
        assert!(parse_static_vectors("two 2\n").is_err());
    }

    #[test]
    fn normalize_center_normalize_two_axes() {
        // Oracle: unit vectors (1,0),(0,1); mean (.5,.5); centered ±(.5,-.5); renormalized ±(1/√2)(1,-1).
        let h = std::f64::consts::FRAC_1_SQRT_2;
        for input in [
            table(&[("a", &[1.0, 0.0]), ("b", &[0.0, 1.0])]),
            table(&[("a", &[2.0, 0.0]), ("b", &[0.0, 3.0])]),
        ] {
            let out = normalize_center_normalize(&input).unwrap();
            let a = out.get("a").unwrap();
            let b = out.get("b").unwrap();
            assert!((a[0] - h).abs() < 1e-12 && (a[1] + h).abs() < 1e-12);
            assert!((b[0] + h).abs() < 1e-12 && (b[1] - h).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_inputs() {
        let same = table(&[("a", &[1.0, 0.0]), ("b", &[1.0, 0.0])]);
        assert!(matches!(normalize_center_normalize(&same), Err(Error::Numeric(_))));
        let one = table(&[("a", &[1.0, 0.0])]);
        assert!(matches!(normalize_center_normalize(&one), Err(Error::Invalid(_))));
        let zero = table(&[("a", &[0.0, 0.0]), ("b", &[1.0, 0.0])]);
        assert!(normalize_center_normalize(&zero).is_err());
    }

    #[test]
    fn embeds_sentences_with_zero_for_unknown() {
        let t = table(&[("a", &[1.0, 2.0])]);
        let s = Sentence::parse("a zz", "x").unwrap();
        let set = t.embed_sentences(std::iter::once(&s));
        assert_eq!(set.vector(0, 0), &[1.0, 2.0]);
        assert_eq!(set.vector(0, 1), &[0.0, 0.0]);
    }
}
