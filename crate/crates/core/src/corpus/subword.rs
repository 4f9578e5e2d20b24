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

use crate::error::{Error, Result};

const CONTINUATION: &str = "##";

/// For each word of a sentence, the index of its last subword.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubwordMap {
    last_subword: Vec<usize>,
}

impl SubwordMap {
    pub fn last_subword(&self, word: usize) -> usize {
        self.last_subword[word]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.last_subword
    }

    pub fn len(&self) -> usize {
        self.last_subword.len()
    }

    pub fn is_empty(&self) -> bool {
        self.last_subword.is_empty()
    }
}

/// Groups WordPiece-style subwords (continuations prefixed with `##`)
/// into words and records where each word ends.
pub fn map_subwords<W: AsRef<str>, S: AsRef<str>>(words: &[W], subwords: &[S]) -> Result<SubwordMap> {
    let mismatch = |msg: String| Error::Invalid(format!("subwords do not compose to words: {msg}"));
    let mut last_subword = Vec::with_capacity(words.len());
    let mut current = String::new();
    for (i, sw) in subwords.iter().enumerate() {
        let sw = sw.as_ref();
        match sw.strip_prefix(CONTINUATION) {
            Some(rest) => {
                if i == 0 {
                    return Err(mismatch(format!("sequence starts with continuation {sw:?}")));
                }
                current.push_str(rest);
            }
            None => {
                if i > 0 {
                    close_word(words, &mut last_subword, &current, i - 1).map_err(mismatch)?;
                }
                current.clear();
                current.push_str(sw);
            }
        }
    }
    if !subwords.is_empty() {
        close_word(words, &mut last_subword, &current, subwords.len() - 1).map_err(mismatch)?;
    }
    if last_subword.len() != words.len() {
        return Err(mismatch(format!(
            "{} words but subwords form {}",
            words.len(),
            last_subword.len()
        )));
    }
    Ok(SubwordMap { last_subword })
}

fn close_word<W: AsRef<str>>(
    words: &[W],
    last: &mut Vec<usize>,
    composed: &str,
    end: usize,
) -> std::result::Result<(), String> {
    let k = last.len();
    match words.get(k) {
        Some(w) if w.as_ref() == composed => {
            last.push(end);
            Ok(())
        }
        Some(w) => Err(format!("word {k} is {:?}, subwords give {composed:?}", w.as_ref())),
        None => Err(format!("extra subword group {composed:?}")),
    }
}
