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

use std::ops::Range;

use super::ParallelCorpus;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct CorpusSplits {
    pub train: ParallelCorpus,
    pub dev: ParallelCorpus,
    pub test: ParallelCorpus,
    /// Entry index ranges of each block in the source corpus.
    pub train_range: Range<usize>,
    pub dev_range: Range<usize>,
    pub test_range: Range<usize>,
}

/// Takes the last `test_n` entries as test, the `dev_n` entries before
/// them as dev, and up to `train_n` entries before dev as train. Each
/// block keeps file order.
pub fn split_corpus(
    corpus: &ParallelCorpus,
    test_n: usize,
    dev_n: usize,
    train_n: usize,
) -> Result<CorpusSplits> {
    let n = corpus.len();
    let held_out = test_n + dev_n;
    if n < held_out {
        return Err(Error::InsufficientEntries {
            available: n,
            required: held_out,
        });
    }
    let test_start = n - test_n;
    let dev_start = test_start - dev_n;
    let train_start = dev_start.saturating_sub(train_n);
    Ok(CorpusSplits {
        train: corpus.subset(train_start..dev_start),
        dev: corpus.subset(dev_start..test_start),
        test: corpus.subset(test_start..n),
        train_range: train_start..dev_start,
        dev_range: dev_start..test_start,
        test_range: test_start..n,
    })
}
