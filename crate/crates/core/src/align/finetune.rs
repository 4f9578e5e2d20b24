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
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::loss::{loss_terms, LossSample};
use super::mapper::Mapper;
use crate::corpus::ParallelCorpus;
use crate::embed::ContextualEmbeddingSet;
use crate::error::{Error, Result};
use crate::numeric::{AdamConfig, AdamState, LrSchedule};

/// Whether all languages go through one mapper or each gets its own.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MapperSharing {
    /// One mapper for every language, source and anchor alike.
    #[default]
    Shared,
    /// One mapper per language, each starting from the same initial
    /// parameters. The anchor language's mapper is still held near the
    /// identity by `R`.
    PerLanguage,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlignConfig {
    pub lambda: f64,
    pub base_lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub warmup_fraction: f64,
    pub schedule: LrSchedule,
    pub epochs: u32,
    pub sentence_pairs_per_language_per_batch: usize,
    pub sharing: MapperSharing,
    pub seed: u64,
}

impl Default for AlignConfig {
    fn default() -> Self {
        let adam = AdamConfig::default();
        AlignConfig {
            lambda: 1.0,
            base_lr: adam.base_lr,
            beta1: adam.beta1,
            beta2: adam.beta2,
            eps: adam.eps,
            warmup_fraction: 0.10,
            schedule: LrSchedule::Constant,
            epochs: 1,
            sentence_pairs_per_language_per_batch: 2,
            sharing: MapperSharing::Shared,
            seed: 0,
        }
    }
}

impl AlignConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Invalid(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(0.0..=1.0).contains(&self.warmup_fraction) {
            return Err(Error::Invalid(format!(
                "warmup fraction must lie in [0, 1], got {}",
                self.warmup_fraction
            )));
        }
        if !(self.base_lr > 0.0 && self.base_lr.is_finite()) {
            return Err(Error::Invalid(format!("base_lr must be positive, got {}", self.base_lr)));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || self.eps.is_nan() || self.eps <= 0.0 {
            return Err(Error::Invalid("Adam betas must lie in [0, 1) and eps must be positive".into()));
        }
        if self.sentence_pairs_per_language_per_batch == 0 {
            return Err(Error::Invalid("batch size must be positive".into()));
        }
        Ok(())
    }

    /// Adam settings for a run of `total_steps`; warmup covers
    /// `round(warmup_fraction · total_steps)` steps.
    pub fn adam(&self, total_steps: u64) -> AdamConfig {
        let warmup = ((self.warmup_fraction * total_steps as f64).round() as u64).min(total_steps);
        AdamConfig {
            base_lr: self.base_lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
            warmup_steps: warmup,
            total_steps,
            schedule: self.schedule,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainStep {
    pub step: u64,
    pub lr: f64,
    pub l: f64,
    pub r: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainTrace {
    pub steps: Vec<TrainStep>,
}

impl TrainTrace {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,lr,L,R,total\n");
        for s in &self.steps {
            writeln!(out, "{},{:e},{:e},{:e},{:e}", s.step, s.lr, s.l, s.r, s.total).expect("string write");
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    /// Mean total loss over the first and last `window` steps.
    pub fn smoothed_ends(&self, window: usize) -> Option<(f64, f64)> {
        if self.steps.is_empty() || window == 0 {
            return None;
        }
        let w = window.min(self.steps.len());
        let mean = |s: &[TrainStep]| s.iter().map(|x| x.total).sum::<f64>() / s.len() as f64;
        Some((mean(&self.steps[..w]), mean(&self.steps[self.steps.len() - w..])))
    }
}

/// Trained mappers, looked up by language.
#[derive(Debug, Clone, PartialEq)]
pub enum LanguageMappers {
    Shared(Mapper),
    PerLanguage(BTreeMap<String, Mapper>),
}

impl LanguageMappers {
    /// The mapper for `language`; `None` only for an unknown language in
    /// per-language mode.
    pub fn get(&self, language: &str) -> Option<&Mapper> {
        match self {
            LanguageMappers::Shared(m) => Some(m),
            LanguageMappers::PerLanguage(map) => map.get(language),
        }
    }

    pub fn apply(&self, language: &str, set: &ContextualEmbeddingSet) -> Result<ContextualEmbeddingSet> {
        self.get(language)
            .ok_or_else(|| Error::Invalid(format!("no mapper trained for language {language:?}")))?
            .apply_set(set)
    }

    /// `(file name, mapper)` pairs: `<stem>.cmap` when shared,
    /// `<stem>.<language>.cmap` otherwise.
    pub fn files(&self, stem: &str) -> Vec<(String, &Mapper)> {
        match self {
            LanguageMappers::Shared(m) => vec![(format!("{stem}.cmap"), m)],
            LanguageMappers::PerLanguage(map) => map.iter().map(|(l, m)| (format!("{stem}.{l}.cmap"), m)).collect(),
        }
    }

    /// Writes every mapper into `dir` and returns the paths written.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
        self.files(stem)
            .into_iter()
            .map(|(name, m)| {
                let path = dir.join(name);
                m.save(&path)?;
                Ok(path)
            })
            .collect()
    }
}

/// One language's training data: a corpus and the base embeddings of
/// both sides.
#[derive(Debug, Clone, Copy)]
pub struct TrainCorpus<'a> {
    pub corpus: &'a ParallelCorpus,
    pub src: &'a ContextualEmbeddingSet,
    pub tgt: &'a ContextualEmbeddingSet,
}

/// Seeded sentence sampler over one corpus.
struct Sampler {
    order: Vec<usize>,
    cursor: usize,
    rng: ChaCha8Rng,
}

impl Sampler {
    fn new(len: usize, seed: u64) -> Self {
        let mut s = Sampler {
            order: (0..len).collect(),
            cursor: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        };
        s.order.shuffle(&mut s.rng);
        s
    }

    fn reshuffle(&mut self) {
        self.order.shuffle(&mut self.rng);
        self.cursor = 0;
    }

    /// Up to `n` indices, stopping at the end of the current pass.
    fn take_pass(&mut self, n: usize) -> &[usize] {
        let start = self.cursor;
        self.cursor = (start + n).min(self.order.len());
        &self.order[start..self.cursor]
    }

    /// Exactly `n` indices, reshuffling whenever a pass is exhausted.
    fn take_cycling(&mut self, n: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            if self.cursor == self.order.len() {
                self.reshuffle();
            }
            out.push(self.order[self.cursor]);
            self.cursor += 1;
        }
        out
    }
}

fn corpus_seed(seed: u64, index: usize) -> u64 {
    seed ^ (index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Trains a copy of `mapper` on `Σ_i L(B_i) + λ·R(B_i)`, where each step
/// draws a batch `B_i` from every corpus.
///
/// An epoch is one pass over the largest corpus; smaller corpora cycle and
/// reshuffle when exhausted.
pub fn finetune_align(
    mapper: &Mapper,
    corpora: &[TrainCorpus<'_>],
    cfg: &AlignConfig,
) -> Result<(LanguageMappers, TrainTrace)> {
    cfg.validate()?;
    if corpora.is_empty() {
        return Err(Error::Empty("no training corpora".into()));
    }
    let anchor_language = corpora[0].corpus.tgt_language();
    for (i, c) in corpora.iter().enumerate() {
        if c.corpus.is_empty() {
            return Err(Error::Empty(format!("training corpus {i} is empty")));
        }
        if c.corpus.tgt_language() != anchor_language {
            return Err(Error::Invalid(format!(
                "corpus {i} targets {:?}, expected the shared anchor language {anchor_language:?}",
                c.corpus.tgt_language()
            )));
        }
        for set in [c.src, c.tgt] {
            mapper.check_dim(set.dim())?;
        }
        ContextualEmbeddingSet::check_covers_corpus(c.src, c.tgt, c.corpus)?;
    }

    let batch = cfg.sentence_pairs_per_language_per_batch;
    let largest = (0..corpora.len())
        .max_by_key(|&i| (corpora[i].corpus.len(), std::cmp::Reverse(i)))
        .expect("non-empty");
    let steps_per_epoch = corpora[largest].corpus.len().div_ceil(batch) as u64;
    let total_steps = steps_per_epoch * u64::from(cfg.epochs);

    // Slot 0 is the anchor language; in shared mode it is the only slot.
    let mut slot_names = vec![anchor_language.to_owned()];
    let src_slot: Vec<usize> = corpora
        .iter()
        .map(|c| match cfg.sharing {
            MapperSharing::Shared => 0,
            MapperSharing::PerLanguage => {
                let lang = c.corpus.src_language();
                slot_names.iter().position(|n| n == lang).unwrap_or_else(|| {
                    slot_names.push(lang.to_owned());
                    slot_names.len() - 1
                })
            }
        })
        .collect();
    let mut models = vec![mapper.clone(); slot_names.len()];
    let finish = |models: Vec<Mapper>| match cfg.sharing {
        MapperSharing::Shared => LanguageMappers::Shared(models.into_iter().next().expect("one slot")),
        MapperSharing::PerLanguage => LanguageMappers::PerLanguage(slot_names.iter().cloned().zip(models).collect()),
    };

    let mut trace = TrainTrace::default();
    if total_steps == 0 {
        return Ok((finish(models), trace));
    }
    let adam_cfg = cfg.adam(total_steps);
    let mut adams = models
        .iter()
        .map(|m| AdamState::new(adam_cfg, m.params().len()))
        .collect::<Result<Vec<_>>>()?;
    let mut samplers: Vec<Sampler> = corpora
        .iter()
        .enumerate()
        .map(|(i, c)| Sampler::new(c.corpus.len(), corpus_seed(cfg.seed, i)))
        .collect();

    for epoch in 0..cfg.epochs {
        if epoch > 0 {
            samplers[largest].reshuffle();
        }
        for _ in 0..steps_per_epoch {
            let picks: Vec<Vec<usize>> = samplers
                .iter_mut()
                .enumerate()
                .map(|(i, s)| if i == largest { s.take_pass(batch).to_vec() } else { s.take_cycling(batch) })
                .collect();
            let terms = corpora
                .par_iter()
                .zip(&picks)
                .zip(&src_slot)
                .map(|((c, idx), &slot)| {
                    let samples: Vec<LossSample> = idx
                        .iter()
                        .map(|&s| LossSample {
                            src: c.src.sentence(s),
                            tgt: c.tgt.sentence(s),
                            anchor: c.tgt.sentence(s),
                            pairs: c.corpus.entries()[s].pairs.as_slice(),
                        })
                        .collect();
                    loss_terms(&models[slot], &models[0], &samples, cfg.lambda)
                })
                .collect::<Result<Vec<_>>>()?;

            let (mut l, mut r) = (0.0, 0.0);
            let mut grads: Vec<Vec<f64>> = models.iter().map(|m| vec![0.0; m.params().len()]).collect();
            for (t, &slot) in terms.iter().zip(&src_slot) {
                l += t.l;
                r += t.r;
                for (g, x) in grads[slot].iter_mut().zip(&t.grad_src) {
                    *g += x;
                }
                for (g, x) in grads[0].iter_mut().zip(&t.grad_tgt) {
                    *g += x;
                }
            }
            let mut lr = 0.0;
            for ((m, a), g) in models.iter_mut().zip(&mut adams).zip(&grads) {
                lr = a.update(m.params_mut(), g)?;
            }
            trace.steps.push(TrainStep {
                step: adams[0].step(),
                lr,
                l,
                r,
                total: l + cfg.lambda * r,
            });
        }
    }
    if models.iter().any(|m| m.params().iter().any(|p| !p.is_finite())) {
        return Err(Error::Numeric("training diverged".into()));
    }
    Ok((finish(models), trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::align::MapperKind;
    use crate::corpus::testutil::{corpus, entry};

    fn toy() -> (ParallelCorpus, ContextualEmbeddingSet, ContextualEmbeddingSet) {
        let c = corpus(vec![
            entry("a b", "x y", &[(0, 0), (1, 1)]),
            entry("b", "y", &[(0, 0)]),
            entry("a", "x", &[(0, 0)]),
        ]);
        let src = ContextualEmbeddingSet::from_sentences(
            2,
            &[
                vec![vec![1.0, 0.0], vec![0.0, 1.0]],
                vec![vec![0.0, 1.0]],
                vec![vec![1.0, 0.0]],
            ],
        )
        .unwrap();
        let tgt = ContextualEmbeddingSet::from_sentences(
            2,
            &[
                vec![vec![0.0, 1.0], vec![-1.0, 0.0]],
                vec![vec![-1.0, 0.0]],
                vec![vec![0.0, 1.0]],
            ],
        )
        .unwrap();
        (c, src, tgt)
    }

    #[test]
    fn zero_epochs_is_a_no_op() {
        let (c, s, t) = toy();
        let m = Mapper::new(MapperKind::Linear, 2, 0, 0).unwrap();
        let cfg = AlignConfig {
            epochs: 0,
            ..AlignConfig::default()
        };
        let (out, trace) = finetune_align(&m, &[TrainCorpus { corpus: &c, src: &s, tgt: &t }], &cfg).unwrap();
        assert_eq!(out, LanguageMappers::Shared(m));
        assert!(trace.steps.is_empty());
    }

    #[test]
    fn trace_is_consistent_and_reproducible() {
        let (c, s, t) = toy();
        let m = Mapper::new(MapperKind::ResidualMlp, 2, 3, 5).unwrap();
        let cfg = AlignConfig {
            epochs: 4,
            base_lr: 1e-2,
            lambda: 0.7,
            ..AlignConfig::default()
        };
        let data = [TrainCorpus { corpus: &c, src: &s, tgt: &t }];
        let (a, ta) = finetune_align(&m, &data, &cfg).unwrap();
        let (b, tb) = finetune_align(&m, &data, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(ta, tb);
        // ceil(3 / 2) steps per epoch.
        assert_eq!(ta.steps.len(), 8);
        assert_eq!(ta.steps[0].step, 1);
        for st in &ta.steps {
            assert!((st.total - (st.l + 0.7 * st.r)).abs() <= 1e-9);
        }
        assert!(ta.to_csv().starts_with("step,lr,L,R,total\n1,"));
    }

    #[test]
    fn linear_mapper_learns_the_rotation() {
        let (c, s, t) = toy();
        let m = Mapper::new(MapperKind::Linear, 2, 0, 0).unwrap();
        let cfg = AlignConfig {
            epochs: 300,
            base_lr: 1e-2,
            lambda: 0.0,
            warmup_fraction: 0.0,
            ..AlignConfig::default()
        };
        let (out, trace) = finetune_align(&m, &[TrainCorpus { corpus: &c, src: &s, tgt: &t }], &cfg).unwrap();
        let (first, last) = trace.smoothed_ends(10).unwrap();
        assert!(last < 0.5 * first, "{first} -> {last}");
        assert!(out.get("src").unwrap().params().iter().all(|p| p.is_finite()));
    }

    #[test]
    fn per_language_mode_keeps_one_mapper_per_language() {
        let (c, s, t) = toy();
        let m = Mapper::new(MapperKind::Linear, 2, 0, 0).unwrap();
        let cfg = AlignConfig {
            epochs: 50,
            base_lr: 1e-2,
            sharing: MapperSharing::PerLanguage,
            ..AlignConfig::default()
        };
        let (out, trace) = finetune_align(&m, &[TrainCorpus { corpus: &c, src: &s, tgt: &t }], &cfg).unwrap();
        let LanguageMappers::PerLanguage(map) = &out else {
            panic!("expected per-language mappers")
        };
        assert_eq!(map.keys().collect::<Vec<_>>(), ["src", "tgt"]);
        assert_ne!(map["src"], map["tgt"]);
        let (first, last) = trace.smoothed_ends(10).unwrap();
        assert!(last < first);
        assert_eq!(out.files("m")[0].0, "m.src.cmap");
        assert!(out.get("xx").is_none());
    }

    #[test]
    fn rejects_bad_inputs() {
        let (c, s, t) = toy();
        let m = Mapper::new(MapperKind::Linear, 3, 0, 0).unwrap();
        let cfg = AlignConfig::default();
        assert!(finetune_align(&m, &[], &cfg).is_err());
        assert!(finetune_align(&m, &[TrainCorpus { corpus: &c, src: &s, tgt: &t }], &cfg).is_err());
        let bad = AlignConfig {
            warmup_fraction: 1.5,
            ..cfg
        };
        let m2 = Mapper::new(MapperKind::Linear, 2, 0, 0).unwrap();
        assert!(finetune_align(&m2, &[TrainCorpus { corpus: &c, src: &s, tgt: &t }], &bad).is_err());
    }
}
