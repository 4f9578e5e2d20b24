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

//! Seeded synthetic benchmark with a known cross-lingual distortion.
//!
//! Source tokens get contextual vectors `normalize(b_w + α·mean(b_neighbours))`
//! over a window of one. The target language is a word-for-word image of
//! the source under a random bijective lexicon, whose base vectors are
//! `D(b_w) + σ·ε` with `D(v) = Q·v` or `D(v) = Q·tanh(1.5·v)`.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::align::RotationMap;
use crate::corpus::{write_parallel_corpus, ParallelCorpus, ParallelEntry, Sentence, WordPairSet};
use crate::embed::{write_embeddings, ContextualEmbeddingSet};
use crate::error::{Error, Result};
use crate::numeric::Matrix;

/// Gain inside the nonlinear distortion.
pub const TANH_GAIN: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Distortion {
    Orthogonal,
    #[serde(alias = "orthogonal+tanh")]
    OrthogonalTanh,
}

impl std::str::FromStr for Distortion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "orthogonal" => Ok(Distortion::Orthogonal),
            "orthogonal-tanh" | "orthogonal+tanh" => Ok(Distortion::OrthogonalTanh),
            other => Err(Error::Invalid(format!("unknown distortion {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub vocab_size: usize,
    pub corpus_size: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub dim: usize,
    pub context_mix: f64,
    pub distortion: Distortion,
    pub noise: f64,
    /// Probability of swapping each adjacent target token pair.
    pub swap_prob: f64,
    pub src_language: String,
    pub tgt_language: String,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            vocab_size: 300,
            corpus_size: 2000,
            min_len: 5,
            max_len: 12,
            dim: 32,
            context_mix: 0.3,
            distortion: Distortion::Orthogonal,
            noise: 0.01,
            swap_prob: 0.0,
            src_language: "src".into(),
            tgt_language: "tgt".into(),
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Invalid(m));
        if self.vocab_size < 2 {
            return bad(format!("vocab_size must be at least 2, got {}", self.vocab_size));
        }
        if self.min_len < 1 || self.max_len < self.min_len {
            return bad(format!("invalid length range [{}, {}]", self.min_len, self.max_len));
        }
        if self.dim < 2 {
            return bad(format!("dim must be at least 2, got {}", self.dim));
        }
        if !(0.0..1.0).contains(&self.context_mix) {
            return bad(format!("context_mix must lie in [0, 1), got {}", self.context_mix));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return bad(format!("noise must be >= 0, got {}", self.noise));
        }
        if !(0.0..=1.0).contains(&self.swap_prob) {
            return bad(format!("swap_prob must lie in [0, 1], got {}", self.swap_prob));
        }
        if self.src_language == self.tgt_language {
            return bad("source and target languages must differ".into());
        }
        Ok(())
    }
}

/// Ground-truth distortion parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct GoldMap {
    pub q: RotationMap,
    pub distortion: Distortion,
    pub noise: f64,
    pub context_mix: f64,
    pub seed: u64,
}

#[derive(Debug, Serialize)]
struct GoldSidecar {
    mode: Distortion,
    noise: f64,
    context_mix: f64,
    seed: u64,
    dim: usize,
}

impl GoldMap {
    pub fn sidecar_json(&self) -> String {
        serde_json::to_string_pretty(&GoldSidecar {
            mode: self.distortion,
            noise: self.noise,
            context_mix: self.context_mix,
            seed: self.seed,
            dim: self.q.dim(),
        })
        .expect("sidecar serializes")
    }

    /// `D(v)`, without noise.
    pub fn distort(&self, v: &[f64]) -> Result<Vec<f64>> {
        match self.distortion {
            Distortion::Orthogonal => self.q.apply(v),
            Distortion::OrthogonalTanh => {
                let squashed: Vec<f64> = v.iter().map(|x| (TANH_GAIN * x).tanh()).collect();
                self.q.apply(&squashed)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthBundle {
    pub corpus: ParallelCorpus,
    pub src_set: ContextualEmbeddingSet,
    pub tgt_set: ContextualEmbeddingSet,
    pub gold_map: GoldMap,
}

/// File names used by [`SynthBundle::write`].
pub mod files {
    pub const SRC_TEXT: &str = "src.txt";
    pub const TGT_TEXT: &str = "tgt.txt";
    pub const GOLD_PAIRS: &str = "gold.pairs";
    pub const SRC_EMB: &str = "src.ctxe";
    pub const TGT_EMB: &str = "tgt.ctxe";
    pub const GOLD_MAP: &str = "gold_map.crot";
    pub const GOLD_MAP_JSON: &str = "gold_map.json";
}

impl SynthBundle {
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_parallel_corpus(
            &self.corpus,
            &dir.join(files::SRC_TEXT),
            &dir.join(files::TGT_TEXT),
            &dir.join(files::GOLD_PAIRS),
        )?;
        write_embeddings(&self.src_set, &dir.join(files::SRC_EMB))?;
        write_embeddings(&self.tgt_set, &dir.join(files::TGT_EMB))?;
        self.gold_map.q.save(&dir.join(files::GOLD_MAP))?;
        let json = dir.join(files::GOLD_MAP_JSON);
        std::fs::write(&json, self.gold_map.sidecar_json() + "\n").map_err(|e| Error::io(&json, e))
    }
}

fn gaussian_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn normalize(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

/// Haar-distributed orthogonal matrix: Gram-Schmidt on Gaussian columns.
pub fn random_orthogonal(rng: &mut ChaCha8Rng, dim: usize) -> Matrix {
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(dim);
    while cols.len() < dim {
        let mut v = gaussian_vec(rng, dim);
        for _ in 0..2 {
            for c in &cols {
                let p: f64 = v.iter().zip(c).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(c).for_each(|(a, b)| *a -= p * b);
            }
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-8 {
            v.iter_mut().for_each(|x| *x /= n);
            cols.push(v);
        }
    }
    let mut m = Matrix::zeros(dim, dim);
    for (j, c) in cols.iter().enumerate() {
        for (i, x) in c.iter().enumerate() {
            m[(i, j)] = *x;
        }
    }
    m
}

fn contextual(base: &[Vec<f64>], ids: &[usize], alpha: f64, dim: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(ids.len() * dim);
    for i in 0..ids.len() {
        let mut v = base[ids[i]].clone();
        let neighbours: Vec<usize> = [i.checked_sub(1), Some(i + 1).filter(|&j| j < ids.len())]
            .into_iter()
            .flatten()
            .collect();
        if !neighbours.is_empty() && alpha != 0.0 {
            let w = alpha / neighbours.len() as f64;
            for &j in &neighbours {
                v.iter_mut().zip(&base[ids[j]]).for_each(|(a, b)| *a += w * b);
            }
        }
        normalize(&mut v);
        out.extend(v);
    }
    out
}

/// Generates a bundle; identical configs give bit-identical bundles.
pub fn generate(cfg: &SynthConfig) -> Result<SynthBundle> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (n, d) = (cfg.vocab_size, cfg.dim);

    let src_base: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let mut v = gaussian_vec(&mut rng, d);
            normalize(&mut v);
            v
        })
        .collect();
    let mut lexicon: Vec<usize> = (0..n).collect();
    lexicon.shuffle(&mut rng);
    let gold_map = GoldMap {
        q: RotationMap::new(random_orthogonal(&mut rng, d))?,
        distortion: cfg.distortion,
        noise: cfg.noise,
        context_mix: cfg.context_mix,
        seed: cfg.seed,
    };
    // Indexed by target type id.
    let mut tgt_base = vec![Vec::new(); n];
    for w in 0..n {
        let mut v = gold_map.distort(&src_base[w])?;
        let eps = gaussian_vec(&mut rng, d);
        v.iter_mut().zip(&eps).for_each(|(a, e)| *a += cfg.noise * e);
        tgt_base[lexicon[w]] = v;
    }

    let mut entries = Vec::with_capacity(cfg.corpus_size);
    let mut src_set = ContextualEmbeddingSet::new(d);
    let mut tgt_set = ContextualEmbeddingSet::new(d);
    for _ in 0..cfg.corpus_size {
        let len = rng.random_range(cfg.min_len..=cfg.max_len);
        let src_ids: Vec<usize> = (0..len).map(|_| rng.random_range(0..n)).collect();
        // position[i] = target position of source token i.
        let mut position: Vec<usize> = (0..len).collect();
        if cfg.swap_prob > 0.0 {
            let mut i = 0;
            while i + 1 < len {
                if rng.random_bool(cfg.swap_prob) {
                    position.swap(i, i + 1);
                    i += 2;
                } else {
                    i += 1;
                }
            }
        }
        let mut tgt_ids = vec![0; len];
        for (i, &w) in src_ids.iter().enumerate() {
            tgt_ids[position[i]] = lexicon[w];
        }
        let src = Sentence::new(src_ids.iter().map(|w| format!("s{w}")).collect(), cfg.src_language.clone())?;
        let tgt = Sentence::new(tgt_ids.iter().map(|w| format!("t{w}")).collect(), cfg.tgt_language.clone())?;
        let pairs = WordPairSet::from_pairs(position.iter().copied().enumerate())?;
        entries.push(ParallelEntry::new(src, tgt, pairs)?);
        src_set.push_flat(&contextual(&src_base, &src_ids, cfg.context_mix, d))?;
        tgt_set.push_flat(&contextual(&tgt_base, &tgt_ids, cfg.context_mix, d))?;
    }
    let corpus = ParallelCorpus::new(cfg.src_language.clone(), cfg.tgt_language.clone(), entries)?;
    Ok(SynthBundle {
        corpus,
        src_set,
        tgt_set,
        gold_map,
    })
}
