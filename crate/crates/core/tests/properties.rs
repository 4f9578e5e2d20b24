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

//! Cross-module invariants checked on generated inputs.

use std::collections::HashSet;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ctxalign::align::{procrustes_fit, procrustes_objective, Mapper, MapperKind, RotationMap};
use ctxalign::corpus::{
    dedupe_first_occurrence, filter_eval_pairs, split_corpus, ParallelCorpus, ParallelEntry, Sentence, WordPairSet,
};
use ctxalign::embed::ContextualEmbeddingSet;
use ctxalign::numeric::{lr_at, AdamConfig, Matrix};
use ctxalign::retrieval::{build_pool, retrieve, score_matrix, Similarity};
use ctxalign::synth::{generate, random_orthogonal, Distortion, SynthConfig};
use ctxalign::wordpairs::{extract_word_pairs, ibm1_align, ibm1_train};

/// A one-to-one link set inside an `ns × nt` sentence pair.
fn links(ns: usize, nt: usize, seed: u64) -> Vec<(usize, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s: Vec<usize> = (0..ns).collect();
    let mut t: Vec<usize> = (0..nt).collect();
    s.shuffle(&mut rng);
    t.shuffle(&mut rng);
    let n = (seed as usize) % (ns.min(nt) + 1);
    let mut v: Vec<_> = s.into_iter().zip(t).take(n).collect();
    v.sort_unstable();
    v
}

prop_compose! {
    fn small_corpus(max_sentences: usize)(
        shape in proptest::collection::vec((1usize..7, 1usize..7, any::<u64>()), 1..max_sentences),
        vocab in 2usize..12,
    ) -> ParallelCorpus {
        let entries = shape
            .iter()
            .enumerate()
            .map(|(k, &(ns, nt, seed))| {
                let word = |side: &str, i: usize| format!("{side}{}", (seed as usize).wrapping_add(i * 7 + k) % vocab);
                let src: Vec<String> = (0..ns).map(|i| word("a", i)).collect();
                let tgt: Vec<String> = (0..nt).map(|i| word("b", i)).collect();
                ParallelEntry::new(
                    Sentence::new(src, "src").unwrap(),
                    Sentence::new(tgt, "tgt").unwrap(),
                    WordPairSet::from_pairs(links(ns, nt, seed)).unwrap(),
                )
                .unwrap()
            })
            .collect();
        ParallelCorpus::new("src", "tgt", entries).unwrap()
    }
}

fn pair_set(c: &ParallelCorpus) -> HashSet<(usize, usize, usize)> {
    c.entries()
        .iter()
        .enumerate()
        .flat_map(|(s, e)| e.pairs.iter().map(move |p| (s, p.src, p.tgt)))
        .collect()
}

fn rows(seed: u64, n: usize, d: usize) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..n * d).map(|_| rand::Rng::random_range(&mut rng, -1.0..1.0)).collect();
    Matrix::from_vec(n, d, data).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn pharaoh_round_trips(ns in 1usize..20, nt in 1usize..20, seed in any::<u64>()) {
        let set = WordPairSet::from_pairs(links(ns, nt, seed)).unwrap();
        prop_assert_eq!(WordPairSet::parse_pharaoh(&set.to_pharaoh()).unwrap(), set);
    }

    #[test]
    fn filters_only_remove_pairs(eval in small_corpus(12), train in small_corpus(12)) {
        let filtered = filter_eval_pairs(&eval, &train).unwrap();
        prop_assert_eq!(filtered.len(), eval.len());
        prop_assert!(pair_set(&filtered).is_subset(&pair_set(&eval)));
        let deduped = dedupe_first_occurrence(&eval);
        prop_assert!(pair_set(&deduped).is_subset(&pair_set(&eval)));
        // Every word type is kept at most once on each side.
        let mut seen_src = HashSet::new();
        let mut seen_tgt = HashSet::new();
        for e in deduped.entries() {
            for p in e.pairs.iter() {
                let (s, t) = e.words(p);
                prop_assert!(seen_src.insert(s.to_owned()));
                prop_assert!(seen_tgt.insert(t.to_owned()));
            }
        }
    }

    #[test]
    fn splits_are_disjoint_and_ordered(n in 1usize..60, test in 0usize..20, dev in 0usize..20, train in 0usize..60) {
        let c = ParallelCorpus::new(
            "src",
            "tgt",
            (0..n)
                .map(|i| ParallelEntry::new(
                    Sentence::parse(&format!("s{i}"), "src").unwrap(),
                    Sentence::parse("t", "tgt").unwrap(),
                    WordPairSet::new(),
                ).unwrap())
                .collect(),
        )
        .unwrap();
        match split_corpus(&c, test, dev, train) {
            Err(_) => prop_assert!(n < test + dev),
            Ok(s) => {
                prop_assert_eq!(s.test_range.end, n);
                prop_assert_eq!(s.dev_range.end, s.test_range.start);
                prop_assert_eq!(s.train_range.end, s.dev_range.start);
                prop_assert_eq!(s.test.len(), test);
                prop_assert_eq!(s.dev.len(), dev);
                prop_assert_eq!(s.train.len(), train.min(n - test - dev));
            }
        }
    }

    #[test]
    fn ibm1_invariants(c in small_corpus(25), iterations in 1usize..6) {
        let fit = ibm1_train(&c, iterations).unwrap();
        for (w, sum) in fit.table.row_sums() {
            prop_assert!((sum - 1.0).abs() <= 1e-9, "{} sums to {}", w, sum);
        }
        prop_assert!(fit.log_likelihood.windows(2).all(|w| w[1] >= w[0] - 1e-9));
        let rev = ibm1_train(&c.reversed(), iterations).unwrap();
        let ex = extract_word_pairs(&c, iterations).unwrap();
        for e in ex.corpus.entries() {
            let f = ibm1_align(&fit.table, &e.src, &e.tgt);
            let r = ibm1_align(&rev.table, &e.tgt, &e.src);
            let mut src_seen = HashSet::new();
            let mut tgt_seen = HashSet::new();
            for p in e.pairs.iter() {
                prop_assert!(src_seen.insert(p.src) && tgt_seen.insert(p.tgt));
                prop_assert_eq!(f.links[p.tgt], Some(p.src));
                prop_assert_eq!(r.links[p.src], Some(p.tgt));
            }
        }
    }

    #[test]
    fn procrustes_is_orthogonal_and_beats_other_rotations(seed in any::<u64>(), d in 1usize..7, n in 1usize..30) {
        let x = rows(seed, n, d);
        let y = rows(seed ^ 1, n, d);
        let w = procrustes_fit(&x, &y).unwrap();
        prop_assert!(w.matrix().orthonormality_error() < 1e-9);
        let best = procrustes_objective(&w, &x, &y);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 2);
        for _ in 0..5 {
            let other = RotationMap::new(random_orthogonal(&mut rng, d)).unwrap();
            prop_assert!(best <= procrustes_objective(&other, &x, &y) + 1e-9);
        }
        prop_assert!(best <= procrustes_objective(&RotationMap::identity(d), &x, &y) + 1e-9);
    }

    #[test]
    fn retrieval_is_argmax_with_low_index_ties(seed in any::<u64>(), nq in 1usize..25, nc in 1usize..25, k in 1usize..30, block in 1usize..9, dup in any::<bool>()) {
        let d = 3;
        let mut cands = rows(seed ^ 3, nc, d).into_vec();
        if dup && nc > 1 {
            // Duplicate a candidate so ties occur.
            let first = cands[..d].to_vec();
            cands[(nc - 1) * d..].copy_from_slice(&first);
        }
        let mut qs = ContextualEmbeddingSet::new(d);
        qs.push_flat(rows(seed, nq, d).as_slice()).unwrap();
        let mut cs = ContextualEmbeddingSet::new(d);
        cs.push_flat(&cands).unwrap();
        let (q, c) = (build_pool(&qs).unwrap(), build_pool(&cs).unwrap());
        for sim in [Similarity::Cosine, Similarity::Csls] {
            let scores = score_matrix(&q, &c, sim, k).unwrap();
            let got = retrieve(&q, &c, sim, k, block).unwrap();
            for (i, m) in got.iter().enumerate() {
                let row = scores.row(i);
                let best = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let first = row.iter().position(|&s| s == best).unwrap();
                prop_assert_eq!(m.index, first);
                prop_assert!(row.iter().all(|s| (-4.0..=4.0).contains(s)));
            }
        }
    }

    #[test]
    fn mapper_and_rotation_files_round_trip(seed in any::<u64>(), d in 1usize..6, h in 1usize..6, linear in any::<bool>()) {
        let kind = if linear { MapperKind::Linear } else { MapperKind::ResidualMlp };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = (0..kind.num_params(d, h)).map(|_| rand::Rng::random_range(&mut rng, -2.0..2.0)).collect();
        let m = Mapper::from_params(kind, d, h, params).unwrap();
        prop_assert_eq!(Mapper::from_bytes(&m.to_bytes()).unwrap(), m);
        let w = RotationMap::new(random_orthogonal(&mut rng, d)).unwrap();
        prop_assert_eq!(RotationMap::from_bytes(&w.to_bytes()).unwrap(), w);
    }

    #[test]
    fn warmup_ramps_to_base(warmup in 1u64..500, extra in 0u64..500) {
        let cfg = AdamConfig { warmup_steps: warmup, total_steps: warmup + extra, ..AdamConfig::default() };
        let mut prev = 0.0;
        for s in 1..=warmup + extra {
            let lr = lr_at(&cfg, s);
            prop_assert!(lr >= prev && lr <= cfg.base_lr);
            prev = lr;
        }
        prop_assert_eq!(lr_at(&cfg, warmup), cfg.base_lr);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn synthetic_bundles_are_consistent(seed in any::<u64>(), tanh in any::<bool>(), swap in 0.0f64..0.5) {
        let cfg = SynthConfig {
            vocab_size: 40,
            corpus_size: 30,
            dim: 6,
            swap_prob: swap,
            distortion: if tanh { Distortion::OrthogonalTanh } else { Distortion::Orthogonal },
            seed,
            ..SynthConfig::default()
        };
        let b = generate(&cfg).unwrap();
        ContextualEmbeddingSet::check_covers_corpus(&b.src_set, &b.tgt_set, &b.corpus).unwrap();
        // Gold pairs cover every source token and follow one lexicon.
        let mut lexicon = std::collections::HashMap::new();
        for e in b.corpus.entries() {
            prop_assert_eq!(e.pairs.len(), e.src.len());
            prop_assert_eq!(e.src.len(), e.tgt.len());
            for p in e.pairs.iter() {
                let (s, t) = e.words(p);
                prop_assert!(s.starts_with('s') && t.starts_with('t'));
                prop_assert_eq!(lexicon.entry(s.to_owned()).or_insert_with(|| t.to_owned()).as_str(), t);
            }
        }
        prop_assert!(b.gold_map.q.matrix().orthonormality_error() < 1e-9);
    }
}

#[test]
fn noiseless_gold_map_retrieves_perfectly() {
    use ctxalign::align::rotation_apply;
    use ctxalign::retrieval::{evaluate, RetrievalConfig};
    let distinct = |set: &ContextualEmbeddingSet| {
        let keys: HashSet<Vec<u64>> = set
            .as_flat()
            .chunks_exact(set.dim())
            .map(|v| v.iter().map(|x| x.to_bits()).collect())
            .collect();
        keys.len() == set.total_tokens()
    };
    let mut checked = 0;
    for seed in 0..6 {
        let cfg = SynthConfig {
            vocab_size: 300,
            corpus_size: 100,
            dim: 16,
            noise: 0.0,
            seed,
            ..SynthConfig::default()
        };
        let b = generate(&cfg).unwrap();
        // The guarantee needs pairwise distinct contextual vectors.
        if !distinct(&b.src_set) || !distinct(&b.tgt_set) {
            continue;
        }
        checked += 1;
        let mapped = rotation_apply(&b.gold_map.q, &b.src_set).unwrap();
        let acc = |sim| {
            evaluate(&mapped, &b.tgt_set, &b.corpus, &RetrievalConfig { sim, ..RetrievalConfig::default() })
                .unwrap()
                .mean_accuracy
        };
        assert_eq!(acc(Similarity::Cosine), 1.0, "seed {seed}");
        // The hubness penalty can outweigh an exact match, so CSLS is only
        // near-perfect here.
        assert!(acc(Similarity::Csls) > 0.99, "seed {seed}");
    }
    assert!(checked >= 3, "only {checked} bundles had distinct vectors");
}
