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

use super::mapper::{Activations, Mapper};
use crate::corpus::WordPair;
use crate::error::{Error, Result};

/// One sentence pair as seen by the loss. Vector slices are flat
/// row-major `tokens × d`; `anchor` holds the frozen target vectors and
/// has the same shape as `tgt`.
#[derive(Debug, Clone, Copy)]
pub struct LossSample<'a> {
    pub src: &'a [f64],
    pub tgt: &'a [f64],
    pub anchor: &'a [f64],
    pub pairs: &'a [WordPair],
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossValue {
    /// Mean squared distance over word pairs.
    pub l: f64,
    /// Mean squared drift of target tokens from their anchors.
    pub r: f64,
    /// `l + λ·r`
    pub total: f64,
    /// `∂total/∂θ`, laid out like [`Mapper::params`].
    pub grad: Vec<f64>,
}

/// `L + λR` and its gradient for one batch.
///
/// Fails if the batch holds no word pairs, since `L` is then undefined.
pub fn alignment_loss(mapper: &Mapper, batch: &[LossSample<'_>], lambda: f64) -> Result<LossValue> {
    if batch.iter().all(|s| s.pairs.is_empty()) {
        return Err(Error::Empty("batch contains no word pairs".into()));
    }
    let t = loss_terms(mapper, mapper, batch, lambda)?;
    let grad = t.grad_src.iter().zip(&t.grad_tgt).map(|(a, b)| a + b).collect();
    Ok(LossValue {
        l: t.l,
        r: t.r,
        total: t.l + lambda * t.r,
        grad,
    })
}

/// Loss terms with separate source and target mappers and their
/// gradients kept apart.
#[derive(Debug, Clone)]
pub(crate) struct SplitLoss {
    pub l: f64,
    pub r: f64,
    pub grad_src: Vec<f64>,
    pub grad_tgt: Vec<f64>,
}

/// `L + λR` with `src_m` applied to source tokens and `tgt_m` to target
/// tokens. A batch without pairs contributes `L = 0`.
pub(crate) fn loss_terms(
    src_m: &Mapper,
    tgt_m: &Mapper,
    batch: &[LossSample<'_>],
    lambda: f64,
) -> Result<SplitLoss> {
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(Error::Invalid(format!("lambda must be finite and non-negative, got {lambda}")));
    }
    if src_m.dim() != tgt_m.dim() {
        return Err(Error::DimensionMismatch {
            expected: tgt_m.dim(),
            found: src_m.dim(),
        });
    }
    let d = tgt_m.dim();
    let mut num_pairs = 0usize;
    let mut num_tgt = 0usize;
    for (i, s) in batch.iter().enumerate() {
        for (what, buf) in [("src", s.src), ("tgt", s.tgt), ("anchor", s.anchor)] {
            if buf.len() % d != 0 {
                return Err(Error::Invalid(format!(
                    "sample {i}: {what} buffer of {} values is not a multiple of dim {d}",
                    buf.len()
                )));
            }
        }
        if s.anchor.len() != s.tgt.len() {
            return Err(Error::DimensionMismatch {
                expected: s.tgt.len(),
                found: s.anchor.len(),
            });
        }
        let (ns, nt) = (s.src.len() / d, s.tgt.len() / d);
        for p in s.pairs {
            if p.src >= ns {
                return Err(Error::IndexOutOfRange {
                    sentence: i,
                    side: "source",
                    index: p.src,
                    len: ns,
                });
            }
            if p.tgt >= nt {
                return Err(Error::IndexOutOfRange {
                    sentence: i,
                    side: "target",
                    index: p.tgt,
                    len: nt,
                });
            }
        }
        num_pairs += s.pairs.len();
        num_tgt += nt;
    }

    let mut grad_src = vec![0.0; src_m.params().len()];
    let mut grad_tgt = vec![0.0; tgt_m.params().len()];
    let (mut l_sum, mut r_sum) = (0.0, 0.0);
    let inv_pairs = if num_pairs > 0 { 1.0 / num_pairs as f64 } else { 0.0 };
    let inv_tgt = if num_tgt > 0 { 1.0 / num_tgt as f64 } else { 0.0 };

    let mut act = Activations::default();
    for s in batch {
        let nt = s.tgt.len() / d;
        let mut tgt_out = vec![0.0; nt * d];
        let mut tgt_act = Vec::with_capacity(nt);
        for (t, out) in s.tgt.chunks_exact(d).zip(tgt_out.chunks_exact_mut(d)) {
            tgt_m.forward_into(t, out, &mut act);
            tgt_act.push(act.clone());
        }
        // Upstream gradient per target token, filled by both terms.
        let mut tgt_g = vec![0.0; nt * d];
        for ((out, a), g) in tgt_out
            .chunks_exact(d)
            .zip(s.anchor.chunks_exact(d))
            .zip(tgt_g.chunks_exact_mut(d))
        {
            for k in 0..d {
                let diff = out[k] - a[k];
                r_sum += diff * diff;
                g[k] += 2.0 * lambda * inv_tgt * diff;
            }
        }

        let mut src_out = vec![0.0; d];
        let mut src_g = vec![0.0; d];
        for p in s.pairs {
            let sv = &s.src[p.src * d..(p.src + 1) * d];
            src_m.forward_into(sv, &mut src_out, &mut act);
            let tout = &tgt_out[p.tgt * d..(p.tgt + 1) * d];
            let tg = &mut tgt_g[p.tgt * d..(p.tgt + 1) * d];
            for k in 0..d {
                let diff = src_out[k] - tout[k];
                l_sum += diff * diff;
                src_g[k] = 2.0 * inv_pairs * diff;
                tg[k] -= 2.0 * inv_pairs * diff;
            }
            src_m.backward_into(sv, &act, &src_g, &mut grad_src);
        }

        for ((t, a), g) in s.tgt.chunks_exact(d).zip(&tgt_act).zip(tgt_g.chunks_exact(d)) {
            tgt_m.backward_into(t, a, g, &mut grad_tgt);
        }
    }

    let l = l_sum * inv_pairs;
    let r = r_sum * inv_tgt;
    if !(l + lambda * r).is_finite() || grad_src.iter().chain(&grad_tgt).any(|g| !g.is_finite()) {
        return Err(Error::Numeric("alignment loss is not finite".into()));
    }
    Ok(SplitLoss {
        l,
        r,
        grad_src,
        grad_tgt,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::align::MapperKind;
    use crate::numeric::grad_check;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pair(src: usize, tgt: usize) -> WordPair {
        WordPair { src, tgt }
    }

    #[test]
    fn zero_loss_for_identical_vectors() {
        let m = Mapper::new(MapperKind::Linear, 2, 0, 0).unwrap();
        let v = [0.1, 0.2, 0.3, 0.4];
        let pairs = [pair(0, 0), pair(1, 1)];
        let s = LossSample {
            src: &v,
            tgt: &v,
            anchor: &v,
            pairs: &pairs,
        };
        let out = alignment_loss(&m, &[s], 1.0).unwrap();
        assert_eq!((out.l, out.r, out.total), (0.0, 0.0, 0.0));
    }

    #[test]
    fn unit_distance_pair() {
        let m = Mapper::new(MapperKind::ResidualMlp, 2, 2, 3).unwrap();
        let pairs = [pair(0, 0)];
        let s = LossSample {
            src: &[1.0, 0.0],
            tgt: &[0.0, 0.0],
            anchor: &[0.0, 0.0],
            pairs: &pairs,
        };
        let out = alignment_loss(&m, &[s], 1.0).unwrap();
        assert_eq!((out.l, out.r, out.total), (1.0, 0.0, 1.0));
    }

    #[test]
    fn rejects_pairless_batch_and_bad_indices() {
        let m = Mapper::new(MapperKind::Linear, 1, 0, 0).unwrap();
        let empty = LossSample {
            src: &[1.0],
            tgt: &[1.0],
            anchor: &[1.0],
            pairs: &[],
        };
        assert!(alignment_loss(&m, &[empty], 1.0).is_err());
        assert!(alignment_loss(&m, &[], 1.0).is_err());
        let bad = [pair(0, 3)];
        let s = LossSample { pairs: &bad, ..empty };
        assert!(matches!(alignment_loss(&m, &[s], 1.0), Err(Error::IndexOutOfRange { .. })));
        let ok = [pair(0, 0)];
        assert!(alignment_loss(&m, &[LossSample { pairs: &ok, ..empty }], -1.0).is_err());
    }

    #[test]
    fn r_counts_every_target_position() {
        // Shift by b = (1): every target token drifts by 1, pairs or not.
        let m = Mapper::from_params(MapperKind::Linear, 1, 0, vec![1.0, 1.0]).unwrap();
        let pairs = [pair(0, 0)];
        let s = LossSample {
            src: &[0.0],
            tgt: &[0.0, 5.0, 7.0],
            anchor: &[0.0, 5.0, 7.0],
            pairs: &pairs,
        };
        let out = alignment_loss(&m, &[s], 0.5).unwrap();
        assert_eq!(out.r, 1.0);
        assert_eq!(out.l, 0.0);
        assert_eq!(out.total, 0.5);
    }

    struct OwnedSample {
        src: Vec<f64>,
        tgt: Vec<f64>,
        anchor: Vec<f64>,
        pairs: Vec<WordPair>,
    }

    fn random_batch(rng: &mut ChaCha8Rng, d: usize) -> Vec<OwnedSample> {
        (0..rng.random_range(1..=3))
            .map(|_| {
                let ns = rng.random_range(1..=4);
                let nt = rng.random_range(1..=4);
                let mut vec = |n: usize| (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>();
                let (src, tgt, anchor) = (vec(ns), vec(nt), vec(nt));
                let pairs = (0..ns.min(nt)).map(|i| pair(i, nt - 1 - i)).collect();
                OwnedSample { src, tgt, anchor, pairs }
            })
            .collect()
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let d = 3;
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for kind in [MapperKind::Linear, MapperKind::ResidualMlp] {
            for trial in 0..20 {
                let owned = random_batch(&mut rng, d);
                let batch: Vec<LossSample> = owned
                    .iter()
                    .map(|o| LossSample {
                        src: &o.src,
                        tgt: &o.tgt,
                        anchor: &o.anchor,
                        pairs: &o.pairs,
                    })
                    .collect();
                let lambda = rng.random_range(0.0..2.0);
                let base = Mapper::new(kind, d, 4, trial).unwrap();
                let params: Vec<f64> = base.params().iter().map(|p| p + rng.random_range(-0.5..0.5)).collect();
                let check = grad_check(
                    |p| {
                        let m = Mapper::from_params(kind, d, 4, p.to_vec()).unwrap();
                        let v = alignment_loss(&m, &batch, lambda).unwrap();
                        assert!((v.total - (v.l + lambda * v.r)).abs() <= 1e-12 * v.total.abs().max(1.0));
                        (v.total, v.grad)
                    },
                    &params,
                    1e-5,
                );
                assert!(check.max_relative_error < 1e-5, "{kind} trial {trial}: {}", check.max_relative_error);
            }
        }
    }

    #[test]
    fn split_gradients_match_finite_differences() {
        let d = 3;
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for trial in 0..10 {
            let owned = random_batch(&mut rng, d);
            let batch: Vec<LossSample> = owned
                .iter()
                .map(|o| LossSample {
                    src: &o.src,
                    tgt: &o.tgt,
                    anchor: &o.anchor,
                    pairs: &o.pairs,
                })
                .collect();
            let perturb = |m: Mapper, rng: &mut ChaCha8Rng| {
                let p = m.params().iter().map(|p| p + rng.random_range(-0.5..0.5)).collect();
                Mapper::from_params(MapperKind::ResidualMlp, d, 2, p).unwrap()
            };
            let sm = perturb(Mapper::new(MapperKind::ResidualMlp, d, 2, trial).unwrap(), &mut rng);
            let tm = perturb(Mapper::new(MapperKind::ResidualMlp, d, 2, trial + 100).unwrap(), &mut rng);
            let total = |t: &SplitLoss| t.l + 0.9 * t.r;
            let check_src = grad_check(
                |p| {
                    let m = Mapper::from_params(MapperKind::ResidualMlp, d, 2, p.to_vec()).unwrap();
                    let t = loss_terms(&m, &tm, &batch, 0.9).unwrap();
                    (total(&t), t.grad_src)
                },
                sm.params(),
                1e-5,
            );
            let check_tgt = grad_check(
                |p| {
                    let m = Mapper::from_params(MapperKind::ResidualMlp, d, 2, p.to_vec()).unwrap();
                    let t = loss_terms(&sm, &m, &batch, 0.9).unwrap();
                    (total(&t), t.grad_tgt)
                },
                tm.params(),
                1e-5,
            );
            assert!(check_src.max_relative_error < 1e-5 && check_tgt.max_relative_error < 1e-5);
        }
    }
}
