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

//! Blocked cosine / CSLS scoring over candidate pools.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::pool::CandidatePool;
use crate::error::{Error, Result};
use crate::numeric::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Similarity {
    Cosine,
    Csls,
}

impl std::fmt::Display for Similarity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Similarity::Cosine => "cosine",
            Similarity::Csls => "csls",
        })
    }
}

impl std::str::FromStr for Similarity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cosine" => Ok(Similarity::Cosine),
            "csls" => Ok(Similarity::Csls),
            other => Err(Error::Invalid(format!("unknown similarity {other:?}"))),
        }
    }
}

/// Default CSLS neighbourhood size.
pub const DEFAULT_K: usize = 10;
/// Default number of query rows scored per work unit.
pub const DEFAULT_BLOCK: usize = 256;

/// Best candidate for one query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Match {
    pub index: usize,
    pub score: f64,
}

/// CSLS hubness penalties: mean cosine of each query to its `k` nearest
/// candidates (`r_t`) and of each candidate to its `k` nearest queries
/// (`r_s`).
#[derive(Debug, Clone, PartialEq)]
pub struct Penalties {
    pub r_t: Vec<f64>,
    pub r_s: Vec<f64>,
}

/// Cosines of queries `rows` against every candidate, written row-major
/// into `out` (`rows.len() × candidates.len()`).
fn cos_block(queries: &CandidatePool, rows: std::ops::Range<usize>, candidates: &CandidatePool, out: &mut [f64]) {
    let (m, n, d) = (rows.len(), candidates.len(), queries.dim());
    debug_assert_eq!(out.len(), m * n);
    let a = &queries.units()[rows.start * d..rows.end * d];
    // SAFETY: `a` is m×d row-major, the candidate block n×d row-major read
    // as its d×n transpose, and `out` m×n row-major; all slices have
    // exactly the lengths the strides address.
    unsafe {
        matrixmultiply::dgemm(
            m,
            d,
            n,
            1.0,
            a.as_ptr(),
            d as isize,
            1,
            candidates.units().as_ptr(),
            1,
            d as isize,
            0.0,
            out.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Per-column top-`k` values, each list kept in descending order.
#[derive(Debug, Clone)]
struct ColumnTopK {
    k: usize,
    vals: Vec<f64>,
    lens: Vec<usize>,
}

impl ColumnTopK {
    fn new(cols: usize, k: usize) -> Self {
        ColumnTopK {
            k,
            vals: vec![f64::NEG_INFINITY; cols * k],
            lens: vec![0; cols],
        }
    }

    #[inline]
    fn push(&mut self, col: usize, v: f64) {
        let k = self.k;
        let list = &mut self.vals[col * k..(col + 1) * k];
        let len = &mut self.lens[col];
        if *len == k {
            if v <= list[k - 1] {
                return;
            }
        } else {
            *len += 1;
        }
        let mut i = *len - 1;
        while i > 0 && list[i - 1] < v {
            list[i] = list[i - 1];
            i -= 1;
        }
        list[i] = v;
    }

    fn merge(mut self, other: ColumnTopK) -> ColumnTopK {
        for col in 0..other.lens.len() {
            for i in 0..other.lens[col] {
                self.push(col, other.vals[col * other.k + i]);
            }
        }
        self
    }

    fn means(&self) -> Vec<f64> {
        (0..self.lens.len())
            .map(|c| {
                let n = self.lens[c];
                self.vals[c * self.k..c * self.k + n].iter().sum::<f64>() / n as f64
            })
            .collect()
    }
}

fn mean_top_k(buf: &mut [f64], k: usize) -> f64 {
    let k = k.min(buf.len());
    if k < buf.len() {
        buf.select_nth_unstable_by(k - 1, |a, b| b.total_cmp(a));
    }
    let top = &mut buf[..k];
    top.sort_unstable_by(|a, b| b.total_cmp(a));
    top.iter().sum::<f64>() / k as f64
}

fn check_pools(queries: &CandidatePool, candidates: &CandidatePool, k: usize) -> Result<()> {
    if queries.is_empty() || candidates.is_empty() {
        return Err(Error::Empty("retrieval pools must be non-empty".into()));
    }
    if queries.dim() != candidates.dim() {
        return Err(Error::DimensionMismatch {
            expected: queries.dim(),
            found: candidates.dim(),
        });
    }
    if k == 0 {
        return Err(Error::Invalid("CSLS neighbourhood size must be at least 1".into()));
    }
    Ok(())
}

/// Computes both penalty vectors in one blocked pass over the cosine
/// matrix. Neighbourhoods shrink to the pool size when it is below `k`.
pub fn csls_penalties(queries: &CandidatePool, candidates: &CandidatePool, k: usize, block: usize) -> Result<Penalties> {
    check_pools(queries, candidates, k)?;
    let block = block.max(1);
    let nq = queries.len();
    let nc = candidates.len();
    let kc = k.min(nq);
    let blocks: Vec<usize> = (0..nq).step_by(block).collect();
    let (mut rows, cols) = blocks
        .par_iter()
        .fold(
            || (Vec::new(), ColumnTopK::new(nc, kc), Vec::new()),
            |(mut rows, mut cols, mut buf), &start| {
                let range = start..(start + block).min(nq);
                buf.resize(range.len() * nc, 0.0);
                cos_block(queries, range.clone(), candidates, &mut buf);
                for (q, row) in range.zip(buf.chunks_exact_mut(nc)) {
                    for (c, &v) in row.iter().enumerate() {
                        cols.push(c, v);
                    }
                    rows.push((q, mean_top_k(row, k)));
                }
                (rows, cols, buf)
            },
        )
        .map(|(rows, cols, _)| (rows, cols))
        .reduce(
            || (Vec::new(), ColumnTopK::new(nc, kc)),
            |(mut ra, ca), (rb, cb)| {
                ra.extend(rb);
                (ra, ca.merge(cb))
            },
        );
    rows.sort_unstable_by_key(|&(q, _)| q);
    Ok(Penalties {
        r_t: rows.into_iter().map(|(_, r)| r).collect(),
        r_s: cols.means(),
    })
}

/// Dense score matrix (`queries × candidates`). Intended for small pools.
pub fn score_matrix(queries: &CandidatePool, candidates: &CandidatePool, sim: Similarity, k: usize) -> Result<Matrix> {
    check_pools(queries, candidates, k)?;
    let pen = match sim {
        Similarity::Csls => Some(csls_penalties(queries, candidates, k, DEFAULT_BLOCK)?),
        Similarity::Cosine => None,
    };
    let nc = candidates.len();
    let mut cos = vec![0.0; queries.len() * nc];
    cos_block(queries, 0..queries.len(), candidates, &mut cos);
    for (i, v) in cos.iter_mut().enumerate() {
        *v = score(*v, i / nc, i % nc, pen.as_ref());
    }
    Matrix::from_vec(queries.len(), nc, cos)
}

/// `2·cos(x, y) − r_t(x) − r_s(y)` for every query/candidate pair.
pub fn csls_scores(queries: &CandidatePool, candidates: &CandidatePool, k: usize) -> Result<Matrix> {
    score_matrix(queries, candidates, Similarity::Csls, k)
}

#[inline]
fn score(cos: f64, q: usize, c: usize, pen: Option<&Penalties>) -> f64 {
    match pen {
        Some(p) => 2.0 * cos - p.r_t[q] - p.r_s[c],
        None => cos,
    }
}

/// Arg-max candidate per query. Ties go to the earliest candidate in pool
/// order, which is `(sentence, token)` order for pools built from sets.
pub fn retrieve(
    queries: &CandidatePool,
    candidates: &CandidatePool,
    sim: Similarity,
    k: usize,
    block: usize,
) -> Result<Vec<Match>> {
    check_pools(queries, candidates, k)?;
    let pen = match sim {
        Similarity::Csls => Some(csls_penalties(queries, candidates, k, block)?),
        Similarity::Cosine => None,
    };
    let pen = pen.as_ref();
    let block = block.max(1);
    let nc = candidates.len();
    let blocks: Vec<usize> = (0..queries.len()).step_by(block).collect();
    Ok(blocks
        .par_iter()
        .map_init(Vec::new, |buf, &start| {
            let range = start..(start + block).min(queries.len());
            buf.resize(range.len() * nc, 0.0);
            cos_block(queries, range.clone(), candidates, buf);
            range
                .zip(buf.chunks_exact(nc))
                .map(|(q, row)| {
                    let mut best = Match {
                        index: 0,
                        score: f64::NEG_INFINITY,
                    };
                    for (c, &cos) in row.iter().enumerate() {
                        let s = score(cos, q, c, pen);
                        if s > best.score {
                            best = Match { index: c, score: s };
                        }
                    }
                    best
                })
                .collect::<Vec<_>>()
        })
        .flatten_iter()
        .collect())
}

/// All candidate scores for a single query, in pool order.
pub(crate) fn scores_for(
    queries: &CandidatePool,
    q: usize,
    candidates: &CandidatePool,
    sim: Similarity,
    k: usize,
) -> Result<Vec<f64>> {
    check_pools(queries, candidates, k)?;
    let pen = match sim {
        Similarity::Csls => Some(csls_penalties(queries, candidates, k, DEFAULT_BLOCK)?),
        Similarity::Cosine => None,
    };
    let mut cos = vec![0.0; candidates.len()];
    cos_block(queries, q..q + 1, candidates, &mut cos);
    Ok(cos
        .iter()
        .enumerate()
        .map(|(c, &v)| score(v, q, c, pen.as_ref()))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::ContextualEmbeddingSet;
    use crate::retrieval::build_pool;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pool(rows: &[&[f64]]) -> CandidatePool {
        let v: Vec<Vec<f64>> = rows.iter().map(|r| r.to_vec()).collect();
        build_pool(&ContextualEmbeddingSet::from_sentences(rows[0].len(), &[v]).unwrap()).unwrap()
    }

    fn brute_force(q: &[Vec<f64>], c: &[Vec<f64>], k: usize) -> Vec<Vec<f64>> {
        let cos = |a: &[f64], b: &[f64]| {
            let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
            let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
            if na == 0.0 || nb == 0.0 {
                0.0
            } else {
                a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / (na * nb)
            }
        };
        let knn_mean = |x: &[f64], pool: &[Vec<f64>]| {
            let mut s: Vec<f64> = pool.iter().map(|y| cos(x, y)).collect();
            s.sort_by(|a, b| b.partial_cmp(a).unwrap());
            let n = k.min(s.len());
            s[..n].iter().sum::<f64>() / n as f64
        };
        q.iter()
            .map(|x| {
                c.iter()
                    .map(|y| 2.0 * cos(x, y) - knn_mean(x, c) - knn_mean(y, q))
                    .collect()
            })
            .collect()
    }

    #[test]
    fn hand_computed_cases() {
        let m = csls_scores(&pool(&[&[1.0, 0.0]]), &pool(&[&[1.0, 0.0]]), 1).unwrap();
        assert_eq!(m[(0, 0)], 0.0);
        let m = csls_scores(&pool(&[&[1.0, 0.0]]), &pool(&[&[0.0, 1.0]]), 1).unwrap();
        assert_eq!(m[(0, 0)], 0.0);
    }

    #[test]
    fn zero_vectors_have_zero_cosine() {
        let m = score_matrix(&pool(&[&[0.0, 0.0]]), &pool(&[&[1.0, 2.0]]), Similarity::Cosine, 1).unwrap();
        assert_eq!(m[(0, 0)], 0.0);
    }

    #[test]
    fn matches_brute_force_on_random_pools() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..20 {
            let d = rng.random_range(2..6);
            let nq = rng.random_range(1..=50);
            let nc = rng.random_range(1..=50);
            let k = rng.random_range(1..=12);
            let mut draw = |n: usize| -> Vec<Vec<f64>> {
                (0..n).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()
            };
            let (q, c) = (draw(nq), draw(nc));
            let qp = build_pool(&ContextualEmbeddingSet::from_sentences(d, std::slice::from_ref(&q)).unwrap()).unwrap();
            let cp = build_pool(&ContextualEmbeddingSet::from_sentences(d, std::slice::from_ref(&c)).unwrap()).unwrap();
            let fast = csls_scores(&qp, &cp, k).unwrap();
            let slow = brute_force(&q, &c, k);
            for i in 0..nq {
                for j in 0..nc {
                    assert!((fast[(i, j)] - slow[i][j]).abs() < 1e-12, "trial {trial}");
                }
            }
            let blocked = csls_penalties(&qp, &cp, k, 3).unwrap();
            assert_eq!(blocked, csls_penalties(&qp, &cp, k, 1000).unwrap());
        }
    }

    #[test]
    fn ties_break_to_first_candidate() {
        let q = pool(&[&[1.0, 0.0]]);
        let c = pool(&[&[0.0, 1.0], &[2.0, 0.0], &[1.0, 0.0]]);
        for sim in [Similarity::Cosine, Similarity::Csls] {
            assert_eq!(retrieve(&q, &c, sim, 10, 4).unwrap()[0].index, 1);
        }
    }

    #[test]
    fn top_k_column_list_stays_sorted() {
        let mut t = ColumnTopK::new(1, 3);
        for v in [0.1, 0.5, -1.0, 0.3, 0.9, 0.3] {
            t.push(0, v);
        }
        assert_eq!(&t.vals[..3], &[0.9, 0.5, 0.3]);
        assert!((t.means()[0] - 1.7 / 3.0).abs() < 1e-15);
    }
}
