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

use std::fmt::Write as _;

use serde::Serialize;

use crate::corpus::ParallelCorpus;
use crate::embed::ContextualEmbeddingSet;
use crate::error::{Error, Result};
use crate::numeric::{svd, Matrix};

#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    /// `n × out_dim` coordinates.
    pub coords: Matrix,
    /// `out_dim × d` principal axes.
    pub components: Matrix,
    /// Fraction of total variance captured (0 for constant data).
    pub explained_variance: f64,
}

/// Projects mean-centred rows onto the top right singular vectors. Each
/// axis is signed so that its largest-magnitude entry is positive.
pub fn pca_project(vectors: &Matrix, out_dim: usize) -> Result<Projection> {
    let (n, d) = (vectors.rows(), vectors.cols());
    if n < 2 {
        return Err(Error::Invalid(format!("projection needs at least 2 points, got {n}")));
    }
    if out_dim == 0 || out_dim > d {
        return Err(Error::Invalid(format!("cannot project {d}-dimensional data to {out_dim} dimensions")));
    }
    let mut centred = vectors.clone();
    for c in 0..d {
        let mean = (0..n).map(|r| vectors[(r, c)]).sum::<f64>() / n as f64;
        for r in 0..n {
            centred[(r, c)] -= mean;
        }
    }
    let dec = svd(&centred)?;
    let mut components = Matrix::zeros(out_dim, d);
    for k in 0..out_dim {
        let axis = dec.v.column(k);
        let pivot = axis.iter().copied().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        for (j, x) in axis.iter().enumerate() {
            components[(k, j)] = sign * x;
        }
    }
    let coords = centred.matmul(&components.transpose())?;
    let total: f64 = dec.s.iter().map(|s| s * s).sum();
    let kept: f64 = dec.s.iter().take(out_dim).map(|s| s * s).sum();
    Ok(Projection {
        coords,
        components,
        explained_variance: if total > 0.0 { kept / total } else { 0.0 },
    })
}

/// One plotted point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectionPoint {
    pub x: f64,
    pub y: f64,
    pub word: String,
    pub language: String,
    pub phase: String,
}

pub fn projection_csv(points: &[ProjectionPoint]) -> String {
    let mut out = String::from("x,y,word,language,phase\n");
    for p in points {
        writeln!(out, "{:e},{:e},{},{},{}", p.x, p.y, p.word, p.language, p.phase).expect("string write");
    }
    out
}

/// 2-D points for the first `max_pairs` word pairs of `corpus`, both
/// sides projected jointly so translations can be compared.
pub fn project_word_pairs(
    src: &ContextualEmbeddingSet,
    tgt: &ContextualEmbeddingSet,
    corpus: &ParallelCorpus,
    max_pairs: usize,
    phase: &str,
) -> Result<(Vec<ProjectionPoint>, f64)> {
    ContextualEmbeddingSet::check_covers_corpus(src, tgt, corpus)?;
    let d = src.dim();
    let mut data = Vec::new();
    let mut labels = Vec::new();
    'outer: for (s, e) in corpus.entries().iter().enumerate() {
        for p in e.pairs.iter() {
            if labels.len() / 2 >= max_pairs {
                break 'outer;
            }
            let (sw, tw) = e.words(p);
            data.extend_from_slice(src.vector(s, p.src));
            labels.push((sw.to_owned(), corpus.src_language().to_owned()));
            data.extend_from_slice(tgt.vector(s, p.tgt));
            labels.push((tw.to_owned(), corpus.tgt_language().to_owned()));
        }
    }
    let proj = pca_project(&Matrix::from_vec(labels.len(), d, data)?, 2)?;
    let points = labels
        .into_iter()
        .enumerate()
        .map(|(i, (word, language))| ProjectionPoint {
            x: proj.coords[(i, 0)],
            y: proj.coords[(i, 1)],
            word,
            language,
            phase: phase.to_owned(),
        })
        .collect();
    Ok((points, proj.explained_variance))
}

/// Pearson correlation coefficient.
pub fn correlation(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch {
            expected: xs.len(),
            found: ys.len(),
        });
    }
    if xs.len() < 2 {
        return Err(Error::Invalid("correlation needs at least 2 points".into()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Numeric("correlation is undefined for zero variance".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dist(m: &Matrix, i: usize, j: usize) -> f64 {
        m.row(i).iter().zip(m.row(j)).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
    }

    #[test]
    fn planted_plane_preserves_distances() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let q = crate::synth::random_orthogonal(&mut rng, 5);
        let n = 40;
        let mut data = Matrix::zeros(n, 5);
        for r in 0..n {
            let (a, b): (f64, f64) = (rng.random_range(-3.0..3.0), rng.random_range(-1.0..1.0));
            for c in 0..5 {
                data[(r, c)] = a * q[(c, 0)] + b * q[(c, 1)] + 0.7;
            }
        }
        let p = pca_project(&data, 2).unwrap();
        assert!((p.explained_variance - 1.0).abs() < 1e-9);
        for i in 0..n {
            for j in 0..n {
                assert!((dist(&p.coords, i, j) - dist(&data, i, j)).abs() < 1e-9);
            }
        }
        for c in 0..2 {
            let mean: f64 = (0..n).map(|r| p.coords[(r, c)]).sum::<f64>() / n as f64;
            assert!(mean.abs() < 1e-9);
        }
    }

    #[test]
    fn duplicated_point_projects_to_origin() {
        let data = Matrix::from_rows(&[[1.0, 2.0, 3.0], [1.0, 2.0, 3.0]]).unwrap();
        let p = pca_project(&data, 2).unwrap();
        assert!(p.coords.as_slice().iter().all(|x| *x == 0.0));
        assert_eq!(p.explained_variance, 0.0);
        assert!(pca_project(&Matrix::zeros(1, 3), 2).is_err());
    }

    #[test]
    fn invariant_to_rotation_up_to_sign() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let data = Matrix::from_vec(30, 4, (0..120).map(|i| rng.random_range(-1.0..1.0) * (1 + i % 4) as f64).collect()).unwrap();
        let q = crate::synth::random_orthogonal(&mut rng, 4);
        let a = pca_project(&data, 2).unwrap();
        let b = pca_project(&data.matmul(&q).unwrap(), 2).unwrap();
        for c in 0..2 {
            let same = (0..30).all(|r| (a.coords[(r, c)] - b.coords[(r, c)]).abs() < 1e-9);
            let flipped = (0..30).all(|r| (a.coords[(r, c)] + b.coords[(r, c)]).abs() < 1e-9);
            assert!(same || flipped);
        }
    }

    #[test]
    fn pearson() {
        let xs = [1.0, 2.0, 3.0];
        assert!((correlation(&xs, &[3.0, 5.0, 7.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((correlation(&xs, &[-1.0, -2.0, -3.0]).unwrap() + 1.0).abs() < 1e-15);
        assert!((correlation(&xs, &[1.0, 3.0, 2.0]).unwrap() - 0.5).abs() < 1e-15);
        assert!(correlation(&xs, &[1.0, 1.0, 1.0]).is_err());
        assert!(correlation(&xs, &[1.0]).is_err());
    }
}
