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

//! Thin SVD by one-sided (Hestenes) Jacobi rotations.
//!
//! Columns of the working copy are rotated pairwise until every pair is
//! orthogonal to working precision. The column norms are then the singular
//! values, the normalized columns are `U`, and the accumulated rotations
//! are `V`. Columns whose norm underflows the rank threshold get a `U`
//! column from Gram-Schmidt completion so `U` always has orthonormal
//! columns.

use super::Matrix;
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 100;

/// `m = u · diag(s) · vᵀ` with `u: rows×k`, `v: cols×k`, `k = min(rows, cols)`.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: Matrix,
    pub s: Vec<f64>,
    pub v: Matrix,
}

impl Svd {
    pub fn reconstruct(&self) -> Matrix {
        let mut us = self.u.clone();
        for r in 0..us.rows() {
            for (c, s) in self.s.iter().enumerate() {
                us[(r, c)] *= s;
            }
        }
        us.matmul(&self.v.transpose()).expect("conformant factors")
    }
}

pub fn svd(m: &Matrix) -> Result<Svd> {
    if !m.is_finite() {
        return Err(Error::Numeric("svd input has non-finite entries".into()));
    }
    if m.rows() >= m.cols() {
        Ok(svd_tall(m))
    } else {
        let t = svd_tall(&m.transpose());
        Ok(Svd {
            u: t.v,
            s: t.s,
            v: t.u,
        })
    }
}

fn svd_tall(m: &Matrix) -> Svd {
    let rows = m.rows();
    let n = m.cols();
    // Column-major working copies.
    let mut a: Vec<Vec<f64>> = (0..n).map(|c| m.column(c)).collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|c| {
            let mut e = vec![0.0; n];
            e[c] = 1.0;
            e
        })
        .collect();

    let tol = f64::EPSILON * (rows.max(1) as f64).sqrt();
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (alpha, beta, gamma) = {
                    let (ap, aq) = (&a[p], &a[q]);
                    let mut alpha = 0.0;
                    let mut beta = 0.0;
                    let mut gamma = 0.0;
                    for (x, y) in ap.iter().zip(aq) {
                        alpha += x * x;
                        beta += y * y;
                        gamma += x * y;
                    }
                    (alpha, beta, gamma)
                };
                if gamma == 0.0 || alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                if gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut a, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let sigma: Vec<f64> = a.iter().map(|col| super::norm(col)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| sigma[j].total_cmp(&sigma[i]).then(i.cmp(&j)));

    let smax = order.first().map_or(0.0, |&i| sigma[i]);
    let threshold = smax * (rows.max(n) as f64) * f64::EPSILON;

    let mut u_cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut deficient = Vec::new();
    for (slot, &j) in order.iter().enumerate() {
        if sigma[j] > threshold && sigma[j] > 0.0 {
            u_cols.push(a[j].iter().map(|x| x / sigma[j]).collect());
        } else {
            u_cols.push(Vec::new());
            deficient.push(slot);
        }
    }
    for slot in deficient {
        u_cols[slot] = complete_basis(&u_cols, rows);
    }

    let mut u = Matrix::zeros(rows, n);
    let mut vm = Matrix::zeros(n, n);
    let mut s = Vec::with_capacity(n);
    for (slot, &j) in order.iter().enumerate() {
        for r in 0..rows {
            u[(r, slot)] = u_cols[slot][r];
        }
        for r in 0..n {
            vm[(r, slot)] = v[j][r];
        }
        s.push(sigma[j]);
    }
    Svd { u, s, v: vm }
}

#[inline]
fn rotate(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (lo, hi) = cols.split_at_mut(q);
    let (xp, xq) = (&mut lo[p], &mut hi[0]);
    for (x, y) in xp.iter_mut().zip(xq.iter_mut()) {
        let (a, b) = (*x, *y);
        *x = c * a - s * b;
        *y = s * a + c * b;
    }
}

/// Unit vector orthogonal to every non-empty column in `existing`.
fn complete_basis(existing: &[Vec<f64>], rows: usize) -> Vec<f64> {
    let mut best: Option<(f64, Vec<f64>)> = None;
    for e in 0..rows {
        let mut cand = vec![0.0; rows];
        cand[e] = 1.0;
        // Two passes of modified Gram-Schmidt.
        for _ in 0..2 {
            for col in existing.iter().filter(|c| !c.is_empty()) {
                let proj = super::dot(col, &cand);
                for (x, y) in cand.iter_mut().zip(col) {
                    *x -= proj * y;
                }
            }
        }
        let n = super::norm(&cand);
        if best.as_ref().map_or(true, |(bn, _)| n > *bn + 1e-12) {
            best = Some((n, cand));
        }
    }
    let (n, mut cand) = best.expect("rows > 0");
    for x in &mut cand {
        *x /= n;
    }
    cand
}
