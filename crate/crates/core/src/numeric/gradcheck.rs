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

/// Result of comparing an analytic gradient with central differences.
#[derive(Debug, Clone)]
pub struct GradCheck {
    pub analytic: Vec<f64>,
    pub numeric: Vec<f64>,
    /// `max_i |a_i − n_i| / max(1e-8, |a_i| + |n_i|)`.
    pub max_relative_error: f64,
}

/// Checks the gradient returned by `f` at `params` against
/// `(f(p + h·e_i) − f(p − h·e_i)) / 2h` for every coordinate.
///
/// `f` returns the loss value and its analytic gradient.
pub fn grad_check<F>(f: F, params: &[f64], h: f64) -> GradCheck
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    let (_, analytic) = f(params);
    let mut probe = params.to_vec();
    let numeric: Vec<f64> = (0..params.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + h;
            let plus = f(&probe).0;
            probe[i] = orig - h;
            let minus = f(&probe).0;
            probe[i] = orig;
            (plus - minus) / (2.0 * h)
        })
        .collect();
    let max_relative_error = analytic
        .iter()
        .zip(&numeric)
        .map(|(a, n)| (a - n).abs() / (a.abs() + n.abs()).max(1e-8))
        .fold(0.0, f64::max);
    GradCheck {
        analytic,
        numeric,
        max_relative_error,
    }
}
