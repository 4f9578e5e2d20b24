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

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::codec::{self, Envelope, MAPPER_MAGIC};
use crate::embed::ContextualEmbeddingSet;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MapperKind {
    /// `M·v + b`
    Linear,
    /// `v + W₂·tanh(W₁·v + b₁) + b₂`
    ResidualMlp,
}

impl MapperKind {
    fn code(self) -> u8 {
        match self {
            MapperKind::Linear => 0,
            MapperKind::ResidualMlp => 1,
        }
    }

    fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(MapperKind::Linear),
            1 => Ok(MapperKind::ResidualMlp),
            other => Err(Error::Parse {
                line: 0,
                message: format!("unknown mapper kind {other}"),
            }),
        }
    }

    /// Length of the flat parameter vector.
    pub fn num_params(self, dim: usize, hidden_dim: usize) -> usize {
        match self {
            MapperKind::Linear => dim * dim + dim,
            MapperKind::ResidualMlp => 2 * hidden_dim * dim + hidden_dim + dim,
        }
    }
}

impl fmt::Display for MapperKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MapperKind::Linear => "linear",
            MapperKind::ResidualMlp => "residual-mlp",
        })
    }
}

impl FromStr for MapperKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(MapperKind::Linear),
            "residual-mlp" => Ok(MapperKind::ResidualMlp),
            other => Err(Error::Invalid(format!("unknown mapper kind {other:?}"))),
        }
    }
}

/// Trainable map applied on top of frozen base embeddings.
///
/// Parameters live in one flat vector so the optimizer can treat them
/// uniformly. Layouts (row-major matrices):
///
/// * linear: `M (d×d) | b (d)`
/// * residual-mlp: `W₁ (h×d) | b₁ (h) | W₂ (d×h) | b₂ (d)`
#[derive(Debug, Clone, PartialEq)]
pub struct Mapper {
    kind: MapperKind,
    dim: usize,
    hidden_dim: usize,
    params: Vec<f64>,
}

/// Activations kept from a forward pass for the backward pass.
#[derive(Debug, Clone, Default)]
pub(crate) struct Activations {
    hidden: Vec<f64>,
}

impl Mapper {
    /// Identity-at-initialization mapper. For the residual MLP, `W₁` is drawn
    /// from `N(0, 1/d)` with the given seed and everything else is zero.
    pub fn new(kind: MapperKind, dim: usize, hidden_dim: usize, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Invalid("mapper dimension must be positive".into()));
        }
        match kind {
            MapperKind::Linear => {
                let mut params = vec![0.0; kind.num_params(dim, 0)];
                for i in 0..dim {
                    params[i * dim + i] = 1.0;
                }
                Ok(Mapper {
                    kind,
                    dim,
                    hidden_dim: 0,
                    params,
                })
            }
            MapperKind::ResidualMlp => {
                if hidden_dim == 0 {
                    return Err(Error::Invalid("residual-mlp hidden_dim must be positive".into()));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let scale = 1.0 / (dim as f64).sqrt();
                let mut params = vec![0.0; kind.num_params(dim, hidden_dim)];
                for p in &mut params[..hidden_dim * dim] {
                    *p = scale * rng.sample::<f64, _>(StandardNormal);
                }
                Ok(Mapper {
                    kind,
                    dim,
                    hidden_dim,
                    params,
                })
            }
        }
    }

    pub fn from_params(kind: MapperKind, dim: usize, hidden_dim: usize, params: Vec<f64>) -> Result<Self> {
        let hidden_dim = if kind == MapperKind::Linear { 0 } else { hidden_dim };
        if dim == 0 || (kind == MapperKind::ResidualMlp && hidden_dim == 0) {
            return Err(Error::Invalid("mapper dimensions must be positive".into()));
        }
        let expected = kind.num_params(dim, hidden_dim);
        if params.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: params.len(),
            });
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Numeric("mapper parameters are not finite".into()));
        }
        Ok(Mapper {
            kind,
            dim,
            hidden_dim,
            params,
        })
    }

    pub fn kind(&self) -> MapperKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub(crate) fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn forward(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(v.len())?;
        let mut out = vec![0.0; self.dim];
        let mut act = Activations::default();
        self.forward_into(v, &mut out, &mut act);
        Ok(out)
    }

    pub(crate) fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: len,
            });
        }
        Ok(())
    }

    pub(crate) fn forward_into(&self, v: &[f64], out: &mut [f64], act: &mut Activations) {
        let (d, h) = (self.dim, self.hidden_dim);
        match self.kind {
            MapperKind::Linear => {
                let (m, b) = self.params.split_at(d * d);
                for (i, o) in out.iter_mut().enumerate() {
                    *o = b[i] + dot(&m[i * d..(i + 1) * d], v);
                }
            }
            MapperKind::ResidualMlp => {
                let (w1, rest) = self.params.split_at(h * d);
                let (b1, rest) = rest.split_at(h);
                let (w2, b2) = rest.split_at(d * h);
                act.hidden.clear();
                act.hidden
                    .extend((0..h).map(|j| (b1[j] + dot(&w1[j * d..(j + 1) * d], v)).tanh()));
                for (i, o) in out.iter_mut().enumerate() {
                    *o = v[i] + b2[i] + dot(&w2[i * h..(i + 1) * h], &act.hidden);
                }
            }
        }
    }

    /// Accumulates `∂(gᵀ·m(v))/∂θ` into `grads`.
    pub(crate) fn backward_into(&self, v: &[f64], act: &Activations, g: &[f64], grads: &mut [f64]) {
        let (d, h) = (self.dim, self.hidden_dim);
        match self.kind {
            MapperKind::Linear => {
                let (gm, gb) = grads.split_at_mut(d * d);
                for i in 0..d {
                    gb[i] += g[i];
                    axpy(g[i], v, &mut gm[i * d..(i + 1) * d]);
                }
            }
            MapperKind::ResidualMlp => {
                let w2 = &self.params[h * d + h..h * d + h + d * h];
                let (gw1, rest) = grads.split_at_mut(h * d);
                let (gb1, rest) = rest.split_at_mut(h);
                let (gw2, gb2) = rest.split_at_mut(d * h);
                let mut ga = vec![0.0; h];
                for i in 0..d {
                    gb2[i] += g[i];
                    axpy(g[i], &act.hidden, &mut gw2[i * h..(i + 1) * h]);
                    axpy(g[i], &w2[i * h..(i + 1) * h], &mut ga);
                }
                for j in 0..h {
                    let a = act.hidden[j];
                    let gz = ga[j] * (1.0 - a * a);
                    gb1[j] += gz;
                    axpy(gz, v, &mut gw1[j * d..(j + 1) * d]);
                }
            }
        }
    }

    /// Maps every vector of an embedding set.
    pub fn apply_set(&self, set: &ContextualEmbeddingSet) -> Result<ContextualEmbeddingSet> {
        self.check_dim(set.dim())?;
        let mut act = Activations::default();
        set.map_vectors(self.dim, |v| {
            let mut out = vec![0.0; self.dim];
            self.forward_into(v, &mut out, &mut act);
            Ok(out)
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        codec::encode(
            MAPPER_MAGIC,
            &Envelope {
                kind: self.kind.code(),
                dim: self.dim as u32,
                hidden_dim: self.hidden_dim as u32,
                params: self.params.clone(),
            },
        )
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let env = codec::decode(MAPPER_MAGIC, bytes)?;
        Mapper::from_params(
            MapperKind::from_code(env.kind)?,
            env.dim as usize,
            env.hidden_dim as usize,
            env.params,
        )
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        codec::write_file(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Mapper::from_bytes(&codec::read_file(path)?)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn linear_forward() {
        let mut m = Mapper::new(MapperKind::Linear, 2, 0, 0).unwrap();
        assert_eq!(m.forward(&[0.3, -7.0]).unwrap(), vec![0.3, -7.0]);
        m.params_mut()[0] = 2.0;
        m.params_mut()[3] = 2.0;
        assert_eq!(m.forward(&[1.0, 1.0]).unwrap(), vec![2.0, 2.0]);
        assert!(m.forward(&[1.0]).is_err());
    }

    #[test]
    fn residual_bias_shift() {
        let mut m = Mapper::new(MapperKind::ResidualMlp, 2, 3, 9).unwrap();
        let n = m.params().len();
        m.params_mut()[n - 2] = 1.0;
        assert_eq!(m.forward(&[0.5, 0.25]).unwrap(), vec![1.5, 0.25]);
    }

    #[test]
    fn residual_hidden_path() {
        // d = 1, h = 1: y = v + w2·tanh(w1·v + b1) + b2.
        let m = Mapper::from_params(MapperKind::ResidualMlp, 1, 1, vec![2.0, 0.5, 3.0, -1.0]).unwrap();
        let v = 0.2f64;
        let expected = v + 3.0 * (2.0 * v + 0.5).tanh() - 1.0;
        assert!((m.forward(&[v]).unwrap()[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn codec_round_trip_and_kind_check() {
        let m = Mapper::new(MapperKind::ResidualMlp, 3, 4, 1).unwrap();
        assert_eq!(Mapper::from_bytes(&m.to_bytes()).unwrap(), m);
        let mut bytes = m.to_bytes();
        bytes[8] = 7;
        assert!(Mapper::from_bytes(&bytes).is_err());
        assert!(Mapper::from_params(MapperKind::Linear, 2, 0, vec![0.0; 5]).is_err());
    }

    proptest! {
        #[test]
        fn fresh_mapper_is_identity(
            v in proptest::collection::vec(-1e3f64..1e3, 5),
            seed in any::<u64>(),
            residual in any::<bool>(),
        ) {
            let kind = if residual { MapperKind::ResidualMlp } else { MapperKind::Linear };
            let m = Mapper::new(kind, 5, 5, seed).unwrap();
            prop_assert_eq!(m.forward(&v).unwrap(), v);
        }
    }
}
