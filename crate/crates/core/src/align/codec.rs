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

//! Binary envelope shared by mappers (`CMAP`) and rotations (`CROT`):
//!
//! ```text
//! magic [4] | version u32 | kind u8 | dim u32 | hidden_dim u32 | count u64 | count × f64
//! ```
//!
//! All integers and floats are little-endian.

use std::fs;
use std::path::Path;

use crate::embed::ByteReader;
use crate::error::{Error, Result};

pub const MAPPER_MAGIC: [u8; 4] = *b"CMAP";
pub const ROTATION_MAGIC: [u8; 4] = *b"CROT";
pub const CODEC_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Envelope {
    pub kind: u8,
    pub dim: u32,
    pub hidden_dim: u32,
    pub params: Vec<f64>,
}

pub(crate) fn encode(magic: [u8; 4], env: &Envelope) -> Vec<u8> {
    let mut out = Vec::with_capacity(25 + 8 * env.params.len());
    out.extend_from_slice(&magic);
    out.extend_from_slice(&CODEC_VERSION.to_le_bytes());
    out.push(env.kind);
    out.extend_from_slice(&env.dim.to_le_bytes());
    out.extend_from_slice(&env.hidden_dim.to_le_bytes());
    out.extend_from_slice(&(env.params.len() as u64).to_le_bytes());
    for p in &env.params {
        out.extend_from_slice(&p.to_le_bytes());
    }
    out
}

pub(crate) fn decode(magic: [u8; 4], bytes: &[u8]) -> Result<Envelope> {
    let mut r = ByteReader { bytes, pos: 0 };
    let found: [u8; 4] = r.take(4, "magic")?.try_into().expect("4 bytes");
    if found != magic {
        return Err(Error::BadMagic {
            expected: magic,
            found,
        });
    }
    let version = r.u32("version")?;
    if version != CODEC_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let kind = r.u8("kind")?;
    let dim = r.u32("dim")?;
    let hidden_dim = r.u32("hidden_dim")?;
    let count = r.u64("parameter count")?;
    let count = usize::try_from(count).map_err(|_| Error::Truncated(format!("parameter count {count}")))?;
    if count.checked_mul(8).map_or(true, |n| n > bytes.len()) {
        return Err(Error::Truncated(format!("{count} parameters declared, file has {} bytes", bytes.len())));
    }
    let params = (0..count)
        .map(|i| r.f64(&format!("parameter {i}")))
        .collect::<Result<Vec<_>>>()?;
    if !r.finished() {
        return Err(Error::Parse {
            line: 0,
            message: "trailing bytes after parameters".into(),
        });
    }
    if params.iter().any(|p| !p.is_finite()) {
        return Err(Error::Numeric("stored parameters are not finite".into()));
    }
    Ok(Envelope {
        kind,
        dim,
        hidden_dim,
        params,
    })
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
