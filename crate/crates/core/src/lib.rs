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

//! Measuring and improving cross-lingual alignment of contextual word
//! embeddings.
//!
//! The crate covers the whole loop: parallel corpora and word pairs
//! ([`corpus`], [`wordpairs`]), embedding stores ([`embed`]), closed-form
//! rotation and fine-tuned mappers ([`align`]), contextual word retrieval
//! with cosine or CSLS ([`retrieval`]), diagnostic analyses
//! ([`analysis`]), a seeded synthetic benchmark ([`synth`]) and the
//! end-to-end pipeline driven by a JSON config ([`pipeline`]).

pub mod align;
pub mod analysis;
pub mod cli;
pub mod corpus;
pub mod embed;
pub mod error;
pub mod numeric;
pub mod pipeline;
pub mod retrieval;
pub mod synth;
pub mod wordpairs;

pub use error::{Error, ErrorClass, Result};
