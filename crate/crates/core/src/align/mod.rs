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

//! Cross-lingual alignment: closed-form orthogonal rotations fit on paired
//! vectors, and a trainable mapper fine-tuned on `L + λR` where `L` pulls
//! word pairs together and `R` anchors target vectors to their initial
//! values.

mod codec;
mod finetune;
mod loss;
mod mapper;
mod rotation;

pub use codec::{CODEC_VERSION, MAPPER_MAGIC, ROTATION_MAGIC};
pub use finetune::{
    finetune_align, AlignConfig, LanguageMappers, MapperSharing, TrainCorpus, TrainStep, TrainTrace,
};
pub use loss::{alignment_loss, LossSample, LossValue};
pub use mapper::{Mapper, MapperKind};
pub use rotation::{
    procrustes_fit, procrustes_objective, rotation_apply, rotation_fit, sentence_rotation_fit, word_pair_rows,
    RotationMap, ORTHOGONALITY_TOLERANCE,
};
