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

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::align::{AlignConfig, MapperKind};
use crate::analysis::{AnalysisDirection, DEFAULT_BIN_EDGES};
use crate::error::{Error, Result};
use crate::retrieval::RetrievalConfig;
use crate::synth::SynthConfig;

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "CTXALIGN_OUT";
pub const DEFAULT_OUT: &str = "ctxalign-out";

/// Full description of one pipeline run. Every field except `data` has a
/// default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataSource,
    #[serde(default)]
    pub pairs: PairSource,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default)]
    pub align: AlignStage,
    #[serde(default)]
    pub eval: EvalStage,
    #[serde(default)]
    pub analysis: AnalysisStage,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
}

/// Exactly one of a synthetic benchmark or files on disk. The synthetic
/// generator's own seed is replaced by one derived from the run seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum DataSource {
    Synth(SynthConfig),
    Files(FileData),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileData {
    pub src_text: PathBuf,
    pub tgt_text: PathBuf,
    pub src_language: String,
    pub tgt_language: String,
    pub src_embeddings: PathBuf,
    pub tgt_embeddings: PathBuf,
    /// Pharaoh pairs shipped with the corpus, used by `pairs: gold`.
    #[serde(default)]
    pub pairs: Option<PathBuf>,
    /// One line of UPOS tags per source sentence.
    #[serde(default)]
    pub pos_tags: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PairSource {
    /// Pairs that come with the data (synthetic gold or `data.files.pairs`).
    Gold,
    Ibm1 {
        #[serde(default = "default_iterations")]
        iterations: usize,
    },
    External { path: PathBuf },
}

fn default_iterations() -> usize {
    10
}

impl Default for PairSource {
    fn default() -> Self {
        PairSource::Ibm1 {
            iterations: default_iterations(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub test: usize,
    pub dev: usize,
    pub train: usize,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            test: 1024,
            dev: 1024,
            train: 250_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlignMethod {
    /// No alignment; only the base embeddings are evaluated.
    None,
    Rotation,
    SentenceRotation,
    Finetune,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AlignStage {
    pub method: AlignMethod,
    pub mapper: MapperKind,
    /// Defaults to the embedding dimension.
    pub hidden_dim: Option<usize>,
    #[serde(flatten)]
    pub config: AlignConfig,
}

impl Default for AlignStage {
    fn default() -> Self {
        AlignStage {
            method: AlignMethod::Rotation,
            mapper: MapperKind::ResidualMlp,
            hidden_dim: None,
            config: AlignConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalStage {
    #[serde(flatten)]
    pub retrieval: RetrievalConfig,
    /// Drop test pairs seen in training and pairs of identical words.
    pub filter: bool,
}

impl Default for EvalStage {
    fn default() -> Self {
        EvalStage {
            retrieval: RetrievalConfig::default(),
            filter: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisStage {
    /// Overrides `data.files.pos_tags`.
    pub pos_tags: Option<PathBuf>,
    /// Finite edges; a final unbounded bin is always appended.
    pub bin_edges: Vec<f64>,
    pub direction: AnalysisDirection,
    /// Word pairs included in the 2-D projection dump; 0 disables it.
    pub projection_pairs: usize,
}

impl Default for AnalysisStage {
    fn default() -> Self {
        AnalysisStage {
            pos_tags: None,
            bin_edges: DEFAULT_BIN_EDGES[..DEFAULT_BIN_EDGES.len() - 1].to_vec(),
            direction: AnalysisDirection::Both,
            projection_pairs: 200,
        }
    }
}

impl AnalysisStage {
    pub fn edges(&self) -> Vec<f64> {
        let mut e = self.bin_edges.clone();
        e.push(f64::INFINITY);
        e
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Invalid(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        RunConfig::from_json(&text)
    }

    /// Canonical JSON, used for hashing and the manifest.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if let DataSource::Synth(s) = &self.data {
            s.validate()?;
        }
        if matches!((&self.data, &self.pairs), (DataSource::Files(f), PairSource::Gold) if f.pairs.is_none()) {
            return Err(Error::Invalid("pairs.source = gold needs data.files.pairs".into()));
        }
        if let PairSource::Ibm1 { iterations: 0 } = self.pairs {
            return Err(Error::Invalid("IBM Model 1 needs at least one iteration".into()));
        }
        self.align.config.validate()?;
        if self.align.hidden_dim == Some(0) {
            return Err(Error::Invalid("hidden_dim must be positive".into()));
        }
        if self.eval.retrieval.k == 0 {
            return Err(Error::Invalid("eval.k must be at least 1".into()));
        }
        let edges = self.analysis.edges();
        if edges.iter().any(|e| e.is_nan()) || edges.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Invalid(format!("analysis.bin_edges must be strictly increasing: {edges:?}")));
        }
        Ok(())
    }

    /// Explicit value, then the environment, then [`DEFAULT_OUT`].
    pub fn output_dir(&self) -> PathBuf {
        self.output
            .clone()
            .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
    }
}
