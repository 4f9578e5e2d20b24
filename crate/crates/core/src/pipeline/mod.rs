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

//! End-to-end runs driven by a [`RunConfig`]: data → word pairs → split →
//! alignment → retrieval evaluation → analyses → manifest.
//!
//! Output layout under the run directory:
//!
//! ```text
//! synth/…              generated benchmark (synthetic data only)
//! pairs.txt            word pairs used for the whole corpus
//! align/…              rotation or mapper files, training trace
//! eval/base.json       retrieval on unaligned test embeddings
//! eval/aligned.json    retrieval after alignment (if any)
//! eval/*_pairs.csv     per-pair outcomes
//! analysis/…           frequency curves, POS tables, projections, summary
//! manifest.json        config hash, seeds, version, file checksums
//! ```

mod config;
mod manifest;

use std::fmt;
use std::path::{Path, PathBuf};

use serde::Serialize;

pub use config::{
    AlignMethod, AlignStage, AnalysisStage, DataSource, EvalStage, FileData, PairSource, RunConfig, SplitConfig,
    DEFAULT_OUT, OUT_ENV,
};
pub use manifest::{derive_seed, sha256_hex, FileRecord, Manifest, SeedRecord, MANIFEST_FILE};

use crate::align::{
    finetune_align, rotation_apply, rotation_fit, sentence_rotation_fit, Mapper, TrainCorpus,
};
use crate::analysis::{
    freq_rank_curve, pos_breakdown, project_word_pairs, projection_csv, FreqRankCurve, FrequencyRanks, PosBreakdown,
    PosTable,
};
use crate::corpus::{
    filter_eval_pairs, load_pairs, load_parallel_text, split_corpus, ParallelCorpus,
};
use crate::embed::{load_embeddings, ContextualEmbeddingSet};
use crate::error::{Error, ErrorClass};
use crate::retrieval::{evaluate, RetrievalReport};
use crate::synth::generate;
use crate::wordpairs::extract_word_pairs;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Config,
    Data,
    Pairs,
    Split,
    Align,
    Eval,
    Analysis,
    Manifest,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Config => "config",
            Stage::Data => "data",
            Stage::Pairs => "pairs",
            Stage::Split => "split",
            Stage::Align => "align",
            Stage::Eval => "eval",
            Stage::Analysis => "analysis",
            Stage::Manifest => "manifest",
        })
    }
}

/// An error tagged with the pipeline stage that raised it.
#[derive(Debug, thiserror::Error)]
#[error("{stage} stage: {source}")]
pub struct StageError {
    pub stage: Stage,
    #[source]
    pub source: Error,
}

impl StageError {
    pub fn class(&self) -> ErrorClass {
        self.source.class()
    }
}

fn at(stage: Stage) -> impl Fn(Error) -> StageError {
    move |source| StageError { stage, source }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub out_dir: PathBuf,
    pub base: RetrievalReport,
    pub aligned: Option<RetrievalReport>,
    pub manifest: Manifest,
}

/// Collects output files relative to the run directory.
struct Outputs<'a> {
    dir: &'a Path,
    files: Vec<String>,
}

impl Outputs<'_> {
    fn path(&self, rel: &str) -> Result<PathBuf, Error> {
        let p = self.dir.join(rel);
        if let Some(parent) = p.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        Ok(p)
    }

    fn write(&mut self, rel: &str, text: &str) -> Result<(), Error> {
        let p = self.path(rel)?;
        std::fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
        self.files.push(rel.to_owned());
        Ok(())
    }

    fn with<F>(&mut self, rel: &str, f: F) -> Result<(), Error>
    where
        F: FnOnce(&Path) -> Result<(), Error>,
    {
        let p = self.path(rel)?;
        f(&p)?;
        self.files.push(rel.to_owned());
        Ok(())
    }
}

#[derive(Debug, Serialize)]
struct ReportSummary {
    mean_accuracy: f64,
    src_to_tgt: f64,
    tgt_to_src: f64,
    evaluated: usize,
}

impl From<&RetrievalReport> for ReportSummary {
    fn from(r: &RetrievalReport) -> Self {
        ReportSummary {
            mean_accuracy: r.mean_accuracy,
            src_to_tgt: r.src_to_tgt.accuracy,
            tgt_to_src: r.tgt_to_src.accuracy,
            evaluated: r.src_to_tgt.evaluated,
        }
    }
}

#[derive(Debug, Serialize)]
struct PhaseAnalysis {
    retrieval: ReportSummary,
    freq_rank: FreqRankCurve,
    #[serde(skip_serializing_if = "Option::is_none")]
    pos: Option<PosBreakdown>,
    #[serde(skip_serializing_if = "Option::is_none")]
    projection_explained_variance: Option<f64>,
}

#[derive(Debug, Serialize)]
struct AnalysisSummary {
    base: PhaseAnalysis,
    #[serde(skip_serializing_if = "Option::is_none")]
    aligned: Option<PhaseAnalysis>,
}

/// Executes every stage of `cfg` and writes the artifacts.
pub fn run(cfg: &RunConfig) -> Result<RunOutcome, StageError> {
    cfg.validate().map_err(at(Stage::Config))?;
    let dir = cfg.output_dir();
    std::fs::create_dir_all(&dir).map_err(|e| at(Stage::Config)(Error::io(&dir, e)))?;
    let mut out = Outputs { dir: &dir, files: Vec::new() };
    let seeds = SeedRecord {
        run: cfg.seed,
        synth: derive_seed(cfg.seed, "synth"),
        pairs: derive_seed(cfg.seed, "pairs"),
        align: derive_seed(cfg.seed, "align"),
        mapper: derive_seed(cfg.seed, "mapper"),
    };

    // Data.
    let (corpus, src_set, tgt_set, data_tags) = load_data(cfg, &seeds, &mut out).map_err(at(Stage::Data))?;

    // Word pairs over the whole corpus.
    let corpus = (|| -> Result<ParallelCorpus, Error> {
        let corpus = match &cfg.pairs {
            PairSource::Gold => match &cfg.data {
                DataSource::Files(FileData { pairs: Some(path), .. }) => {
                    let sets = load_pairs(&corpus, path)?;
                    corpus.with_pairs(sets)?
                }
                _ => corpus,
            },
            PairSource::Ibm1 { iterations } => extract_word_pairs(&corpus, *iterations)?.corpus,
            PairSource::External { path } => {
                let sets = load_pairs(&corpus, path)?;
                corpus.with_pairs(sets)?
            }
        };
        out.with("pairs.txt", |p| crate::corpus::write_pairs(&corpus, p))?;
        Ok(corpus)
    })()
    .map_err(at(Stage::Pairs))?;

    // Split.
    let (splits, train_src, train_tgt, test_src, test_tgt) = (|| {
        let s = split_corpus(&corpus, cfg.split.test, cfg.split.dev, cfg.split.train)?;
        let train_src = src_set.slice(s.train_range.clone())?;
        let train_tgt = tgt_set.slice(s.train_range.clone())?;
        let test_src = src_set.slice(s.test_range.clone())?;
        let test_tgt = tgt_set.slice(s.test_range.clone())?;
        Ok((s, train_src, train_tgt, test_src, test_tgt))
    })()
    .map_err(at(Stage::Split))?;

    // Alignment, fitted on train and applied to test.
    let aligned = align_stage(cfg, &seeds, &splits.train, &train_src, &train_tgt, &test_src, &test_tgt, &mut out)
        .map_err(at(Stage::Align))?;

    // Evaluation.
    let (eval_corpus, base, aligned_report) = (|| {
        let eval_corpus = if cfg.eval.filter {
            filter_eval_pairs(&splits.test, &splits.train)?
        } else {
            splits.test.clone()
        };
        let base = evaluate(&test_src, &test_tgt, &eval_corpus, &cfg.eval.retrieval)?;
        out.write("eval/base.json", &(base.to_json() + "\n"))?;
        out.write("eval/base_pairs.csv", &base.pairs_csv())?;
        let aligned_report = match &aligned {
            Some((s, t)) => {
                let r = evaluate(s, t, &eval_corpus, &cfg.eval.retrieval)?;
                out.write("eval/aligned.json", &(r.to_json() + "\n"))?;
                out.write("eval/aligned_pairs.csv", &r.pairs_csv())?;
                Some(r)
            }
            None => None,
        };
        Ok((eval_corpus, base, aligned_report))
    })()
    .map_err(at(Stage::Eval))?;

    // Analyses.
    (|| -> Result<(), Error> {
        let ranks = FrequencyRanks::from_corpus(&splits.train);
        let edges = cfg.analysis.edges();
        let tags = match cfg.analysis.pos_tags.as_ref().or(data_tags.as_ref()) {
            Some(p) => Some(PosTable::load(p, &corpus)?.slice(splits.test_range.clone())),
            None => None,
        };
        let phase = |name: &str,
                         report: &RetrievalReport,
                         sets: (&ContextualEmbeddingSet, &ContextualEmbeddingSet),
                         out: &mut Outputs|
         -> Result<PhaseAnalysis, Error> {
            let freq = freq_rank_curve(report, &eval_corpus, &ranks, &edges, cfg.analysis.direction)?;
            out.write(&format!("analysis/freq_{name}.csv"), &freq.to_csv())?;
            let pos = match &tags {
                Some(t) => {
                    let b = pos_breakdown(report, t, cfg.analysis.direction);
                    out.write(&format!("analysis/pos_{name}.csv"), &b.to_csv())?;
                    Some(b)
                }
                None => None,
            };
            let projection_explained_variance = if cfg.analysis.projection_pairs > 0 {
                let (points, var) =
                    project_word_pairs(sets.0, sets.1, &eval_corpus, cfg.analysis.projection_pairs, name)?;
                out.write(&format!("analysis/projection_{name}.csv"), &projection_csv(&points))?;
                Some(var)
            } else {
                None
            };
            Ok(PhaseAnalysis {
                retrieval: report.into(),
                freq_rank: freq,
                pos,
                projection_explained_variance,
            })
        };
        let base_phase = phase("base", &base, (&test_src, &test_tgt), &mut out)?;
        let aligned_phase = match (&aligned_report, &aligned) {
            (Some(r), Some((s, t))) => Some(phase("aligned", r, (s, t), &mut out)?),
            _ => None,
        };
        let summary = AnalysisSummary {
            base: base_phase,
            aligned: aligned_phase,
        };
        out.write(
            "analysis/summary.json",
            &(serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n"),
        )
    })()
    .map_err(at(Stage::Analysis))?;

    // Manifest.
    let manifest = (|| {
        let files = Manifest::record_files(&dir, &out.files)?;
        // Where the run was written is not part of the experiment.
        let config_json = RunConfig {
            output: None,
            ..cfg.clone()
        }
        .to_json();
        let manifest = Manifest {
            tool: env!("CARGO_PKG_NAME").to_owned(),
            version: env!("CARGO_PKG_VERSION").to_owned(),
            config_sha256: sha256_hex(config_json.as_bytes()),
            config: serde_json::from_str(&config_json).expect("config is JSON"),
            seeds,
            files,
        };
        manifest.write(&dir)?;
        Ok(manifest)
    })()
    .map_err(at(Stage::Manifest))?;

    Ok(RunOutcome {
        out_dir: dir.clone(),
        base,
        aligned: aligned_report,
        manifest,
    })
}

type Loaded = (ParallelCorpus, ContextualEmbeddingSet, ContextualEmbeddingSet, Option<PathBuf>);

fn load_data(cfg: &RunConfig, seeds: &SeedRecord, out: &mut Outputs) -> Result<Loaded, Error> {
    match &cfg.data {
        DataSource::Synth(s) => {
            let mut s = s.clone();
            s.seed = seeds.synth;
            let bundle = generate(&s)?;
            let dir = out.dir.join("synth");
            bundle.write(&dir)?;
            use crate::synth::files::*;
            for f in [SRC_TEXT, TGT_TEXT, GOLD_PAIRS, SRC_EMB, TGT_EMB, GOLD_MAP, GOLD_MAP_JSON] {
                out.files.push(format!("synth/{f}"));
            }
            Ok((bundle.corpus, bundle.src_set, bundle.tgt_set, None))
        }
        DataSource::Files(f) => {
            let corpus = load_parallel_text(&f.src_text, &f.tgt_text, &f.src_language, &f.tgt_language)?;
            let src = load_embeddings(&f.src_embeddings)?;
            let tgt = load_embeddings(&f.tgt_embeddings)?;
            ContextualEmbeddingSet::check_covers_corpus(&src, &tgt, &corpus)?;
            Ok((corpus, src, tgt, f.pos_tags.clone()))
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn align_stage(
    cfg: &RunConfig,
    seeds: &SeedRecord,
    train: &ParallelCorpus,
    train_src: &ContextualEmbeddingSet,
    train_tgt: &ContextualEmbeddingSet,
    test_src: &ContextualEmbeddingSet,
    test_tgt: &ContextualEmbeddingSet,
    out: &mut Outputs,
) -> Result<Option<(ContextualEmbeddingSet, ContextualEmbeddingSet)>, Error> {
    let method = cfg.align.method;
    if method != AlignMethod::None && train.is_empty() {
        return Err(Error::Empty("the training split is empty".into()));
    }
    match method {
        AlignMethod::None => Ok(None),
        AlignMethod::Rotation | AlignMethod::SentenceRotation => {
            let (w, name) = if method == AlignMethod::Rotation {
                (rotation_fit(train_src, train_tgt, train)?, "align/rotation.crot")
            } else {
                (sentence_rotation_fit(train_src, train_tgt, train)?, "align/sentence_rotation.crot")
            };
            out.with(name, |p| w.save(p))?;
            Ok(Some((rotation_apply(&w, test_src)?, test_tgt.clone())))
        }
        AlignMethod::Finetune => {
            let dim = train_src.dim();
            let init = Mapper::new(cfg.align.mapper, dim, cfg.align.hidden_dim.unwrap_or(dim), seeds.mapper)?;
            let mut acfg = cfg.align.config;
            acfg.seed = seeds.align;
            let data = [TrainCorpus {
                corpus: train,
                src: train_src,
                tgt: train_tgt,
            }];
            let (mappers, trace) = finetune_align(&init, &data, &acfg)?;
            for (name, m) in mappers.files("mapper") {
                out.with(&format!("align/{name}"), |p| m.save(p))?;
            }
            out.write("align/train_trace.csv", &trace.to_csv())?;
            Ok(Some((
                mappers.apply(train.src_language(), test_src)?,
                mappers.apply(train.tgt_language(), test_tgt)?,
            )))
        }
    }
}
