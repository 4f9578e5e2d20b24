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

//! Command-line front end. Every subcommand wraps one library operation;
//! `run` drives the whole pipeline from a JSON config.
//!
//! Exit codes: 0 success, 1 usage, 2 data error, 3 numeric failure.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde_json::Value;

use crate::align::{
    finetune_align, rotation_apply, rotation_fit, sentence_rotation_fit, AlignConfig, Mapper, MapperKind,
    MapperSharing, RotationMap, TrainCorpus, MAPPER_MAGIC, ROTATION_MAGIC,
};
use crate::analysis::{
    freq_rank_curve, pos_breakdown, project_word_pairs, projection_csv, AnalysisDirection, FrequencyRanks, PosTable,
};
use crate::corpus::{filter_eval_pairs, load_parallel_corpus, load_parallel_text, write_pairs, ParallelCorpus};
use crate::embed::{load_embeddings, ContextualEmbeddingSet};
use crate::error::{Error, ErrorClass};
use crate::pipeline::{self, AlignMethod, Manifest, RunConfig, DEFAULT_OUT, OUT_ENV};
use crate::retrieval::{evaluate, query_neighbors, RetrievalConfig, RetrievalMode, RetrievalReport, Similarity, TokenRef};
use crate::synth::{self, Distortion, SynthConfig};
use crate::wordpairs::extract_word_pairs;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "ctxalign", version, about = "Align contextual embeddings across languages and evaluate word retrieval")]
pub struct Cli {
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the full pipeline from a JSON config.
    Run(RunArgs),
    /// Generate a synthetic benchmark with a known gold map.
    Synth(SynthArgs),
    /// Extract word pairs with bidirectional IBM Model 1 and intersection.
    ExtractPairs(ExtractArgs),
    /// Fit a rotation or fine-tune a mapper on word pairs.
    Align(AlignArgs),
    /// Evaluate bidirectional word retrieval.
    Eval(EvalArgs),
    /// Break retrieval accuracy down by part of speech.
    AnalyzePos(PosArgs),
    /// Accuracy against the frequency-rank difference of word pairs.
    AnalyzeFreq(FreqArgs),
    /// Project paired word vectors to two dimensions.
    Project(ProjectArgs),
    /// Nearest target occurrences of one source token.
    Query(QueryArgs),
    /// Verify a run directory's manifest and summarize its results.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct TextArgs {
    /// Source sentences, one per line, whitespace tokenized.
    #[arg(long)]
    src_text: PathBuf,
    #[arg(long)]
    tgt_text: PathBuf,
    #[arg(long, default_value = "src")]
    src_lang: String,
    #[arg(long, default_value = "tgt")]
    tgt_lang: String,
}

impl TextArgs {
    fn load(&self) -> Result<ParallelCorpus, Error> {
        load_parallel_text(&self.src_text, &self.tgt_text, &self.src_lang, &self.tgt_lang)
    }

    fn load_with(&self, pairs: &Path) -> Result<ParallelCorpus, Error> {
        load_parallel_corpus(&self.src_text, &self.tgt_text, pairs, &self.src_lang, &self.tgt_lang)
    }
}

#[derive(Debug, Args)]
struct EmbArgs {
    #[arg(long)]
    src_emb: PathBuf,
    #[arg(long)]
    tgt_emb: PathBuf,
}

#[derive(Debug, Args)]
struct MapArgs {
    /// Rotation (CROT) or mapper (CMAP) applied to source vectors.
    #[arg(long)]
    map: Option<PathBuf>,
    /// Mapper applied to target vectors (per-language mappers).
    #[arg(long)]
    tgt_map: Option<PathBuf>,
}

impl EmbArgs {
    fn load(&self, maps: &MapArgs) -> Result<(ContextualEmbeddingSet, ContextualEmbeddingSet), Error> {
        let mut src = load_embeddings(&self.src_emb)?;
        let mut tgt = load_embeddings(&self.tgt_emb)?;
        if let Some(p) = &maps.map {
            src = SideMap::load(p)?.apply(&src)?;
        }
        if let Some(p) = &maps.tgt_map {
            tgt = SideMap::load(p)?.apply(&tgt)?;
        }
        Ok((src, tgt))
    }
}

enum SideMap {
    Rotation(RotationMap),
    Mapper(Mapper),
}

impl SideMap {
    fn load(path: &Path) -> Result<Self, Error> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        match bytes.get(..4) {
            Some(m) if m == ROTATION_MAGIC => Ok(SideMap::Rotation(RotationMap::from_bytes(&bytes)?)),
            Some(m) if m == MAPPER_MAGIC => Ok(SideMap::Mapper(Mapper::from_bytes(&bytes)?)),
            _ => Err(Error::Invalid(format!("{}: neither a rotation nor a mapper file", path.display()))),
        }
    }

    fn apply(&self, set: &ContextualEmbeddingSet) -> Result<ContextualEmbeddingSet, Error> {
        match self {
            SideMap::Rotation(w) => rotation_apply(w, set),
            SideMap::Mapper(m) => m.apply_set(set),
        }
    }
}

#[derive(Debug, Args)]
struct RetrievalArgs {
    #[arg(long, default_value = "csls", value_parser = kebab::<Similarity>)]
    sim: Similarity,
    /// CSLS neighbourhood size.
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long, default_value = "contextual", value_parser = kebab::<RetrievalMode>)]
    mode: RetrievalMode,
    #[arg(long, default_value_t = 256)]
    block_size: usize,
}

impl RetrievalArgs {
    fn config(&self) -> RetrievalConfig {
        RetrievalConfig {
            sim: self.sim,
            k: self.k,
            mode: self.mode,
            block_size: self.block_size,
        }
    }
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config and the environment).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Override one config field, e.g. `align.lambda=2` or `eval.sim="cosine"`.
    #[arg(long = "set", value_name = "PATH=VALUE")]
    overrides: Vec<String>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, env = OUT_ENV, default_value = DEFAULT_OUT)]
    out: PathBuf,
    #[arg(long)]
    vocab_size: Option<usize>,
    #[arg(long)]
    corpus_size: Option<usize>,
    #[arg(long)]
    min_len: Option<usize>,
    #[arg(long)]
    max_len: Option<usize>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    context_mix: Option<f64>,
    #[arg(long, value_parser = kebab::<Distortion>)]
    distortion: Option<Distortion>,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    swap_prob: Option<f64>,
    #[arg(long)]
    src_lang: Option<String>,
    #[arg(long)]
    tgt_lang: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct ExtractArgs {
    #[command(flatten)]
    text: TextArgs,
    #[arg(long, default_value_t = 10)]
    iterations: usize,
    /// Pharaoh output (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also dump the forward translation table as TSV.
    #[arg(long)]
    table_tsv: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AlignArgs {
    #[command(flatten)]
    text: TextArgs,
    #[arg(long)]
    pairs: PathBuf,
    #[command(flatten)]
    emb: EmbArgs,
    #[arg(long, default_value = "rotation", value_parser = kebab::<AlignMethod>)]
    method: AlignMethod,
    #[arg(long, default_value = "residual-mlp", value_parser = kebab::<MapperKind>)]
    mapper: MapperKind,
    /// Hidden width of the residual MLP (default: the embedding dimension).
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long, default_value = "shared", value_parser = kebab::<MapperSharing>)]
    sharing: MapperSharing,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    epochs: Option<u32>,
    /// Sentence pairs per language per batch.
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    warmup: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, env = OUT_ENV, default_value = DEFAULT_OUT)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[command(flatten)]
    text: TextArgs,
    #[arg(long)]
    pairs: PathBuf,
    #[command(flatten)]
    emb: EmbArgs,
    #[command(flatten)]
    maps: MapArgs,
    #[command(flatten)]
    retrieval: RetrievalArgs,
    /// Training corpus for the seen-in-train filter (source side).
    #[arg(long, requires_all = ["train_tgt", "train_pairs"])]
    train_src: Option<PathBuf>,
    #[arg(long, requires = "train_src")]
    train_tgt: Option<PathBuf>,
    #[arg(long, requires = "train_src")]
    train_pairs: Option<PathBuf>,
    #[arg(long, env = OUT_ENV, default_value = DEFAULT_OUT)]
    out: PathBuf,
    /// Writes `<name>.json` and `<name>_pairs.csv`.
    #[arg(long, default_value = "report")]
    name: String,
}

#[derive(Debug, Args)]
struct ReportInput {
    /// Report JSON written by `eval` or `run`.
    #[arg(long)]
    report: PathBuf,
    /// Per-pair CSV (default: `<report stem>_pairs.csv` next to the report).
    #[arg(long)]
    pairs_csv: Option<PathBuf>,
}

impl ReportInput {
    fn load(&self) -> Result<RetrievalReport, Error> {
        let csv = self.pairs_csv.clone().unwrap_or_else(|| {
            let stem = self.report.file_stem().unwrap_or_default().to_string_lossy();
            self.report.with_file_name(format!("{stem}_pairs.csv"))
        });
        RetrievalReport::load(&self.report, &csv)
    }
}

#[derive(Debug, Args)]
struct PosArgs {
    #[command(flatten)]
    input: ReportInput,
    #[command(flatten)]
    text: TextArgs,
    /// UPOS tags, one line per source sentence.
    #[arg(long)]
    tags: PathBuf,
    #[arg(long, default_value = "both", value_parser = kebab::<AnalysisDirection>)]
    direction: AnalysisDirection,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct FreqArgs {
    #[command(flatten)]
    input: ReportInput,
    #[command(flatten)]
    text: TextArgs,
    /// Training text for frequency ranks (default: the evaluated text).
    #[arg(long, requires = "train_tgt")]
    train_src: Option<PathBuf>,
    #[arg(long, requires = "train_src")]
    train_tgt: Option<PathBuf>,
    /// Finite bin edges; a final open bin is appended.
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 10.0, 100.0, 1000.0, 10000.0])]
    bins: Vec<f64>,
    #[arg(long, default_value = "both", value_parser = kebab::<AnalysisDirection>)]
    direction: AnalysisDirection,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ProjectArgs {
    #[command(flatten)]
    text: TextArgs,
    #[arg(long)]
    pairs: PathBuf,
    #[command(flatten)]
    emb: EmbArgs,
    #[command(flatten)]
    maps: MapArgs,
    #[arg(long, default_value_t = 200)]
    max_pairs: usize,
    /// Label written in the `phase` column.
    #[arg(long, default_value = "base")]
    phase: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct QueryArgs {
    #[command(flatten)]
    text: TextArgs,
    #[command(flatten)]
    emb: EmbArgs,
    #[command(flatten)]
    maps: MapArgs,
    #[arg(long)]
    sentence: usize,
    #[arg(long)]
    token: usize,
    #[arg(long, default_value_t = 10)]
    top: usize,
    #[arg(long, default_value = "csls", value_parser = kebab::<Similarity>)]
    sim: Similarity,
    #[arg(long, default_value_t = 10)]
    k: usize,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Run directory containing manifest.json.
    #[arg(long)]
    dir: PathBuf,
}

/// Parses a kebab-case enum value through its serde representation.
fn kebab<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(Value::String(s.to_owned())).map_err(|e| e.to_string())
}

#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: exit_code(e.class()),
            message: e.to_string(),
        }
    }
}

impl From<pipeline::StageError> for Failure {
    fn from(e: pipeline::StageError) -> Self {
        Failure {
            code: exit_code(e.class()),
            message: e.to_string(),
        }
    }
}

fn exit_code(class: ErrorClass) -> i32 {
    match class {
        ErrorClass::Usage => EXIT_USAGE,
        ErrorClass::Data => EXIT_DATA,
        ErrorClass::Numeric => EXIT_NUMERIC,
    }
}

fn io_fail(what: &str, e: std::io::Error) -> Failure {
    Failure {
        code: EXIT_DATA,
        message: format!("{what}: {e}"),
    }
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code. Results go to `out`, diagnostics to
/// stderr.
pub fn run_cli<I, T>(args: I, out: &mut (dyn Write + Send)) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            // Help and version go to stdout; usage errors to stderr.
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.threads {
        Some(0) => Err(Failure {
            code: EXIT_USAGE,
            message: "--threads must be at least 1".into(),
        }),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| dispatch(cli.command, out)),
            Err(e) => Err(Failure {
                code: EXIT_USAGE,
                message: format!("cannot build thread pool: {e}"),
            }),
        },
        None => dispatch(cli.command, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

fn dispatch(cmd: Command, out: &mut (dyn Write + Send)) -> Result<(), Failure> {
    match cmd {
        Command::Run(a) => cmd_run(a, out),
        Command::Synth(a) => cmd_synth(a, out),
        Command::ExtractPairs(a) => cmd_extract(a, out),
        Command::Align(a) => cmd_align(a, out),
        Command::Eval(a) => cmd_eval(a, out),
        Command::AnalyzePos(a) => cmd_pos(a, out),
        Command::AnalyzeFreq(a) => cmd_freq(a, out),
        Command::Project(a) => cmd_project(a, out),
        Command::Query(a) => cmd_query(a, out),
        Command::Report(a) => cmd_report(a, out),
    }
}

macro_rules! say {
    ($out:expr, $($arg:tt)*) => {
        writeln!($out, $($arg)*).map_err(|e| io_fail("stdout", e))?
    };
}

/// Writes `text` to `path`, or to `out` when no path is given.
fn emit(path: Option<&Path>, text: &str, out: &mut (dyn Write + Send)) -> Result<(), Failure> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure::from(Error::io(p, e))),
        None => out.write_all(text.as_bytes()).map_err(|e| io_fail("stdout", e)),
    }
}

/// Sets `a.b.c = value` in a JSON document. The value is parsed as JSON
/// and falls back to a plain string.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<(), Error> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Invalid(format!("override {assignment:?} is not PATH=VALUE")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_owned()));
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(Error::Invalid(format!("bad override path {path:?}")));
    }
    let mut cur = doc;
    for key in &keys[..keys.len() - 1] {
        let obj = cur
            .as_object_mut()
            .ok_or_else(|| Error::Invalid(format!("override {path:?} descends into a non-object")))?;
        cur = obj.entry(*key).or_insert_with(|| Value::Object(Default::default()));
    }
    cur.as_object_mut()
        .ok_or_else(|| Error::Invalid(format!("override {path:?} descends into a non-object")))?
        .insert(keys[keys.len() - 1].to_owned(), value);
    Ok(())
}

fn cmd_run(a: RunArgs, out: &mut (dyn Write + Send)) -> Result<(), Failure> {
    let text = std::fs::read_to_string(&a.config).map_err(|e| Error::io(&a.config, e))?;
    let mut doc: Value = serde_json::from_str(&text).map_err(|e| Error::Parse {
        line: e.line(),
        message: e.to_string(),
    })?;
    for o in &a.overrides {
        apply_override(&mut doc, o)?;
    }
    let mut cfg = RunConfig::from_json(&doc.to_string())?;
    if let Some(dir) = a.out {
        cfg.output = Some(dir);
    }
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    let outcome = pipeline::run(&cfg)?;
    say!(out, "output: {}", outcome.out_dir.display());
    say!(out, "base mean accuracy: {:.4}", outcome.base.mean_accuracy);
    if let Some(r) = &outcome.aligned {
        say!(out, "aligned mean accuracy: {:.4}", r.mean_accuracy);
    }
    say!(out, "files: {}", outcome.manifest.files.len());
    Ok(())
}

fn cmd_synth(a: SynthArgs, out: &mut (dyn Write + Send)) -> Result<(), Failure> {
    let d = SynthConfig::default();
    let cfg = SynthConfig {
        vocab_size: a.vocab_size.unwrap_or(d.vocab_size),
        corpus_size: a.corpus_size.unwrap_or(d.corpus_size),
        min_len: a.min_len.unwrap_or(d.min_len),
        max_len: a.max_len.unwrap_or(d.max_len),
        dim: a.dim.unwrap_or(d.dim),
        context_mix: a.context_mix.unwrap_or(d.context_mix),
        distortion: a.distortion.unwrap_or(d.distortion),
        noise: a.noise.unwrap_or(d.noise),
        swap_prob: a.swap_prob.unwrap_or(d.swap_prob),
        src_language: a.src_lang.unwrap_or(d.src_language),
        tgt_language: a.tgt_lang.unwrap_or(d.tgt_language),
        seed: a.seed.unwrap_or(d.seed),
    };
    let bundle = synth::generate(&cfg)?;
    bundle.write(&a.out)?;
    say!(
        out,
        "wrote {} sentence pairs ({} word pairs, d={}) to {}",
        bundle.corpus.len(),
        bundle.corpus.num_pairs(),
        cfg.dim,
        a.out.display()
    );
    Ok(())
}

fn cmd_extract(a: ExtractArgs, out: &mut (dyn Write + Send)) -> Result<(), Failure> {
    if a.iterations == 0 {
        return Err(Error::Invalid("--iterations must be at least 1".into()).into());
    }
    let corpus = a.text.load()?;
    let ex = extract_word_pairs(&corpus, a.iterations)?;
    for (i, (f, r)) in ex.forward.log_likelihood.iter().zip(&ex.reverse.log_likelihood).enumerate() {
        eprintln!("iteration {}: log-likelihood {f:.6} (forward) {r:.6} (reverse)", i + 1);
    }
    if let Some(p) = &a.table_tsv {
        ex.forward.table.write_tsv(p)?;
    }
    match &a.out {
        Some(p) => {
            write_pairs(&ex.corpus, p)?;
            say!(out, "wrote {} word pairs to {}", ex.corpus.num_pairs(), p.display());
        }
        None => {
            let mut text = String::new();
            for e in ex.corpus.entries() {
                text.push_str(&e.pairs.to_pharaoh());
                text.push('\n');
            }
            emit(None, &text, out)?;
        }
    }
    Ok(())
}

fn cmd_align(a: AlignArgs, out: &mut (dyn Write + Send)) -> Result<(), Failure> {
    let corpus = a.text.load_with(&a.pairs)?;
    let (src, tgt) = a.emb.load(&MapArgs { map: None, tgt_map: None })?;
    ContextualEmbeddingSet::check_covers_corpus(&src, &tgt, &corpus)?;
    std::fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    match a.method {
        AlignMethod::None => return Err(Error::Invalid("--method none has nothing to fit".into()).into()),
        AlignMethod::Rotation | AlignMethod::SentenceRotation => {
            let (w, name) = if a.method == AlignMethod::Rotation {
                (rotation_fit(&src, &tgt, &corpus)?, "rotation.crot")
            } else {
                (sentence_rotation_fit(&src, &tgt, &corpus)?, "sentence_rotation.crot")
            };
            let path = a.out.join(name);
            w.save(&path)?;
            say!(out, "wrote {}", path.display());
        }
        AlignMethod::Finetune => {
            let d = AlignConfig::default();
            let cfg = AlignConfig {
                lambda: a.lambda.unwrap_or(d.lambda),
                base_lr: a.lr.unwrap_or(d.base_lr),
                epochs: a.epochs.unwrap_or(d.epochs),
                sentence_pairs_per_language_per_batch: a.batch.unwrap_or(d.sentence_pairs_per_language_per_batch),
                warmup_fraction: a.warmup.unwrap_or(d.warmup_fraction),
                sharing: a.sharing,
                seed: a.seed,
                ..d
            };
            let dim = src.dim();
            let init = Mapper::new(a.mapper, dim, a.hidden.unwrap_or(dim), a.seed)?;
            let data = [TrainCorpus {
                corpus: &corpus,
                src: &src,
                tgt: &tgt,
            }];
            let (mappers, trace) = finetune_align(&init, &data, &cfg)?;
            for p in mappers.save(&a.out, "mapper")? {
                say!(out, "wrote {}", p.display());
            }
            let trace_path = a.out.join("train_trace.csv");
            trace.write_csv(&trace_path)?;
            say!(out, "wrote {} ({} steps)", trace_path.display(), trace.steps.len());
            if let Some((first, last)) = trace.smoothed_ends(10) {
                say!(out, "loss {first:.6} -> {last:.6}");
            }
        }
    }
    Ok(())
}

fn cmd_eval(a: EvalArgs, out: &mut (dyn Write + Send)) -> Result<(), Failure> {
    let mut corpus = a.text.load_with(&a.pairs)?;
    if let (Some(s), Some(t), Some(p)) = (&a.train_src, &a.train_tgt, &a.train_pairs) {
        let train = load_parallel_corpus(s, t, p, &a.text.src_lang, &a.text.tgt_lang)?;
        corpus = filter_eval_pairs(&corpus, &train)?;
    }
    let (src, tgt) = a.emb.load(&a.maps)?;
    let report = evaluate(&src, &tgt, &corpus, &a.retrieval.config())?;
    std::fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    report.write_json(&a.out.join(format!("{}.json", a.name)))?;
    report.write_pairs_csv(&a.out.join(format!("{}_pairs.csv", a.name)))?;
    say!(out, "{}", report.to_json());
    Ok(())
}

fn cmd_pos(a: PosArgs, out: &mut (dyn Write + Send)) -> Result<(), Failure> {
    let report = a.input.load()?;
    let corpus = a.text.load()?;
    let tags = PosTable::load(&a.tags, &corpus)?;
    let b = pos_breakdown(&report, &tags, a.direction);
    emit(a.out.as_deref(), &b.to_csv(), out)
}

fn cmd_freq(a: FreqArgs, out: &mut (dyn Write + Send)) -> Result<(), Failure> {
    let report = a.input.load()?;
    let corpus = a.text.load()?;
    let ranks = match (&a.train_src, &a.train_tgt) {
        (Some(s), Some(t)) => {
            FrequencyRanks::from_corpus(&load_parallel_text(s, t, &a.text.src_lang, &a.text.tgt_lang)?)
        }
        _ => FrequencyRanks::from_corpus(&corpus),
    };
    let mut edges = a.bins.clone();
    edges.push(f64::INFINITY);
    let curve = freq_rank_curve(&report, &corpus, &ranks, &edges, a.direction)?;
    emit(a.out.as_deref(), &curve.to_csv(), out)
}

fn cmd_project(a: ProjectArgs, out: &mut (dyn Write + Send)) -> Result<(), Failure> {
    let corpus = a.text.load_with(&a.pairs)?;
    let (src, tgt) = a.emb.load(&a.maps)?;
    let (points, explained) = project_word_pairs(&src, &tgt, &corpus, a.max_pairs, &a.phase)?;
    emit(a.out.as_deref(), &projection_csv(&points), out)?;
    if a.out.is_some() {
        say!(out, "{} points, explained variance {explained:.4}", points.len());
    }
    Ok(())
}

fn cmd_query(a: QueryArgs, out: &mut (dyn Write + Send)) -> Result<(), Failure> {
    let corpus = a.text.load()?;
    let (src, tgt) = a.emb.load(&a.maps)?;
    let query = TokenRef {
        sentence: a.sentence,
        token: a.token,
    };
    let hits = query_neighbors(query, &src, &tgt, &corpus, a.sim, a.k, a.top)?;
    let sentence = &corpus.entries()[a.sentence].src;
    say!(out, "query {}:{} {:?} in: {}", a.sentence, a.token, sentence.tokens()[a.token], sentence.text());
    for (rank, n) in hits.iter().enumerate() {
        say!(out, "{}\t{:.6}\t{}\t{}:{}\t{}", rank + 1, n.score, n.word, n.sentence, n.token, n.text);
    }
    Ok(())
}

fn cmd_report(a: ReportArgs, out: &mut (dyn Write + Send)) -> Result<(), Failure> {
    let manifest = Manifest::load(&a.dir)?;
    say!(out, "{} {} config {}", manifest.tool, manifest.version, manifest.config_sha256);
    say!(out, "seed {}", manifest.seeds.run);
    let bad = manifest.verify(&a.dir);
    say!(out, "files: {} recorded, {} mismatched", manifest.files.len(), bad.len());
    for name in ["base", "aligned"] {
        let path = a.dir.join("eval").join(format!("{name}.json"));
        if let Ok(text) = std::fs::read_to_string(&path) {
            let r: RetrievalReport = serde_json::from_str(&text).map_err(|e| Error::Parse {
                line: e.line(),
                message: format!("{}: {e}", path.display()),
            })?;
            say!(
                out,
                "{name}: mean {:.4} (src->tgt {:.4}, tgt->src {:.4}, {} pairs)",
                r.mean_accuracy,
                r.src_to_tgt.accuracy,
                r.tgt_to_src.accuracy,
                r.src_to_tgt.evaluated
            );
        }
    }
    if bad.is_empty() {
        Ok(())
    } else {
        Err(Failure {
            code: EXIT_DATA,
            message: format!("checksum mismatch: {}", bad.join(", ")),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_set_nested_fields() {
        let mut doc = serde_json::json!({"align": {"method": "rotation"}});
        apply_override(&mut doc, "align.lambda=2").unwrap();
        apply_override(&mut doc, "eval.sim=cosine").unwrap();
        apply_override(&mut doc, "align.method=\"finetune\"").unwrap();
        assert_eq!(doc["align"]["lambda"], 2);
        assert_eq!(doc["eval"]["sim"], "cosine");
        assert_eq!(doc["align"]["method"], "finetune");
        assert!(apply_override(&mut doc, "novalue").is_err());
        assert!(apply_override(&mut doc, "align.method.x=1").is_err());
    }

    #[test]
    fn usage_errors_exit_one() {
        let mut sink = Vec::new();
        assert_eq!(run_cli(["ctxalign", "eval", "--sim", "euclid"], &mut sink), EXIT_USAGE);
        assert_eq!(run_cli(["ctxalign", "frobnicate"], &mut sink), EXIT_USAGE);
        assert_eq!(run_cli(["ctxalign", "--help"], &mut sink), EXIT_OK);
    }

    #[test]
    fn eval_flags_parse() {
        let cli = Cli::try_parse_from([
            "ctxalign", "eval", "--src-text", "a", "--tgt-text", "b", "--pairs", "p", "--src-emb", "x", "--tgt-emb",
            "y", "--sim", "csls", "--k", "10",
        ])
        .unwrap();
        let Command::Eval(e) = cli.command else { panic!("not eval") };
        assert_eq!(e.retrieval.config(), RetrievalConfig::default());
    }

    #[test]
    fn align_flags_match_defaults() {
        let cli = Cli::try_parse_from([
            "ctxalign", "align", "--src-text", "a", "--tgt-text", "b", "--pairs", "p", "--src-emb", "x", "--tgt-emb",
            "y", "--method", "finetune", "--lambda", "1",
        ])
        .unwrap();
        let Command::Align(a) = cli.command else { panic!("not align") };
        assert_eq!(a.method, AlignMethod::Finetune);
        assert_eq!(a.lambda, Some(AlignConfig::default().lambda));
    }
}
