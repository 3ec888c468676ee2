//! `sentrefine` command line: `pairs`, `train`, `eval` and `embed`.
//!
//! Exit codes: 0 success, 1 invalid configuration or arguments, 2 data or
//! runtime failure (including partial failure of `eval`).

use std::ffi::OsString;
use std::fs;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{DatasetSpec, Input, Precision, RunConfig};
use crate::corpus::{corpus_stats, load_caption_corpus, write_sets_tsv};
use crate::embeddings::{load_word_vectors, SentenceEmbedder, WordVectorTable};
use crate::error::{Error, Result};
use crate::eval::{compare, evaluate, load_sts_dataset, write_reports_tsv};
use crate::scalar::Scalar;
use crate::trainer::{prepare_sets, refine_vector, train, TransitionMatrix};

type Handler = fn(&RunConfig, &mut Io<'_>) -> Result<i32>;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

pub const SNAPSHOT_FILE: &str = "run.conf";
pub const SETS_FILE: &str = "sub_training_sets.tsv";
pub const MATRIX_FILE: &str = "matrix.txt";
pub const MATRIX_TSV_FILE: &str = "matrix.tsv";
pub const LOG_FILE: &str = "train_log.tsv";
pub const REPORT_FILE: &str = "eval.tsv";
pub const COMPARISON_FILE: &str = "comparison.tsv";
pub const TABLE_FILE: &str = "comparison.txt";

#[derive(Debug, Parser)]
#[command(
    name = "sentrefine",
    version,
    about = "Train and evaluate a sentence transition matrix"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build the ten sub-training sets from a caption corpus.
    Pairs(Common),
    /// Train a transition matrix.
    Train(Common),
    /// Score STS datasets with and without a transition matrix.
    Eval(Common),
    /// Embed sentences read from stdin, one per line.
    Embed(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// Flat key = value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override any configuration key.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    word_vectors: Option<String>,
    /// glove or word2vec; selects the default lambda.
    #[arg(long)]
    vectors_kind: Option<String>,
    #[arg(long)]
    captions: Option<String>,
    /// Evaluation dataset as name=input[,gold]. Repeatable.
    #[arg(long = "dataset")]
    datasets: Vec<String>,
    #[arg(long)]
    matrix: Option<String>,
    #[arg(long, short)]
    output: Option<String>,
    #[arg(long)]
    lambda: Option<String>,
    /// Share of images used for training, in (0, 1].
    #[arg(long)]
    fraction: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    batch_size: Option<String>,
    #[arg(long)]
    outer_epochs: Option<String>,
    #[arg(long)]
    learning_rate: Option<String>,
    /// cosine_transformed or paper_literal.
    #[arg(long)]
    normalization: Option<String>,
    /// f32 or f64.
    #[arg(long)]
    precision: Option<String>,
    /// Drop images with fewer than five captions.
    #[arg(long)]
    strict_five: bool,
}

impl Common {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        let flags = [
            ("word_vectors", &self.word_vectors),
            ("vectors_kind", &self.vectors_kind),
            ("captions", &self.captions),
            ("matrix", &self.matrix),
            ("output_dir", &self.output),
            ("lambda", &self.lambda),
            ("data_fraction", &self.fraction),
            ("seed", &self.seed),
            ("batch_size", &self.batch_size),
            ("outer_epochs", &self.outer_epochs),
            ("learning_rate", &self.learning_rate),
            ("normalization", &self.normalization),
            ("precision", &self.precision),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        if self.strict_five {
            cfg.strict_five = true;
        }
        if !self.datasets.is_empty() {
            cfg.datasets = self
                .datasets
                .iter()
                .map(|d| d.parse::<DatasetSpec>())
                .collect::<Result<_>>()?;
        }
        for kv in &self.overrides {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got {kv:?}")))?;
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }
}

/// Streams a subcommand reads from and writes to.
pub struct Io<'a> {
    pub stdin: &'a mut dyn BufRead,
    pub stdout: &'a mut dyn Write,
    pub stderr: &'a mut dyn Write,
}

/// Parses `args` (including the program name) and runs the subcommand.
pub fn run<I, T>(args: I, io: Io<'_>) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() {
                EXIT_VALIDATION
            } else {
                EXIT_OK
            };
            let _ = write!(io.stderr, "{e}");
            return code;
        }
    };
    let (common, cmd): (&Common, Handler) = match &cli.command {
        Command::Pairs(c) => (c, cmd_pairs),
        Command::Train(c) => (c, dispatch_train),
        Command::Eval(c) => (c, dispatch_eval),
        Command::Embed(c) => (c, dispatch_embed),
    };
    let mut io = io;
    let result = common.resolve().and_then(|cfg| cmd(&cfg, &mut io));
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(io.stderr, "error: {e}");
            if e.is_validation() {
                EXIT_VALIDATION
            } else {
                EXIT_RUNTIME
            }
        }
    }
}

fn create_output_dir(cfg: &RunConfig) -> Result<&Path> {
    let dir = cfg.output_dir.as_path();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let snap = dir.join(SNAPSHOT_FILE);
    fs::write(&snap, cfg.snapshot()).map_err(|e| Error::io(&snap, e))?;
    Ok(dir)
}

fn write_file(path: PathBuf, f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<()> {
    let mut buf = Vec::new();
    f(&mut buf).map_err(|e| Error::io(&path, e))?;
    fs::write(&path, buf).map_err(|e| Error::io(&path, e))
}

fn out_err(e: std::io::Error) -> Error {
    Error::io("<stdout>", e)
}

/// Writes the sub-training sets and prints corpus statistics.
pub fn cmd_pairs(cfg: &RunConfig, io: &mut Io<'_>) -> Result<i32> {
    cfg.validate(&[Input::Captions])?;
    let groups = load_caption_corpus(cfg.captions.as_ref().expect("validated"))?;
    let sets = prepare_sets(&cfg.trainer_config(), &groups, cfg.strict_five)?;
    let stats = corpus_stats(&groups, &sets);
    let dir = create_output_dir(cfg)?;
    write_file(dir.join(SETS_FILE), |b| write_sets_tsv(&sets, b))?;

    let out = &mut io.stdout;
    let mut report = format!(
        "groups\t{}\ncaptions\t{}\nunpairable_groups\t{}\n",
        stats.groups, stats.captions, stats.unpairable_groups
    );
    for (i, n) in stats.set_sizes.iter().enumerate() {
        report.push_str(&format!("set_{i}\t{n}\n"));
    }
    write_file(dir.join("pairs_stats.tsv"), |b| {
        b.write_all(report.as_bytes())
    })?;
    out.write_all(report.as_bytes()).map_err(out_err)?;
    Ok(EXIT_OK)
}

fn load_table<F: Scalar>(cfg: &RunConfig, io: &mut Io<'_>) -> Result<WordVectorTable<F>> {
    let path = cfg.word_vectors.as_ref().expect("validated");
    let table = load_word_vectors(path, cfg.dim)?;
    if table.duplicates_skipped() > 0 {
        let _ = writeln!(
            io.stderr,
            "warning: {}: {} duplicate tokens skipped (first occurrence kept)",
            path.display(),
            table.duplicates_skipped()
        );
    }
    Ok(table)
}

fn dispatch_train(cfg: &RunConfig, io: &mut Io<'_>) -> Result<i32> {
    match cfg.precision {
        Precision::F32 => cmd_train::<f32>(cfg, io),
        Precision::F64 => cmd_train::<f64>(cfg, io),
    }
}

fn dispatch_eval(cfg: &RunConfig, io: &mut Io<'_>) -> Result<i32> {
    match cfg.precision {
        Precision::F32 => cmd_eval::<f32>(cfg, io),
        Precision::F64 => cmd_eval::<f64>(cfg, io),
    }
}

fn dispatch_embed(cfg: &RunConfig, io: &mut Io<'_>) -> Result<i32> {
    match cfg.precision {
        Precision::F32 => cmd_embed::<f32>(cfg, io),
        Precision::F64 => cmd_embed::<f64>(cfg, io),
    }
}

/// Trains on the caption corpus and writes the matrix and the training log.
pub fn cmd_train<F: Scalar>(cfg: &RunConfig, io: &mut Io<'_>) -> Result<i32> {
    cfg.validate(&[Input::WordVectors, Input::Captions])?;
    let tc = cfg.trainer_config();
    let table = load_table::<F>(cfg, io)?;
    let groups = load_caption_corpus(cfg.captions.as_ref().expect("validated"))?;
    let sets = prepare_sets(&tc, &groups, cfg.strict_five)?;
    let started = std::time::Instant::now();
    let outcome = train(&tc, &sets, &table)?;
    let elapsed = started.elapsed();

    let dir = create_output_dir(cfg)?;
    outcome.matrix.save(dir.join(MATRIX_FILE))?;
    write_file(dir.join(MATRIX_TSV_FILE), |b| outcome.matrix.write_tsv(b))?;
    write_file(dir.join(LOG_FILE), |b| outcome.log.write_to(b))?;

    let out = &mut io.stdout;
    for h in &outcome.log.header {
        writeln!(out, "# {h}").map_err(out_err)?;
    }
    writeln!(
        out,
        "vocab={} images={} dropped_pairs={}",
        table.vocab_size(),
        groups.len(),
        outcome.log.dropped_pairs
    )
    .map_err(out_err)?;
    if let (Some(first), Some(last)) = (outcome.log.first_loss(), outcome.log.last_loss()) {
        writeln!(out, "loss first={:.6} last={:.6}", first.total, last.total).map_err(out_err)?;
    }
    writeln!(
        out,
        "trained in {:.1}s -> {}",
        elapsed.as_secs_f64(),
        dir.join(MATRIX_FILE).display()
    )
    .map_err(out_err)?;
    Ok(EXIT_OK)
}

fn load_matrix<F: Scalar>(cfg: &RunConfig, dim: usize) -> Result<Option<TransitionMatrix<F>>> {
    let Some(path) = &cfg.matrix else {
        return Ok(None);
    };
    let w = TransitionMatrix::<F>::load(path)?;
    if w.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: w.dim(),
        });
    }
    Ok(Some(w))
}

/// Evaluates every configured dataset. A dataset that fails is reported on
/// stderr and the others still run; any failure makes the exit code 2.
pub fn cmd_eval<F: Scalar>(cfg: &RunConfig, io: &mut Io<'_>) -> Result<i32> {
    cfg.validate(&[Input::WordVectors, Input::Matrix])?;
    if cfg.datasets.is_empty() {
        return Err(Error::Config("no datasets given".into()));
    }
    let table = load_table::<F>(cfg, io)?;
    let matrix = load_matrix::<F>(cfg, table.dim())?;
    let dir = create_output_dir(cfg)?;

    let mut loaded = Vec::new();
    let mut reports = Vec::new();
    let mut failures = 0;
    for spec in &cfg.datasets {
        let result = load_sts_dataset(&spec.name, &spec.input, spec.gold.as_deref())
            .and_then(|d| evaluate(&table, matrix.as_ref(), &d).map(|r| (d, r)));
        match result {
            Ok((d, r)) => {
                loaded.push(d);
                reports.push(r);
            }
            Err(e) => {
                failures += 1;
                let _ = writeln!(io.stderr, "error: dataset {}: {e}", spec.name);
            }
        }
    }
    write_file(dir.join(REPORT_FILE), |b| write_reports_tsv(&reports, b))?;
    write_reports_tsv(&reports, &mut io.stdout).map_err(out_err)?;

    if let (Some(w), false) = (&matrix, loaded.is_empty()) {
        let cmp = compare(&table, w, &loaded)?;
        write_file(dir.join(COMPARISON_FILE), |b| cmp.write_tsv(b))?;
        let table_text = cmp.render_table();
        write_file(dir.join(TABLE_FILE), |b| b.write_all(table_text.as_bytes()))?;
        writeln!(io.stdout, "# lambda={:?}", w.meta.lambda).map_err(out_err)?;
        io.stdout
            .write_all(table_text.as_bytes())
            .map_err(out_err)?;
    }
    Ok(if failures == 0 { EXIT_OK } else { EXIT_RUNTIME })
}

/// One tab-separated vector per input line; failures go to stderr.
pub fn cmd_embed<F: Scalar>(cfg: &RunConfig, io: &mut Io<'_>) -> Result<i32> {
    cfg.validate(&[Input::WordVectors, Input::Matrix])?;
    let table = load_table::<F>(cfg, io)?;
    let matrix = load_matrix::<F>(cfg, table.dim())?;
    let mut failures = 0;
    let mut line = String::new();
    let mut lineno = 0;
    loop {
        line.clear();
        let n = io
            .stdin
            .read_line(&mut line)
            .map_err(|e| Error::io("<stdin>", e))?;
        if n == 0 {
            break;
        }
        lineno += 1;
        let sentence = line.trim_end_matches(['\n', '\r']);
        let vector = table.embed(sentence).and_then(|v| match &matrix {
            Some(w) => refine_vector(w, v.values.view()),
            None => Ok(v.values),
        });
        match vector {
            Ok(v) => {
                let fields: Vec<String> = v.iter().map(|x| x.to_string()).collect();
                writeln!(io.stdout, "{}", fields.join("\t")).map_err(out_err)?;
            }
            Err(e) => {
                failures += 1;
                let _ = writeln!(io.stderr, "error: line {lineno}: {e}");
            }
        }
    }
    Ok(if failures == 0 { EXIT_OK } else { EXIT_RUNTIME })
}
