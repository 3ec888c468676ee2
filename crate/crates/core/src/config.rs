//! Flat `key = value` run configuration.
//!
//! Values are resolved as defaults, then a config file, then command-line
//! overrides. The resolved configuration is written next to every run's
//! outputs and can be fed back with `--config` to repeat the run.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::trainer::{
    NormalizationMode, RmsPropParams, TrainerConfig, DEFAULT_BATCH_SIZE, DEFAULT_OUTER_EPOCHS,
    GLOVE_LAMBDA, WORD2VEC_LAMBDA,
};

/// Provenance of the word vectors; selects the default trade-off weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VectorKind {
    #[default]
    Glove,
    Word2vec,
}

impl VectorKind {
    pub fn default_lambda(self) -> f64 {
        match self {
            VectorKind::Glove => GLOVE_LAMBDA,
            VectorKind::Word2vec => WORD2VEC_LAMBDA,
        }
    }
}

impl fmt::Display for VectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VectorKind::Glove => "glove",
            VectorKind::Word2vec => "word2vec",
        })
    }
}

impl FromStr for VectorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "glove" => Ok(VectorKind::Glove),
            "word2vec" | "w2v" => Ok(VectorKind::Word2vec),
            other => Err(Error::Config(format!("unknown vectors_kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Precision {
    F32,
    #[default]
    F64,
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Precision::F32 => "f32",
            Precision::F64 => "f64",
        })
    }
}

impl FromStr for Precision {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "f32" => Ok(Precision::F32),
            "f64" => Ok(Precision::F64),
            other => Err(Error::Config(format!("unknown precision {other:?}"))),
        }
    }
}

/// One evaluation dataset: `name=input[,gold]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetSpec {
    pub name: String,
    pub input: PathBuf,
    pub gold: Option<PathBuf>,
}

impl fmt::Display for DatasetSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}={}", self.name, self.input.display())?;
        if let Some(g) = &self.gold {
            write!(f, ",{}", g.display())?;
        }
        Ok(())
    }
}

impl FromStr for DatasetSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, paths) = s
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("dataset {s:?} is not name=path[,gold]")))?;
        let (input, gold) = match paths.split_once(',') {
            Some((i, g)) => (i, Some(PathBuf::from(g.trim()))),
            None => (paths, None),
        };
        let name = name.trim();
        let input = input.trim();
        if name.is_empty() || input.is_empty() {
            return Err(Error::Config(format!(
                "dataset {s:?} is not name=path[,gold]"
            )));
        }
        Ok(DatasetSpec {
            name: name.to_owned(),
            input: PathBuf::from(input),
            gold,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub word_vectors: Option<PathBuf>,
    pub vectors_kind: VectorKind,
    pub dim: Option<usize>,
    pub captions: Option<PathBuf>,
    pub strict_five: bool,
    pub datasets: Vec<DatasetSpec>,
    pub matrix: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub precision: Precision,
    /// `None` resolves to the default for `vectors_kind`.
    pub lambda: Option<f64>,
    pub batch_size: usize,
    pub outer_epochs: usize,
    pub learning_rate: f64,
    pub rms_decay: f64,
    pub rms_epsilon: f64,
    pub seed: u64,
    pub normalization: NormalizationMode,
    pub data_fraction: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let rms = RmsPropParams::default();
        RunConfig {
            word_vectors: None,
            vectors_kind: VectorKind::default(),
            dim: None,
            captions: None,
            strict_five: false,
            datasets: Vec::new(),
            matrix: None,
            output_dir: PathBuf::from("out"),
            precision: Precision::default(),
            lambda: None,
            batch_size: DEFAULT_BATCH_SIZE,
            outer_epochs: DEFAULT_OUTER_EPOCHS,
            learning_rate: rms.learning_rate,
            rms_decay: rms.decay,
            rms_epsilon: rms.epsilon,
            seed: 0,
            normalization: NormalizationMode::default(),
            data_fraction: 1.0,
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value {value:?} for {key}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!(
            "invalid boolean {value:?} for {key}"
        ))),
    }
}

fn optional_path(value: &str) -> Option<PathBuf> {
    (!value.is_empty()).then(|| PathBuf::from(value))
}

impl RunConfig {
    /// Applies one `key = value` setting. An empty value clears optional keys.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim() {
            "word_vectors" => self.word_vectors = optional_path(value),
            "vectors_kind" => self.vectors_kind = value.parse()?,
            "dim" => {
                self.dim = match value {
                    "" => None,
                    v => Some(parse_value(key, v)?),
                }
            }
            "captions" => self.captions = optional_path(value),
            "strict_five" => self.strict_five = parse_bool(key, value)?,
            "datasets" => {
                self.datasets = value
                    .split(';')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(str::parse)
                    .collect::<Result<_>>()?
            }
            "matrix" => self.matrix = optional_path(value),
            "output_dir" => self.output_dir = PathBuf::from(value),
            "precision" => self.precision = value.parse()?,
            "lambda" => {
                self.lambda = match value {
                    "" => None,
                    v => Some(parse_value(key, v)?),
                }
            }
            "batch_size" => self.batch_size = parse_value(key, value)?,
            "outer_epochs" => self.outer_epochs = parse_value(key, value)?,
            "learning_rate" => self.learning_rate = parse_value(key, value)?,
            "rms_decay" => self.rms_decay = parse_value(key, value)?,
            "rms_epsilon" => self.rms_epsilon = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            "normalization" => self.normalization = value.parse()?,
            "data_fraction" => self.data_fraction = parse_value(key, value)?,
            other => return Err(Error::Config(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    /// Applies every `key = value` line of `text`; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str, origin: &Path) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or_default().trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!(
                    "{}:{}: expected key = value",
                    origin.display(),
                    i + 1
                ))
            })?;
            self.set(k, v)
                .map_err(|e| Error::Config(format!("{}:{}: {e}", origin.display(), i + 1)))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        self.apply_text(&text, path)
    }

    pub fn resolved_lambda(&self) -> f64 {
        self.lambda
            .unwrap_or_else(|| self.vectors_kind.default_lambda())
    }

    pub fn trainer_config(&self) -> TrainerConfig {
        TrainerConfig {
            lambda: self.resolved_lambda(),
            batch_size: self.batch_size,
            outer_epochs: self.outer_epochs,
            optimizer: RmsPropParams {
                learning_rate: self.learning_rate,
                decay: self.rms_decay,
                epsilon: self.rms_epsilon,
            },
            seed: self.seed,
            mode: self.normalization,
            data_fraction: self.data_fraction,
        }
    }

    /// Range checks plus existence of the named input files.
    pub fn validate(&self, needs: &[Input]) -> Result<()> {
        self.trainer_config().validate()?;
        for need in needs {
            let (key, path) = match need {
                Input::WordVectors => ("word_vectors", &self.word_vectors),
                Input::Captions => ("captions", &self.captions),
                Input::Matrix => ("matrix", &self.matrix),
            };
            match path {
                Some(p) if p.is_file() => {}
                Some(p) => {
                    return Err(Error::Config(format!(
                        "{key}: {} does not exist",
                        p.display()
                    )))
                }
                None if matches!(need, Input::Matrix) => {}
                None => return Err(Error::Config(format!("{key} is required"))),
            }
        }
        Ok(())
    }

    /// Fully resolved configuration in the same `key = value` format.
    pub fn snapshot(&self) -> String {
        let opt = |p: &Option<PathBuf>| {
            p.as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_default()
        };
        let datasets: Vec<String> = self.datasets.iter().map(ToString::to_string).collect();
        let lines = [
            ("word_vectors", opt(&self.word_vectors)),
            ("vectors_kind", self.vectors_kind.to_string()),
            ("dim", self.dim.map(|d| d.to_string()).unwrap_or_default()),
            ("captions", opt(&self.captions)),
            ("strict_five", self.strict_five.to_string()),
            ("datasets", datasets.join(";")),
            ("matrix", opt(&self.matrix)),
            ("output_dir", self.output_dir.display().to_string()),
            ("precision", self.precision.to_string()),
            ("lambda", format!("{:?}", self.resolved_lambda())),
            ("batch_size", self.batch_size.to_string()),
            ("outer_epochs", self.outer_epochs.to_string()),
            ("learning_rate", format!("{:?}", self.learning_rate)),
            ("rms_decay", format!("{:?}", self.rms_decay)),
            ("rms_epsilon", format!("{:?}", self.rms_epsilon)),
            ("seed", self.seed.to_string()),
            ("normalization", self.normalization.to_string()),
            ("data_fraction", format!("{:?}", self.data_fraction)),
        ];
        lines.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

/// Input files a subcommand requires.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Input {
    WordVectors,
    Captions,
    /// Optional; checked only when set.
    Matrix,
}
