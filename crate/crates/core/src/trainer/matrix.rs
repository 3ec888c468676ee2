use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::Path;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::ParaphraseBatch;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

const MAGIC: &str = "sentrefine-matrix";
const FORMAT_VERSION: u32 = 1;

/// How the similarity matrix of a transformed batch is normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NormalizationMode {
    /// Cosine of the transformed vectors `W i` and `W p`.
    #[default]
    CosineTransformed,
    /// Inner products of transformed vectors divided by the norms of the
    /// untransformed ones.
    PaperLiteral,
}

impl NormalizationMode {
    pub fn as_str(self) -> &'static str {
        match self {
            NormalizationMode::CosineTransformed => "cosine_transformed",
            NormalizationMode::PaperLiteral => "paper_literal",
        }
    }
}

impl fmt::Display for NormalizationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NormalizationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cosine_transformed" | "cosine" => Ok(NormalizationMode::CosineTransformed),
            "paper_literal" | "literal" => Ok(NormalizationMode::PaperLiteral),
            other => Err(Error::Config(format!(
                "unknown normalization mode {other:?}"
            ))),
        }
    }
}

/// Provenance carried alongside the weights.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixMeta {
    pub lambda: f64,
    pub seed: u64,
    pub epochs: usize,
    pub mode: NormalizationMode,
}

impl Default for MatrixMeta {
    fn default() -> Self {
        MatrixMeta {
            lambda: 0.0,
            seed: 0,
            epochs: 0,
            mode: NormalizationMode::default(),
        }
    }
}

/// Square matrix `W` mapping a sentence vector `v` to `W v`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix<F> {
    weights: Array2<F>,
    pub meta: MatrixMeta,
}

impl<F: Scalar> TransitionMatrix<F> {
    pub fn from_weights(weights: Array2<F>, meta: MatrixMeta) -> Result<Self> {
        let (r, c) = weights.dim();
        if r != c || r == 0 {
            return Err(Error::Data(format!(
                "transition matrix must be square and non-empty, got {r}x{c}"
            )));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Data(
                "transition matrix has non-finite entries".into(),
            ));
        }
        Ok(TransitionMatrix { weights, meta })
    }

    pub fn identity(dim: usize) -> Self {
        TransitionMatrix {
            weights: Array2::eye(dim),
            meta: MatrixMeta::default(),
        }
    }

    pub fn dim(&self) -> usize {
        self.weights.nrows()
    }

    pub fn weights(&self) -> ArrayView2<'_, F> {
        self.weights.view()
    }

    pub(crate) fn weights_mut(&mut self) -> &mut Array2<F> {
        &mut self.weights
    }

    /// Returns `c W` with the same metadata.
    pub fn scaled(&self, c: F) -> Self {
        TransitionMatrix {
            weights: self.weights.mapv(|w| w * c),
            meta: self.meta.clone(),
        }
    }

    /// Writes the self-describing text container. Entries are stored as
    /// 64-bit floats in shortest round-trip form, row-major.
    pub fn write_to<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{MAGIC} {FORMAT_VERSION}")?;
        writeln!(out, "dim {}", self.dim())?;
        writeln!(out, "lambda {:?}", self.meta.lambda)?;
        writeln!(out, "seed {}", self.meta.seed)?;
        writeln!(out, "mode {}", self.meta.mode)?;
        writeln!(out, "epochs {}", self.meta.epochs)?;
        writeln!(out, "weights")?;
        for row in self.weights.rows() {
            let line: Vec<String> = row
                .iter()
                .map(|w| format!("{:?}", w.to_f64_lossy()))
                .collect();
            writeln!(out, "{}", line.join(" "))?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut buf = Vec::new();
        self.write_to(&mut buf).map_err(|e| Error::io(path, e))?;
        fs::write(path, buf).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let mut next = |what: &str| {
            lines
                .next()
                .ok_or_else(|| Error::parse(path, 0, format!("truncated file, missing {what}")))
        };
        let (ln, magic) = next("header")?;
        if magic != format!("{MAGIC} {FORMAT_VERSION}") {
            return Err(Error::parse(path, ln, "not a transition matrix file"));
        }
        let mut field = |key: &str| -> Result<(usize, String)> {
            let (ln, line) = next(key)?;
            match line.split_once(' ') {
                Some((k, v)) if k == key => Ok((ln, v.trim().to_owned())),
                _ => Err(Error::parse(path, ln, format!("expected `{key} <value>`"))),
            }
        };
        let bad = |ln: usize, key: &str| Error::parse(path, ln, format!("invalid {key}"));
        let (ln, v) = field("dim")?;
        let dim: usize = v.parse().map_err(|_| bad(ln, "dim"))?;
        let (ln, v) = field("lambda")?;
        let lambda: f64 = v.parse().map_err(|_| bad(ln, "lambda"))?;
        let (ln, v) = field("seed")?;
        let seed: u64 = v.parse().map_err(|_| bad(ln, "seed"))?;
        let (ln, v) = field("mode")?;
        let mode: NormalizationMode = v.parse().map_err(|_| bad(ln, "mode"))?;
        let (ln, v) = field("epochs")?;
        let epochs: usize = v.parse().map_err(|_| bad(ln, "epochs"))?;
        let (ln, line) = next("weights")?;
        if line != "weights" {
            return Err(Error::parse(path, ln, "expected `weights`"));
        }
        let mut flat = Vec::with_capacity(dim * dim);
        for _ in 0..dim {
            let (ln, line) = next("weight row")?;
            let row: Vec<&str> = line.split_whitespace().collect();
            if row.len() != dim {
                return Err(Error::parse(
                    path,
                    ln,
                    format!("expected {dim} entries, found {}", row.len()),
                ));
            }
            for field in row {
                let v: f64 = field.parse().map_err(|_| bad(ln, "weight"))?;
                flat.push(F::lit(v));
            }
        }
        let weights =
            Array2::from_shape_vec((dim, dim), flat).map_err(|e| Error::Data(e.to_string()))?;
        Self::from_weights(
            weights,
            MatrixMeta {
                lambda,
                seed,
                epochs,
                mode,
            },
        )
    }

    /// Tab-separated rows, for diffing.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> io::Result<()> {
        for row in self.weights.rows() {
            let line: Vec<String> = row
                .iter()
                .map(|w| format!("{:?}", w.to_f64_lossy()))
                .collect();
            writeln!(out, "{}", line.join("\t"))?;
        }
        Ok(())
    }
}

/// Half-width of the Xavier uniform range for a square `dim x dim` matrix.
pub fn xavier_bound(dim: usize) -> f64 {
    (6.0 / (2.0 * dim as f64)).sqrt()
}

/// Entries i.i.d. uniform on `[-sqrt(6/(2d)), sqrt(6/(2d))]`.
pub fn xavier_init<F: Scalar>(dim: usize, seed: u64) -> Result<TransitionMatrix<F>> {
    if dim == 0 {
        return Err(Error::Config("matrix dimension must be positive".into()));
    }
    let bound = F::lit(xavier_bound(dim));
    let dist = Uniform::new_inclusive(-bound, bound).map_err(|e| Error::Config(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights = Array2::from_shape_simple_fn((dim, dim), || dist.sample(&mut rng));
    Ok(TransitionMatrix {
        weights,
        meta: MatrixMeta {
            seed,
            ..MatrixMeta::default()
        },
    })
}

/// Applies `W` to every row of both sides of the batch.
pub fn transform_batch<F: Scalar>(
    w: &TransitionMatrix<F>,
    batch: &ParaphraseBatch<F>,
) -> Result<(Array2<F>, Array2<F>)> {
    if batch.dim() != w.dim() {
        return Err(Error::DimensionMismatch {
            expected: w.dim(),
            actual: batch.dim(),
        });
    }
    let wt = w.weights.t();
    Ok((batch.inputs.dot(&wt), batch.paraphrases.dot(&wt)))
}

/// `W v`.
pub fn refine_vector<F: Scalar>(
    w: &TransitionMatrix<F>,
    v: ArrayView1<'_, F>,
) -> Result<Array1<F>> {
    if v.len() != w.dim() {
        return Err(Error::DimensionMismatch {
            expected: w.dim(),
            actual: v.len(),
        });
    }
    Ok(w.weights.dot(&v))
}
