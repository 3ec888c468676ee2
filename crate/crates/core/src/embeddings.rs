//! Pre-trained word-vector tables and averaged sentence vectors.
//!
//! The table loader accepts the whitespace-separated text layout used by
//! both GloVe and the word2vec text export: one `token v1 ... vd` record per
//! line, optionally preceded by a `count dim` header line.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Immutable token → vector lexicon.
#[derive(Debug, Clone)]
pub struct WordVectorTable<F> {
    dim: usize,
    index: HashMap<String, usize>,
    tokens: Vec<String>,
    vectors: Array2<F>,
    duplicates_skipped: usize,
}

impl<F: Scalar> WordVectorTable<F> {
    /// Builds a table from in-memory entries. Later duplicates are skipped.
    pub fn from_entries<I, S>(dim: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, Vec<F>)>,
        S: Into<String>,
    {
        if dim == 0 {
            return Err(Error::Config(
                "word-vector dimension must be positive".into(),
            ));
        }
        let mut builder = TableBuilder::new(dim);
        for (token, values) in entries {
            if values.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: values.len(),
                });
            }
            builder.push(token.into(), values);
        }
        Ok(builder.finish())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vocab_size(&self) -> usize {
        self.tokens.len()
    }

    /// Number of records dropped because their token was already present.
    pub fn duplicates_skipped(&self) -> usize {
        self.duplicates_skipped
    }

    pub fn get(&self, token: &str) -> Option<ArrayView1<'_, F>> {
        self.index.get(token).map(|&row| self.vectors.row(row))
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(String::as_str)
    }
}

struct TableBuilder<F> {
    dim: usize,
    index: HashMap<String, usize>,
    tokens: Vec<String>,
    flat: Vec<F>,
    duplicates_skipped: usize,
}

impl<F: Scalar> TableBuilder<F> {
    fn new(dim: usize) -> Self {
        TableBuilder {
            dim,
            index: HashMap::new(),
            tokens: Vec::new(),
            flat: Vec::new(),
            duplicates_skipped: 0,
        }
    }

    fn push(&mut self, token: String, values: Vec<F>) {
        if self.index.contains_key(&token) {
            self.duplicates_skipped += 1;
            return;
        }
        self.index.insert(token.clone(), self.tokens.len());
        self.tokens.push(token);
        self.flat.extend(values);
    }

    fn finish(self) -> WordVectorTable<F> {
        let rows = self.tokens.len();
        let vectors =
            Array2::from_shape_vec((rows, self.dim), self.flat).expect("rows are dim-sized");
        WordVectorTable {
            dim: self.dim,
            index: self.index,
            tokens: self.tokens,
            vectors,
            duplicates_skipped: self.duplicates_skipped,
        }
    }
}

/// Loads a text word-vector file.
///
/// The dimension is taken from `expected_dim`, else from a header line, else
/// from the first data record. Every record must match it.
pub fn load_word_vectors<F: Scalar>(
    path: impl AsRef<Path>,
    expected_dim: Option<usize>,
) -> Result<WordVectorTable<F>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_word_vectors(BufReader::new(file), path, expected_dim)
}

/// Reader-based variant of [`load_word_vectors`]; `path` only labels errors.
pub fn read_word_vectors<F: Scalar, R: BufRead>(
    reader: R,
    path: &Path,
    expected_dim: Option<usize>,
) -> Result<WordVectorTable<F>> {
    if expected_dim == Some(0) {
        return Err(Error::Config("expected dimension must be positive".into()));
    }
    let mut dim = expected_dim;
    let mut builder: Option<TableBuilder<F>> = None;
    let mut seen_first = false;

    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let mut fields = line.split_whitespace();
        let Some(token) = fields.next() else {
            continue;
        };
        let rest: Vec<&str> = fields.collect();

        if !seen_first {
            seen_first = true;
            if let Some(header_dim) = parse_header(token, &rest) {
                match dim {
                    Some(d) if d != header_dim => {
                        return Err(Error::parse(
                            path,
                            lineno,
                            format!("header declares dimension {header_dim}, expected {d}"),
                        ))
                    }
                    _ => dim = Some(header_dim),
                }
                continue;
            }
        }

        let d = *dim.get_or_insert(rest.len());
        if d == 0 {
            return Err(Error::parse(
                path,
                lineno,
                "record has no vector components",
            ));
        }
        if rest.len() != d {
            return Err(Error::parse(
                path,
                lineno,
                format!("expected {d} components, found {}", rest.len()),
            ));
        }
        let mut values = Vec::with_capacity(d);
        for field in rest {
            let v: F = field.parse().map_err(|_| {
                Error::parse(path, lineno, format!("non-numeric component {field:?}"))
            })?;
            values.push(v);
        }
        builder
            .get_or_insert_with(|| TableBuilder::new(d))
            .push(token.to_owned(), values);
    }

    match builder {
        Some(b) if !b.tokens.is_empty() => Ok(b.finish()),
        _ => Err(Error::Empty(path.to_path_buf())),
    }
}

// A header is exactly two non-negative integers with a positive second field.
fn parse_header(first: &str, rest: &[&str]) -> Option<usize> {
    if rest.len() != 1 {
        return None;
    }
    first.parse::<u64>().ok()?;
    rest[0].parse::<usize>().ok().filter(|&d| d > 0)
}

/// Lowercases, splits on whitespace and strips non-alphanumeric characters
/// from both ends of every token. Empty tokens are dropped.
pub fn tokenize(sentence: &str) -> Vec<String> {
    sentence
        .split_whitespace()
        .map(|raw| {
            raw.trim_matches(|c: char| !c.is_alphanumeric())
                .to_lowercase()
        })
        .filter(|t| !t.is_empty())
        .collect()
}

/// Arithmetic mean of the in-vocabulary word vectors of one sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct SentenceVector<F> {
    pub values: Array1<F>,
    /// In-vocabulary tokens that were averaged (always at least one).
    pub token_count: usize,
    pub oov_count: usize,
}

impl<F: Scalar> SentenceVector<F> {
    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// Anything that maps a sentence to a fixed-dimension vector.
pub trait SentenceEmbedder<F> {
    fn dim(&self) -> usize;
    fn embed(&self, sentence: &str) -> Result<SentenceVector<F>>;
}

impl<F: Scalar> SentenceEmbedder<F> for WordVectorTable<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, sentence: &str) -> Result<SentenceVector<F>> {
        embed_sentence(self, sentence)
    }
}

/// Averages the table vectors of the sentence's tokens, skipping unknown ones.
pub fn embed_sentence<F: Scalar>(
    table: &WordVectorTable<F>,
    sentence: &str,
) -> Result<SentenceVector<F>> {
    let tokens = tokenize(sentence);
    let mut rows: Vec<usize> = tokens
        .iter()
        .filter_map(|t| table.index.get(t.as_str()).copied())
        .collect();
    let token_count = rows.len();
    let oov_count = tokens.len() - token_count;
    if token_count == 0 {
        return Err(Error::AllTokensUnknown {
            sentence: sentence.to_owned(),
        });
    }
    // Summing in table order makes the result bitwise independent of word order.
    rows.sort_unstable();
    let mut sum = Array1::<F>::zeros(table.dim);
    for row in rows {
        sum.zip_mut_with(&table.vectors.row(row), |s, &v| *s = *s + v);
    }
    let n = F::from_count(token_count);
    sum.mapv_inplace(|x| x / n);
    Ok(SentenceVector {
        values: sum,
        token_count,
        oov_count,
    })
}
