//! Caption-corpus ingestion, paraphrase pair mining and mini-batching.
//!
//! Each image's captions are treated as mutual paraphrases. For an image with
//! five captions the ten unordered caption pairs are spread over ten
//! sub-training sets, one pair per set, so that no set (and hence no batch)
//! contains two pairs describing the same image.

use std::borrow::Borrow;
use std::collections::HashMap;
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::embeddings::SentenceEmbedder;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Number of sub-training sets a five-caption image is spread over.
pub const NUM_SUB_SETS: usize = 10;
/// Captions per image used for set construction.
pub const CAPTIONS_PER_IMAGE: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaptionGroup {
    pub image_id: String,
    pub captions: Vec<String>,
}

impl CaptionGroup {
    /// Builds a group, dropping captions that normalize to an earlier one.
    pub fn new(image_id: impl Into<String>, captions: impl IntoIterator<Item = String>) -> Self {
        let mut group = CaptionGroup {
            image_id: image_id.into(),
            captions: Vec::new(),
        };
        let mut seen = std::collections::HashSet::new();
        for c in captions {
            if seen.insert(normalize_caption(&c)) {
                group.captions.push(c);
            }
        }
        group
    }
}

/// Trim and collapse runs of whitespace.
fn normalize_caption(caption: &str) -> String {
    caption.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[derive(Deserialize)]
struct CocoCaptions {
    annotations: Vec<CocoAnnotation>,
}

#[derive(Deserialize)]
struct CocoAnnotation {
    image_id: u64,
    caption: String,
}

/// Loads an MSCOCO captions JSON file, or a TSV of `image_id<TAB>caption`.
///
/// Groups keep the order in which image ids first appear.
pub fn load_caption_corpus(path: impl AsRef<Path>) -> Result<Vec<CaptionGroup>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_caption_corpus(&text, path)
}

pub fn parse_caption_corpus(text: &str, path: &Path) -> Result<Vec<CaptionGroup>> {
    let records: Vec<(String, String)> = if text.trim_start().starts_with('{') {
        let doc: CocoCaptions = serde_json::from_str(text)
            .map_err(|e| Error::parse(path, e.line(), format!("invalid captions JSON: {e}")))?;
        doc.annotations
            .into_iter()
            .map(|a| (a.image_id.to_string(), a.caption))
            .collect()
    } else {
        let mut out = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (id, caption) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(path, i + 1, "expected image_id<TAB>caption"))?;
            let id = id.trim();
            if id.is_empty() {
                return Err(Error::parse(path, i + 1, "empty image id"));
            }
            out.push((id.to_owned(), caption.to_owned()));
        }
        out
    };
    let groups = group_captions(records);
    if groups.is_empty() {
        return Err(Error::Empty(path.to_path_buf()));
    }
    Ok(groups)
}

fn group_captions(records: Vec<(String, String)>) -> Vec<CaptionGroup> {
    let mut order: Vec<String> = Vec::new();
    let mut by_id: HashMap<String, Vec<String>> = HashMap::new();
    for (id, caption) in records {
        let caption = normalize_caption(&caption);
        if caption.is_empty() {
            continue;
        }
        by_id
            .entry(id)
            .or_insert_with_key(|k| {
                order.push(k.clone());
                Vec::new()
            })
            .push(caption);
    }
    order
        .into_iter()
        .map(|id| {
            let captions = by_id.remove(&id).unwrap_or_default();
            CaptionGroup::new(id, captions)
        })
        .collect()
}

/// Returned by [`enumerate_pairs`] for groups that cannot form a pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SkippedGroup {
    pub captions: usize,
}

/// Unordered caption index pairs over the first `min(cap, len)` captions, in
/// lexicographic order `(0,1), (0,2), ..., (m-2,m-1)`.
pub fn enumerate_pairs(
    group: &CaptionGroup,
    cap: usize,
) -> std::result::Result<Vec<(usize, usize)>, SkippedGroup> {
    let m = group.captions.len().min(cap);
    if m < 2 {
        return Err(SkippedGroup {
            captions: group.captions.len(),
        });
    }
    Ok((0..m)
        .flat_map(|a| (a + 1..m).map(move |b| (a, b)))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingPair {
    pub image_id: String,
    pub sentence_a: String,
    pub sentence_b: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubTrainingSet {
    pub index: usize,
    pub pairs: Vec<TrainingPair>,
}

impl SubTrainingSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SetOptions {
    pub seed: u64,
    /// Drop images with fewer than five captions instead of letting them
    /// fill the lowest-indexed sets.
    pub strict_five: bool,
}

/// Distributes every image's caption pairs over [`NUM_SUB_SETS`] sets.
///
/// Pair `k` of an image goes to set `k`, so each set holds at most one pair
/// per image. Each set is then shuffled with its own seeded stream.
pub fn build_sub_training_sets(
    groups: &[CaptionGroup],
    options: SetOptions,
) -> Result<Vec<SubTrainingSet>> {
    let mut sets: Vec<SubTrainingSet> = (0..NUM_SUB_SETS)
        .map(|index| SubTrainingSet {
            index,
            pairs: Vec::new(),
        })
        .collect();
    let mut admitted = 0usize;
    for group in groups {
        if options.strict_five && group.captions.len() < CAPTIONS_PER_IMAGE {
            continue;
        }
        let Ok(pairs) = enumerate_pairs(group, CAPTIONS_PER_IMAGE) else {
            continue;
        };
        admitted += 1;
        for (k, (a, b)) in pairs.into_iter().enumerate() {
            sets[k].pairs.push(TrainingPair {
                image_id: group.image_id.clone(),
                sentence_a: group.captions[a].clone(),
                sentence_b: group.captions[b].clone(),
            });
        }
    }
    if admitted == 0 {
        return Err(Error::Data(
            "no image has enough captions to form a paraphrase pair".into(),
        ));
    }
    for set in &mut sets {
        set.pairs
            .shuffle(&mut stream_rng(options.seed, &[0, set.index as u64]));
    }
    Ok(sets)
}

/// Keeps `floor(fraction * groups.len())` images chosen with `seed`, in their
/// original order.
pub fn subsample_groups(
    groups: &[CaptionGroup],
    fraction: f64,
    seed: u64,
) -> Result<Vec<CaptionGroup>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Config(format!(
            "data fraction must lie in (0, 1], got {fraction}"
        )));
    }
    if fraction == 1.0 {
        return Ok(groups.to_vec());
    }
    let keep = (fraction * groups.len() as f64).floor() as usize;
    if keep == 0 {
        return Err(Error::Data(format!(
            "fraction {fraction} of {} images keeps none",
            groups.len()
        )));
    }
    let mut idx: Vec<usize> = (0..groups.len()).collect();
    idx.shuffle(&mut stream_rng(seed, &[1]));
    idx.truncate(keep);
    idx.sort_unstable();
    Ok(idx.into_iter().map(|i| groups[i].clone()).collect())
}

/// Deterministic RNG for one logical stream derived from a base seed.
pub(crate) fn stream_rng(seed: u64, path: &[u64]) -> ChaCha8Rng {
    // splitmix64 over the path components
    let mut state = seed;
    for &p in path {
        state = state
            .wrapping_add(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(p.wrapping_mul(0xBF58_476D_1CE4_E5B9));
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        state = z ^ (z >> 31);
    }
    ChaCha8Rng::seed_from_u64(state)
}

/// Writes sets as `set_index<TAB>image_id<TAB>sent_a<TAB>sent_b` lines.
pub fn write_sets_tsv<W: Write>(sets: &[SubTrainingSet], mut out: W) -> io::Result<()> {
    for set in sets {
        for p in &set.pairs {
            writeln!(
                out,
                "{}\t{}\t{}\t{}",
                set.index,
                tsv_field(&p.image_id),
                tsv_field(&p.sentence_a),
                tsv_field(&p.sentence_b)
            )?;
        }
    }
    Ok(())
}

fn tsv_field(s: &str) -> String {
    s.replace(['\t', '\n', '\r'], " ")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusStats {
    pub groups: usize,
    pub captions: usize,
    /// Groups with fewer than two captions.
    pub unpairable_groups: usize,
    pub set_sizes: Vec<usize>,
}

pub fn corpus_stats(groups: &[CaptionGroup], sets: &[SubTrainingSet]) -> CorpusStats {
    CorpusStats {
        groups: groups.len(),
        captions: groups.iter().map(|g| g.captions.len()).sum(),
        unpairable_groups: groups.iter().filter(|g| g.captions.len() < 2).count(),
        set_sizes: sets.iter().map(SubTrainingSet::len).collect(),
    }
}

/// Aligned input/paraphrase vectors for one mini-batch. Row `k` of `inputs`
/// and row `k` of `paraphrases` come from the same image.
#[derive(Debug, Clone, PartialEq)]
pub struct ParaphraseBatch<F> {
    pub inputs: Array2<F>,
    pub paraphrases: Array2<F>,
    pub image_ids: Vec<String>,
}

impl<F: Scalar> ParaphraseBatch<F> {
    /// Builds a batch from row-aligned matrices, checking shapes and norms.
    pub fn new(inputs: Array2<F>, paraphrases: Array2<F>, image_ids: Vec<String>) -> Result<Self> {
        if inputs.dim() != paraphrases.dim() {
            return Err(Error::Data(format!(
                "input shape {:?} differs from paraphrase shape {:?}",
                inputs.dim(),
                paraphrases.dim()
            )));
        }
        if inputs.nrows() == 0 {
            return Err(Error::Data("empty batch".into()));
        }
        if image_ids.len() != inputs.nrows() {
            return Err(Error::Data("one image id per row required".into()));
        }
        for (side, m) in [("input", &inputs), ("paraphrase", &paraphrases)] {
            for (row, r) in m.axis_iter(Axis(0)).enumerate() {
                if !(r.dot(&r) > F::zero()) {
                    return Err(Error::DegenerateVector { side, row });
                }
            }
        }
        Ok(ParaphraseBatch {
            inputs,
            paraphrases,
            image_ids,
        })
    }

    /// Unlabelled batch; image ids are the row indices.
    pub fn from_rows(inputs: Array2<F>, paraphrases: Array2<F>) -> Result<Self> {
        let ids = (0..inputs.nrows()).map(|i| i.to_string()).collect();
        Self::new(inputs, paraphrases, ids)
    }

    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.inputs.ncols()
    }
}

/// A sub-training set with both sides of every pair embedded.
#[derive(Debug, Clone)]
pub struct EmbeddedSet<F> {
    pub index: usize,
    pub inputs: Array2<F>,
    pub paraphrases: Array2<F>,
    pub image_ids: Vec<String>,
    /// Pairs dropped because a side had no known token or a zero vector.
    pub dropped: usize,
}

impl<F: Scalar> EmbeddedSet<F> {
    pub fn len(&self) -> usize {
        self.image_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.image_ids.is_empty()
    }

    /// Shuffled batches over this set, borrowing it.
    pub fn batches(&self, batch_size: usize, seed: u64) -> Result<BatchStream<F, &Self>> {
        BatchStream::new(self, batch_size, seed)
    }
}

/// Embeds both sentences of every pair; unembeddable pairs are counted and
/// skipped. An empty result is an error.
pub fn embed_set<F, E>(set: &SubTrainingSet, embedder: &E) -> Result<EmbeddedSet<F>>
where
    F: Scalar,
    E: SentenceEmbedder<F> + ?Sized,
{
    let d = embedder.dim();
    let mut inputs = Vec::with_capacity(set.len() * d);
    let mut paraphrases = Vec::with_capacity(set.len() * d);
    let mut image_ids = Vec::with_capacity(set.len());
    let mut dropped = 0;
    for pair in &set.pairs {
        let (Ok(a), Ok(b)) = (
            embedder.embed(&pair.sentence_a),
            embedder.embed(&pair.sentence_b),
        ) else {
            dropped += 1;
            continue;
        };
        let nonzero = |v: &ndarray::Array1<F>| v.dot(v) > F::zero();
        if !nonzero(&a.values) || !nonzero(&b.values) {
            dropped += 1;
            continue;
        }
        inputs.extend(a.values.iter().copied());
        paraphrases.extend(b.values.iter().copied());
        image_ids.push(pair.image_id.clone());
    }
    if image_ids.is_empty() {
        return Err(Error::Data(format!(
            "sub-training set {} has no embeddable pairs ({dropped} dropped)",
            set.index
        )));
    }
    let rows = image_ids.len();
    Ok(EmbeddedSet {
        index: set.index,
        inputs: Array2::from_shape_vec((rows, d), inputs).expect("row-major fill"),
        paraphrases: Array2::from_shape_vec((rows, d), paraphrases).expect("row-major fill"),
        image_ids,
        dropped,
    })
}

/// Embeds `set` and returns an owning stream of shuffled batches.
pub fn batches<F, E>(
    set: &SubTrainingSet,
    embedder: &E,
    batch_size: usize,
    seed: u64,
) -> Result<BatchStream<F>>
where
    F: Scalar,
    E: SentenceEmbedder<F> + ?Sized,
{
    BatchStream::new(embed_set(set, embedder)?, batch_size, seed)
}

/// Iterator of mini-batches over an embedded set in a seeded random order.
/// The last batch may be shorter than `batch_size`.
#[derive(Debug)]
pub struct BatchStream<F, S = EmbeddedSet<F>> {
    set: S,
    order: Vec<usize>,
    batch_size: usize,
    cursor: usize,
    _scalar: std::marker::PhantomData<F>,
}

impl<F: Scalar, S: Borrow<EmbeddedSet<F>>> BatchStream<F, S> {
    fn new(set: S, batch_size: usize, seed: u64) -> Result<Self> {
        if batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        let n = set.borrow().len();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        Ok(BatchStream {
            set,
            order,
            batch_size,
            cursor: 0,
            _scalar: std::marker::PhantomData,
        })
    }

    /// Pairs dropped while embedding the underlying set.
    pub fn dropped(&self) -> usize {
        self.set.borrow().dropped
    }

    pub fn num_batches(&self) -> usize {
        self.order.len().div_ceil(self.batch_size)
    }
}

impl<F: Scalar, S: Borrow<EmbeddedSet<F>>> Iterator for BatchStream<F, S> {
    type Item = ParaphraseBatch<F>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.cursor >= self.order.len() {
            return None;
        }
        let end = (self.cursor + self.batch_size).min(self.order.len());
        let rows = &self.order[self.cursor..end];
        self.cursor = end;
        let set = self.set.borrow();
        Some(ParaphraseBatch {
            inputs: set.inputs.select(Axis(0), rows),
            paraphrases: set.paraphrases.select(Axis(0), rows),
            image_ids: rows.iter().map(|&r| set.image_ids[r].clone()).collect(),
        })
    }
}
