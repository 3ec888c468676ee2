//! Shared fixtures for integration and acceptance tests.
#![allow(dead_code)]

use ndarray::{Array2, Axis};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sentrefine::corpus::CaptionGroup;
use sentrefine::eval::cosine;
use sentrefine::trainer::{refine_vector, TransitionMatrix};
use sentrefine::{SentenceEmbedder, WordVectorTable64};

pub const VOCAB: usize = 50;
pub const DIM: usize = 20;
pub const IMAGES: usize = 200;
pub const TOPIC_WORDS: usize = 4;
pub const OFFSET_SCALE: f64 = 2.0;
pub const TOPIC_PROBABILITY: f64 = 0.9;

pub struct Synthetic {
    pub table: WordVectorTable64,
    pub groups: Vec<CaptionGroup>,
}

pub fn word(i: usize) -> String {
    format!("w{i:02}")
}

/// 200 images with 5 captions each over a 50-word vocabulary of random
/// 20-dimensional vectors. Every image owns a 4-word topic; a caption draws
/// 5-8 tokens, each from the topic with probability 0.9 and from the whole
/// vocabulary otherwise. Word vectors share a common offset (twice the
/// per-word noise range), so raw averages of unrelated captions are already
/// highly similar, as with real pre-trained vectors.
pub fn synthetic_corpus(seed: u64) -> Synthetic {
    synthetic_corpus_with(seed, OFFSET_SCALE, TOPIC_PROBABILITY, TOPIC_WORDS)
}

pub fn synthetic_corpus_with(
    seed: u64,
    offset_scale: f64,
    topic_p: f64,
    topic_words: usize,
) -> Synthetic {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let offset: Vec<f64> = (0..DIM)
        .map(|_| offset_scale * rng.random_range(-1.0..1.0))
        .collect();
    let entries: Vec<(String, Vec<f64>)> = (0..VOCAB)
        .map(|i| {
            let v = offset
                .iter()
                .map(|o| o + rng.random_range(-1.0..1.0))
                .collect();
            (word(i), v)
        })
        .collect();
    let table = WordVectorTable64::from_entries(DIM, entries).unwrap();

    let vocab: Vec<usize> = (0..VOCAB).collect();
    let groups = (0..IMAGES)
        .map(|img| {
            let topic: Vec<usize> = vocab
                .choose_multiple(&mut rng, topic_words)
                .copied()
                .collect();
            let mut captions: Vec<String> = Vec::new();
            while captions.len() < 5 {
                let len = rng.random_range(5..=8);
                let toks: Vec<String> = (0..len)
                    .map(|_| {
                        let w = if rng.random_bool(topic_p) {
                            *topic.choose(&mut rng).unwrap()
                        } else {
                            rng.random_range(0..VOCAB)
                        };
                        word(w)
                    })
                    .collect();
                let c = toks.join(" ");
                if !captions.contains(&c) {
                    captions.push(c);
                }
            }
            CaptionGroup::new(format!("img{img}"), captions)
        })
        .collect();
    Synthetic { table, groups }
}

fn vector(s: &Synthetic, w: Option<&TransitionMatrix<f64>>, text: &str) -> ndarray::Array1<f64> {
    let v = s.table.embed(text).unwrap().values;
    match w {
        Some(w) => refine_vector(w, v.view()).unwrap(),
        None => v,
    }
}

/// Mean cosine over same-image caption pairs minus mean cosine over the
/// first caption of every pair of distinct images.
pub fn separation(s: &Synthetic, w: Option<&TransitionMatrix<f64>>) -> f64 {
    let mut same = Vec::new();
    for g in &s.groups {
        let vs: Vec<_> = g.captions.iter().map(|c| vector(s, w, c)).collect();
        for a in 0..vs.len() {
            for b in a + 1..vs.len() {
                same.push(cosine(vs[a].view(), vs[b].view()).unwrap());
            }
        }
    }
    let firsts: Vec<_> = s
        .groups
        .iter()
        .map(|g| vector(s, w, &g.captions[0]))
        .collect();
    let mut cross = Vec::new();
    for a in 0..firsts.len() {
        for b in a + 1..firsts.len() {
            cross.push(cosine(firsts[a].view(), firsts[b].view()).unwrap());
        }
    }
    mean(&same) - mean(&cross)
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Random matrix with entries uniform on [-1, 1].
pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-1.0..1.0))
}

pub fn shuffled<T: Clone>(rng: &mut ChaCha8Rng, v: &[T]) -> Vec<T> {
    let mut out = v.to_vec();
    out.shuffle(rng);
    out
}

pub fn max_abs_row_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    (a - b)
        .map_axis(Axis(1), |r| r.iter().fold(0.0f64, |m, x| m.max(x.abs())))
        .iter()
        .fold(0.0, |m, &x| m.max(x))
}
