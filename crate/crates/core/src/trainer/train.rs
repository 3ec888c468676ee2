use std::fmt::Write as _;
use std::io::{self, Write};

use rand::RngCore;

use super::matrix::{xavier_init, MatrixMeta, NormalizationMode, TransitionMatrix};
use super::objective::{check_lambda, loss_gradient, LossBreakdown};
use super::rmsprop::{RmsProp, RmsPropParams};
use crate::corpus::{
    build_sub_training_sets, embed_set, stream_rng, subsample_groups, CaptionGroup, EmbeddedSet,
    SetOptions, SubTrainingSet,
};
use crate::embeddings::SentenceEmbedder;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const DEFAULT_BATCH_SIZE: usize = 512;
pub const DEFAULT_OUTER_EPOCHS: usize = 5;
/// Trade-off weight used with GloVe vectors.
pub const GLOVE_LAMBDA: f64 = 0.7;
/// Trade-off weight used with word2vec vectors.
pub const WORD2VEC_LAMBDA: f64 = 0.9;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainerConfig {
    pub lambda: f64,
    pub batch_size: usize,
    pub outer_epochs: usize,
    pub optimizer: RmsPropParams,
    pub seed: u64,
    pub mode: NormalizationMode,
    /// Share of images kept before sub-training sets are built.
    pub data_fraction: f64,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        TrainerConfig {
            lambda: GLOVE_LAMBDA,
            batch_size: DEFAULT_BATCH_SIZE,
            outer_epochs: DEFAULT_OUTER_EPOCHS,
            optimizer: RmsPropParams::default(),
            seed: 0,
            mode: NormalizationMode::CosineTransformed,
            data_fraction: 1.0,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        check_lambda(self.lambda)?;
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if self.outer_epochs == 0 {
            return Err(Error::Config("outer_epochs must be positive".into()));
        }
        if !(self.data_fraction > 0.0 && self.data_fraction <= 1.0) {
            return Err(Error::Config(format!(
                "data_fraction must lie in (0, 1], got {}",
                self.data_fraction
            )));
        }
        self.optimizer.validate()
    }
}

/// One pass over one sub-training set.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    /// 1-based outer epoch.
    pub outer: usize,
    /// 1-based inner epoch counted across the whole run.
    pub inner: usize,
    pub set_index: usize,
    pub batches: usize,
    pub pairs: usize,
    /// Pair-weighted mean of the batch losses, measured before each update.
    /// `None` when the set had no pairs.
    pub loss: Option<LossBreakdown<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingLog {
    pub header: Vec<String>,
    pub records: Vec<EpochRecord>,
    pub dropped_pairs: usize,
}

impl TrainingLog {
    pub fn first_loss(&self) -> Option<LossBreakdown<f64>> {
        self.records.iter().find_map(|r| r.loss)
    }

    pub fn last_loss(&self) -> Option<LossBreakdown<f64>> {
        self.records.iter().rev().find_map(|r| r.loss)
    }

    /// `# key=value` header lines followed by one tab-separated row per
    /// inner epoch: `outer inner set_index batches diag_loss nondiag_loss total`.
    pub fn write_to<W: Write>(&self, mut out: W) -> io::Result<()> {
        for h in &self.header {
            writeln!(out, "# {h}")?;
        }
        writeln!(
            out,
            "outer\tinner\tset_index\tbatches\tdiag_loss\tnondiag_loss\ttotal"
        )?;
        for r in &self.records {
            let mut line = format!("{}\t{}\t{}\t{}", r.outer, r.inner, r.set_index, r.batches);
            match r.loss {
                Some(l) => {
                    let _ = write!(
                        line,
                        "\t{:.9}\t{:.9}\t{:.9}",
                        l.diagonal, l.non_diagonal, l.total
                    );
                }
                None => line.push_str("\t-\t-\t-"),
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<F> {
    pub matrix: TransitionMatrix<F>,
    pub log: TrainingLog,
}

/// Subsamples images by `config.data_fraction` and builds the sub-training sets.
pub fn prepare_sets(
    config: &TrainerConfig,
    groups: &[CaptionGroup],
    strict_five: bool,
) -> Result<Vec<SubTrainingSet>> {
    config.validate()?;
    let kept = subsample_groups(groups, config.data_fraction, config.seed)?;
    build_sub_training_sets(
        &kept,
        SetOptions {
            seed: config.seed,
            strict_five,
        },
    )
}

fn config_header(config: &TrainerConfig, dim: usize) -> Vec<String> {
    vec![
        format!("dim={dim}"),
        "init=xavier_uniform".into(),
        "optimizer=rmsprop".into(),
        format!("batch_size={}", config.batch_size),
        format!("outer_epochs={}", config.outer_epochs),
        format!("lambda={:?}", config.lambda),
        format!("learning_rate={:?}", config.optimizer.learning_rate),
        format!("rms_decay={:?}", config.optimizer.decay),
        format!("rms_epsilon={:?}", config.optimizer.epsilon),
        format!("seed={}", config.seed),
        format!("normalization={}", config.mode),
        format!("data_fraction={:?}", config.data_fraction),
    ]
}

/// Trains `W` from Xavier initialization.
///
/// Each outer epoch visits every sub-training set once, in index order; each
/// visit is one inner epoch of shuffled mini-batches with one RMSprop step
/// per batch.
pub fn train<F, E>(
    config: &TrainerConfig,
    sets: &[SubTrainingSet],
    embedder: &E,
) -> Result<TrainOutcome<F>>
where
    F: Scalar,
    E: SentenceEmbedder<F> + ?Sized,
{
    config.validate()?;
    let dim = embedder.dim();
    let mut embedded: Vec<Option<EmbeddedSet<F>>> = Vec::with_capacity(sets.len());
    let mut dropped = 0;
    for set in sets {
        if set.is_empty() {
            embedded.push(None);
            continue;
        }
        let e = embed_set(set, embedder)?;
        dropped += e.dropped;
        embedded.push(Some(e));
    }
    if embedded.iter().all(Option::is_none) {
        return Err(Error::Data("every sub-training set is empty".into()));
    }

    let mut matrix = xavier_init::<F>(dim, config.seed)?;
    let mut optimizer = RmsProp::new((dim, dim), config.optimizer)?;
    let mut log = TrainingLog {
        header: config_header(config, dim),
        records: Vec::new(),
        dropped_pairs: dropped,
    };
    let mut inner = 0;
    for outer in 1..=config.outer_epochs {
        for (set, slot) in sets.iter().zip(&embedded) {
            inner += 1;
            let mut record = EpochRecord {
                outer,
                inner,
                set_index: set.index,
                batches: 0,
                pairs: 0,
                loss: None,
            };
            if let Some(set) = slot {
                let shuffle_seed =
                    stream_rng(config.seed, &[2, outer as u64, set.index as u64]).next_u64();
                let (mut diag, mut off, mut total) = (0.0, 0.0, 0.0);
                for batch in set.batches(config.batch_size, shuffle_seed)? {
                    let (loss, grad) = loss_gradient(&matrix, &batch, config.lambda, config.mode)?;
                    optimizer.step(matrix.weights_mut(), &grad)?;
                    let n = batch.len() as f64;
                    let loss = loss.to_f64();
                    diag += n * loss.diagonal;
                    off += n * loss.non_diagonal;
                    total += n * loss.total;
                    record.batches += 1;
                    record.pairs += batch.len();
                }
                let n = record.pairs as f64;
                record.loss = Some(LossBreakdown {
                    diagonal: diag / n,
                    non_diagonal: off / n,
                    total: total / n,
                    lambda: config.lambda,
                });
            }
            log.records.push(record);
        }
    }
    if matrix.weights().iter().any(|w| !w.is_finite()) {
        return Err(Error::Data(
            "training diverged to non-finite weights".into(),
        ));
    }
    matrix.meta = MatrixMeta {
        lambda: config.lambda,
        seed: config.seed,
        epochs: config.outer_epochs,
        mode: config.mode,
    };
    Ok(TrainOutcome { matrix, log })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::TrainingPair;
    use crate::embeddings::WordVectorTable;

    fn table() -> WordVectorTable<f64> {
        let words = ["red", "blue", "green", "cat", "dog", "car", "tree", "sky"];
        WordVectorTable::from_entries(
            4,
            words.iter().enumerate().map(|(i, w)| {
                let x = i as f64;
                (
                    *w,
                    vec![1.0 + x.sin(), x.cos(), 0.3 * x - 1.0, (2.0 * x).sin() + 0.5],
                )
            }),
        )
        .unwrap()
    }

    fn toy_groups() -> Vec<CaptionGroup> {
        let words = ["red", "blue", "green", "cat", "dog", "car", "tree", "sky"];
        (0..12)
            .map(|g| {
                let caps = (0..5).map(|c| {
                    format!(
                        "{} {} {}",
                        words[g % 8],
                        words[(g + c) % 8],
                        words[(g * 3 + 1) % 8]
                    )
                });
                CaptionGroup::new(g.to_string(), caps)
            })
            .collect()
    }

    #[test]
    fn logs_one_record_per_inner_epoch() {
        let config = TrainerConfig {
            outer_epochs: 5,
            batch_size: 4,
            seed: 3,
            ..TrainerConfig::default()
        };
        let sets = prepare_sets(&config, &toy_groups(), false).unwrap();
        let out = train(&config, &sets, &table()).unwrap();
        assert_eq!(out.log.records.len(), 50);
        assert_eq!(out.log.records.last().unwrap().inner, 50);
        assert!(out.log.records.iter().all(|r| r.loss.is_some()));
        assert_eq!(out.matrix.meta.epochs, 5);
        assert!(out.log.header.iter().any(|h| h == "batch_size=4"));
    }

    #[test]
    fn empty_sets_are_logged_without_loss() {
        let groups = vec![CaptionGroup::new(
            "a",
            ["red cat".into(), "blue dog".into()],
        )];
        let sets = build_sub_training_sets(&groups, SetOptions::default()).unwrap();
        let config = TrainerConfig {
            outer_epochs: 1,
            ..TrainerConfig::default()
        };
        let out = train(&config, &sets, &table()).unwrap();
        assert_eq!(out.log.records.len(), 10);
        assert!(out.log.records[0].loss.is_some());
        assert!(out.log.records[1..]
            .iter()
            .all(|r| r.loss.is_none() && r.batches == 0));
    }

    #[test]
    fn unembeddable_set_is_error() {
        let sets = vec![SubTrainingSet {
            index: 0,
            pairs: vec![TrainingPair {
                image_id: "x".into(),
                sentence_a: "zzz".into(),
                sentence_b: "qqq".into(),
            }],
        }];
        assert!(train::<f64, _>(&TrainerConfig::default(), &sets, &table()).is_err());
    }

    #[test]
    fn config_validation() {
        let bad = [
            TrainerConfig {
                lambda: 1.1,
                ..Default::default()
            },
            TrainerConfig {
                batch_size: 0,
                ..Default::default()
            },
            TrainerConfig {
                outer_epochs: 0,
                ..Default::default()
            },
            TrainerConfig {
                data_fraction: 0.0,
                ..Default::default()
            },
            TrainerConfig {
                optimizer: RmsPropParams {
                    learning_rate: -1.0,
                    ..Default::default()
                },
                ..Default::default()
            },
        ];
        for c in bad {
            assert!(matches!(c.validate(), Err(Error::Config(_))), "{c:?}");
        }
        assert!(TrainerConfig::default().validate().is_ok());
    }

    #[test]
    fn log_format() {
        let log = TrainingLog {
            header: vec!["batch_size=512".into()],
            records: vec![
                EpochRecord {
                    outer: 1,
                    inner: 1,
                    set_index: 0,
                    batches: 2,
                    pairs: 600,
                    loss: Some(LossBreakdown::new(0.5, 0.25, 0.7)),
                },
                EpochRecord {
                    outer: 1,
                    inner: 2,
                    set_index: 1,
                    batches: 0,
                    pairs: 0,
                    loss: None,
                },
            ],
            dropped_pairs: 0,
        };
        let mut buf = Vec::new();
        log.write_to(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# batch_size=512");
        assert_eq!(
            lines[2],
            "1\t1\t0\t2\t0.500000000\t0.250000000\t0.325000000"
        );
        assert_eq!(lines[3], "1\t2\t1\t0\t-\t-\t-");
    }
}
