mod common;

use std::collections::HashSet;

use common::*;
use ndarray::{Array1, Array2};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sentrefine::corpus::{CaptionGroup, EmbeddedSet};
use sentrefine::embeddings::embed_sentence;
use sentrefine::eval::{average_ranks, cosine, pearson, spearman};
use sentrefine::trainer::*;
use sentrefine::{ParaphraseBatch64, WordVectorTable64};

const WORDS: usize = 12;
const D: usize = 6;

fn table(seed: u64) -> WordVectorTable64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vectors = random_matrix(&mut rng, WORDS, D);
    WordVectorTable64::from_entries(D, (0..WORDS).map(|i| (word(i), vectors.row(i).to_vec())))
        .unwrap()
}

fn sentence(ids: &[usize]) -> String {
    ids.iter().map(|&i| word(i)).collect::<Vec<_>>().join(" ")
}

fn batch(seed: u64, n: usize, d: usize) -> ParaphraseBatch64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inputs = random_matrix(&mut rng, n, d);
    let paraphrases = &inputs + &random_matrix(&mut rng, n, d);
    ParaphraseBatch64::from_rows(inputs, paraphrases).unwrap()
}

fn matrix(seed: u64, d: usize) -> TransitionMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    TransitionMatrix::from_weights(random_matrix(&mut rng, d, d), MatrixMeta::default()).unwrap()
}

fn series(len: std::ops::Range<usize>) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    len.prop_flat_map(|n| {
        (
            prop::collection::vec(-100.0f64..100.0, n),
            prop::collection::vec(-100.0f64..100.0, n),
        )
    })
    .prop_filter("non-constant", |(x, y)| {
        x.iter().any(|&v| v != x[0]) && y.iter().any(|&v| v != y[0])
    })
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn embedding_ignores_word_order(seed in any::<u64>(), ids in prop::collection::vec(0..WORDS, 1..15)) {
        let t = table(seed);
        let a = embed_sentence(&t, &sentence(&ids)).unwrap();
        let mut rev = ids.clone();
        rev.reverse();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let b = embed_sentence(&t, &sentence(&rev)).unwrap();
        let c = embed_sentence(&t, &sentence(&shuffled(&mut rng, &ids))).unwrap();
        prop_assert_eq!(&a.values, &b.values);
        prop_assert_eq!(&a.values, &c.values);
    }

    #[test]
    fn embedding_is_the_token_mean(seed in any::<u64>(), ids in prop::collection::vec(0..WORDS, 1..15), junk in 0usize..4) {
        let t = table(seed);
        let mut text = sentence(&ids);
        for j in 0..junk {
            text.push_str(&format!(" unknown{j}"));
        }
        let v = embed_sentence(&t, &text).unwrap();
        prop_assert_eq!(v.token_count, ids.len());
        prop_assert_eq!(v.oov_count, junk);
        for k in 0..D {
            let want = ids.iter().map(|&i| t.get(&word(i)).unwrap()[k]).sum::<f64>() / ids.len() as f64;
            prop_assert!((v.values[k] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn single_token_embeds_to_its_vector(seed in any::<u64>(), i in 0..WORDS) {
        let t = table(seed);
        let v = embed_sentence(&t, &format!("  {}. ", word(i).to_uppercase())).unwrap();
        prop_assert_eq!(v.values, t.get(&word(i)).unwrap().to_owned());
    }

    #[test]
    fn pearson_is_affine_invariant((x, y) in series(3..40), a in 0.1f64..10.0, b in -50.0f64..50.0) {
        let r = pearson(&x, &y).unwrap();
        let x2: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        prop_assert!((pearson(&x2, &y).unwrap() - r).abs() < 1e-9);
        prop_assert!((pearson(&y, &x).unwrap() - r).abs() < 1e-12);
        prop_assert!(r.abs() <= 1.0 + 1e-12);
    }

    #[test]
    fn spearman_is_pearson_of_ranks((x, y) in series(3..40)) {
        let direct = pearson(&average_ranks(&x), &average_ranks(&y)).unwrap();
        prop_assert!((spearman(&x, &y).unwrap() - direct).abs() < 1e-12);
    }

    #[test]
    fn cosine_symmetric_and_scale_free(
        u in prop::collection::vec(-5.0f64..5.0, D),
        v in prop::collection::vec(-5.0f64..5.0, D),
        c in 0.01f64..100.0,
    ) {
        let (u, v) = (Array1::from(u), Array1::from(v));
        prop_assume!(u.dot(&u) > 1e-6 && v.dot(&v) > 1e-6);
        let a = cosine(u.view(), v.view()).unwrap();
        prop_assert_eq!(a, cosine(v.view(), u.view()).unwrap());
        let scaled = &u * c;
        prop_assert!((cosine(scaled.view(), v.view()).unwrap() - a).abs() < 1e-12);
        prop_assert!(a.abs() <= 1.0 + 1e-12);
    }

    #[test]
    fn cosine_loss_is_bounded_and_assembled(seed in any::<u64>(), n in 1usize..10, lambda in 0.0f64..=1.0) {
        let b = batch(seed, n, D);
        let w = matrix(seed ^ 7, D);
        let (ti, tp) = transform_batch(&w, &b).unwrap();
        let s = build_similarity_matrix(&ti, &tp, &b, NormalizationMode::CosineTransformed).unwrap();
        prop_assert!(s.normalized.iter().all(|x| (-1.0 - 1e-9..=1.0 + 1e-9).contains(x)));
        let l = compute_loss(&s, lambda).unwrap();
        prop_assert!((0.0..=2.0 + 1e-9).contains(&l.diagonal));
        prop_assert!((0.0..=1.0 + 1e-9).contains(&l.non_diagonal));
        prop_assert!((l.total - (lambda * l.non_diagonal + (1.0 - lambda) * l.diagonal)).abs() < 1e-15);
        if n == 1 {
            prop_assert_eq!(l.non_diagonal, 0.0);
        }
    }

    #[test]
    fn similarity_entries_are_refined_cosines(seed in any::<u64>(), n in 1usize..8) {
        let b = batch(seed, n, D);
        let w = matrix(seed ^ 3, D);
        let (ti, tp) = transform_batch(&w, &b).unwrap();
        let s = build_similarity_matrix(&ti, &tp, &b, NormalizationMode::CosineTransformed).unwrap();
        for j in 0..n {
            let rj = refine_vector(&w, b.inputs.row(j)).unwrap();
            for k in 0..n {
                let rk = refine_vector(&w, b.paraphrases.row(k)).unwrap();
                let c = cosine(rj.view(), rk.view()).unwrap();
                prop_assert!((s.normalized[[j, k]] - c).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn identity_fixed_point_has_zero_gradient_on_diagonal_batches(n in 2usize..6) {
        // Orthonormal inputs paired with themselves: S = I, every kink sits at zero.
        let eye = Array2::<f64>::eye(n);
        let b = ParaphraseBatch64::from_rows(eye.clone(), eye).unwrap();
        let (loss, grad) = loss_gradient(&TransitionMatrix::identity(n), &b, 0.7, NormalizationMode::CosineTransformed).unwrap();
        prop_assert_eq!(loss.total, 0.0);
        prop_assert!(grad.iter().all(|g| *g == 0.0));
    }

    #[test]
    fn batches_partition_the_set(rows in 1usize..300, size in 1usize..64, seed in any::<u64>()) {
        let set = EmbeddedSet::<f64> {
            index: 0,
            inputs: Array2::from_shape_fn((rows, 2), |(r, c)| (r * 2 + c) as f64 + 1.0),
            paraphrases: Array2::from_elem((rows, 2), 1.0),
            image_ids: (0..rows).map(|r| r.to_string()).collect(),
            dropped: 0,
        };
        let stream = set.batches(size, seed).unwrap();
        prop_assert_eq!(stream.num_batches(), rows.div_ceil(size));
        let mut seen = HashSet::new();
        for (i, b) in stream.enumerate() {
            prop_assert!(b.len() == size || i == rows.div_ceil(size) - 1);
            for id in &b.image_ids {
                prop_assert!(seen.insert(id.clone()));
            }
        }
        prop_assert_eq!(seen.len(), rows);
    }

    #[test]
    fn caption_groups_dedup_normalized_text(extra in 0usize..4) {
        let mut caps: Vec<String> = (0..3).map(|i| format!("a dog {i}")).collect();
        for i in 0..extra {
            caps.push(format!("  a   dog {} ", i % 3));
        }
        prop_assert_eq!(CaptionGroup::new("x", caps).captions.len(), 3);
    }
}
