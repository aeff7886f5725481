mod common;

use common::{corpus, dense_cos, pearson, sparse_cos, tfidf};
use margin_audit::embed::{embed_texts, load_embeddings, save_embeddings, EmbeddingMatrix, EmbeddingSource};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn projection_preserves_tfidf_geometry() {
    let texts = corpus(100, 1);
    let exact = tfidf(&texts, 5);
    let a = embed_texts(&texts, 64, 1, 5).unwrap();
    let b = embed_texts(&texts, 64, 2, 5).unwrap();
    let (mut ce, mut ca, mut cb) = (vec![], vec![], vec![]);
    for i in 0..100 {
        for j in i + 1..100 {
            ce.push(sparse_cos(&exact[i], &exact[j]));
            ca.push(dense_cos(&a, i, j));
            cb.push(dense_cos(&b, i, j));
        }
    }
    let (ra, rb, rab) = (pearson(&ca, &ce), pearson(&cb, &ce), pearson(&ca, &cb));
    assert!(ra > 0.5 && rb > 0.5 && rab > 0.5, "{ra} {rb} {rab}");
}

#[test]
fn rows_are_unit_norm_or_zero() {
    let mut texts = corpus(60, 4);
    texts.push(String::new());
    texts.push("zzzunseen".into());
    let m = embed_texts(&texts, 32, 9, 3).unwrap();
    for i in 0..m.n_rows() {
        let norm: f64 = m.row(i).iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt();
        if i >= 60 {
            assert_eq!(norm, 0.0);
        } else {
            assert!((norm - 1.0).abs() < 1e-9, "row {i}: {norm}");
        }
    }
}

#[test]
fn order_independent() {
    let texts = corpus(80, 6);
    let base = embed_texts(&texts, 16, 3, 2).unwrap();
    let mut perm: Vec<usize> = (0..80).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(0));
    let shuffled: Vec<String> = perm.iter().map(|&i| texts[i].clone()).collect();
    let m = embed_texts(&shuffled, 16, 3, 2).unwrap();
    for (j, &i) in perm.iter().enumerate() {
        assert_eq!(m.row(j), base.row(i));
    }
}

#[test]
fn builtin_round_trips_through_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("e.embd");
    let m = embed_texts(&corpus(50, 2), 64, 7, 5).unwrap();
    save_embeddings(&m, &path).unwrap();
    let back = load_embeddings(&path, 50).unwrap();
    assert_eq!(back.source(), EmbeddingSource::External);
    assert_eq!(back.data(), m.data());
    assert_eq!(std::fs::metadata(&path).unwrap().len(), 16 + 50 * 64 * 4);
    assert!(load_embeddings(&path, 49).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn random_matrix_round_trip(rows in 0usize..20, cols in 1usize..70, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<f32> = (0..rows * cols).map(|_| rng.random_range(-1e3f32..1e3)).collect();
        let m = EmbeddingMatrix::new(rows, cols, data, EmbeddingSource::External).unwrap();
        let back = EmbeddingMatrix::from_bytes(&m.to_bytes().unwrap(), rows).unwrap();
        prop_assert_eq!(
            back.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            m.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }
}
