mod common;

use std::collections::HashMap;

use decomp_core::enumeration::{count_decompositions, enumerate_all, sample_uniform};
use num_traits::ToPrimitive;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn totals_equal_table_sums() {
    for n in 1..6 {
        for m in 2..6 {
            let c = count_decompositions(n, m).unwrap();
            let sum: num_bigint::BigUint = c.per_r_k.iter().map(|e| e.count.clone()).sum();
            assert_eq!(sum, c.total, "({n},{m})");
        }
    }
}

#[test]
fn larger_counts() {
    let total = |n, m| count_decompositions(n, m).unwrap().total.to_u64().unwrap();
    assert_eq!(total(4, 4), 19388);
    assert_eq!(total(4, 4), common::brute_force_decompositions(4, 4).len() as u64);
}

#[test]
fn two_by_three_sampling_is_uniform() {
    let index: HashMap<Vec<u8>, usize> = enumerate_all(2, 3, 1000)
        .unwrap()
        .enumerate()
        .map(|(i, t)| (t.key().unwrap().to_bytes(), i))
        .collect();
    assert_eq!(index.len(), 72);
    let draws = 72 * 100;
    let mut counts = vec![0usize; 72];
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..draws {
        let t = sample_uniform(2, 3, &mut rng).unwrap();
        counts[index[&t.key().unwrap().to_bytes()]] += 1;
    }
    let expected = draws as f64 / 72.0;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    // 0.999 quantile of chi-square with 71 degrees of freedom.
    assert!(chi2 < 112.3, "chi-square {chi2}");
}

#[test]
fn sampling_is_seed_deterministic() {
    let draw = |seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..50).map(|_| sample_uniform(3, 3, &mut rng).unwrap().to_string()).collect::<Vec<_>>()
    };
    assert_eq!(draw(4), draw(4));
    assert_ne!(draw(4), draw(5));
}
