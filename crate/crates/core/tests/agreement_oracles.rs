use std::collections::BTreeMap;

use chronoeval::anachronism::fleiss_kappa;
use chronoeval::demographics::{cohen_kappa, cross_classifier_agreement, merge_asian};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// Fleiss' kappa from explicit rater pairs: observed agreement is the share of
// agreeing ordered pairs per item, chance agreement squares the pooled
// category shares.
fn fleiss_pairs(ratings: &[Vec<usize>]) -> f64 {
    let mut p_items = 0.0;
    let mut pooled: BTreeMap<usize, f64> = BTreeMap::new();
    let mut total = 0.0;
    for item in ratings {
        let n = item.len();
        let mut agree = 0usize;
        for i in 0..n {
            for j in 0..n {
                if i != j && item[i] == item[j] {
                    agree += 1;
                }
            }
        }
        p_items += agree as f64 / (n * (n - 1)) as f64;
        for &c in item {
            *pooled.entry(c).or_default() += 1.0;
            total += 1.0;
        }
    }
    let p_bar = p_items / ratings.len() as f64;
    let p_e: f64 = pooled.values().map(|c| (c / total).powi(2)).sum();
    (p_bar - p_e) / (1.0 - p_e)
}

fn to_counts(ratings: &[Vec<usize>], k: usize) -> Vec<Vec<usize>> {
    ratings
        .iter()
        .map(|item| {
            let mut row = vec![0; k];
            item.iter().for_each(|&c| row[c] += 1);
            row
        })
        .collect()
}

#[test]
fn fleiss_matches_pairwise_definition() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..50 {
        let items = rng.random_range(5..40);
        let ratings: Vec<Vec<usize>> = (0..items).map(|_| (0..3).map(|_| rng.random_range(0..2)).collect()).collect();
        let counts = to_counts(&ratings, 2);
        let (Some(k), expected) = (fleiss_kappa::<f64>(&counts), fleiss_pairs(&ratings)) else {
            continue;
        };
        assert!((k - expected).abs() < 1e-12, "{k} vs {expected}");
    }
}

#[test]
fn fleiss_fixed_matrix() {
    let ratings = vec![vec![0, 0, 0], vec![0, 0, 1], vec![1, 1, 1], vec![0, 1, 1], vec![1, 1, 1]];
    let k: f64 = fleiss_kappa(&to_counts(&ratings, 2)).unwrap();
    assert!((k - fleiss_pairs(&ratings)).abs() < 1e-12);
}

#[test]
fn cohen_two_by_two() {
    // 20 yes/yes, 5 yes/no, 10 no/yes, 15 no/no.
    let mut pairs = Vec::new();
    pairs.extend(vec![(1, 1); 20]);
    pairs.extend(vec![(1, 0); 5]);
    pairs.extend(vec![(0, 1); 10]);
    pairs.extend(vec![(0, 0); 15]);
    let p_o = 35.0 / 50.0;
    let p_e = (25.0 / 50.0) * (30.0 / 50.0) + (25.0 / 50.0) * (20.0 / 50.0);
    let expected = (p_o - p_e) / (1.0 - p_e);
    let k: f64 = cohen_kappa(&pairs).unwrap();
    assert!((k - expected).abs() < 1e-12);
}

#[test]
fn cohen_identical_is_one() {
    let pairs: Vec<(&str, &str)> = ["a", "b", "c", "a"].iter().map(|&l| (l, l)).collect();
    assert_eq!(cohen_kappa::<f64, _>(&pairs), Some(1.0));
}

#[test]
fn independent_labels_give_kappa_near_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let pairs: Vec<(u8, u8)> = (0..20_000).map(|_| (rng.random_range(0..4), rng.random_range(0..4))).collect();
    let k: f64 = cohen_kappa(&pairs).unwrap();
    assert!(k.abs() < 0.02, "{k}");
}

#[test]
fn asian_merge_happens_before_kappa() {
    let pairs: Vec<(String, String)> = [("EastAsian", "SoutheastAsian"), ("White", "White"), ("Black", "Black")]
        .iter()
        .map(|(a, b)| (a.to_string(), b.to_string()))
        .collect();
    let raw = cross_classifier_agreement(&pairs, &BTreeMap::new()).unwrap();
    assert!(raw.percent < 1.0);
    let merged = cross_classifier_agreement(&pairs, &merge_asian()).unwrap();
    assert_eq!(merged.percent, 1.0);
    assert_eq!(merged.cohen_kappa, Some(1.0));
    assert!(merged.per_class.contains_key("Asian"));
    assert!(!merged.per_class.contains_key("EastAsian"));
}
