mod common;

use cadren_core::metrics::{ndcg_at_k, overlap_at_k, spearman, RankedList};
use common::{ndcg_ref, overlap_ref, spearman_ref};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Scores drawn from a small grid so ties are frequent.
fn random_case(rng: &mut ChaCha8Rng) -> (Vec<String>, Vec<f64>, Vec<f64>) {
    let n = rng.gen_range(2..40);
    let mut ids: Vec<String> = (0..n).map(|i| format!("x{i:03}")).collect();
    for i in (1..n).rev() {
        ids.swap(i, rng.gen_range(0..=i));
    }
    let grid = rng.gen_bool(0.5);
    let draw = |rng: &mut ChaCha8Rng| {
        if grid {
            rng.gen_range(0..5) as f64
        } else {
            rng.gen_range(0.0..3.0)
        }
    };
    let pred = (0..n).map(|_| draw(rng)).collect();
    let truth = (0..n).map(|_| draw(rng)).collect();
    (ids, pred, truth)
}

#[test]
fn ndcg_matches_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..1000 {
        let (ids, pred, truth) = random_case(&mut rng);
        let k = rng.gen_range(1..50);
        let got = ndcg_at_k(&RankedList::new(&ids, &pred), &truth, k).unwrap();
        assert!((got - ndcg_ref(&ids, &pred, &truth, k)).abs() <= 1e-9);
    }
}

#[test]
fn spearman_matches_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..1000 {
        let (_, pred, truth) = random_case(&mut rng);
        match (spearman(&pred, &truth), spearman_ref(&pred, &truth)) {
            (Ok(a), Some(b)) => assert!((a - b).abs() <= 1e-9),
            (Err(_), None) => {}
            (a, b) => panic!("disagree: {a:?} vs {b:?}"),
        }
    }
    assert_eq!(spearman(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap(), 0.8);
}

#[test]
fn overlap_matches_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..1000 {
        let (ids, pred, truth) = random_case(&mut rng);
        let gt = rng.gen_range(1..=ids.len());
        let k = rng.gen_range(1..4);
        let got = overlap_at_k(&RankedList::new(&ids, &pred), &truth, gt, k).unwrap();
        assert!((got - overlap_ref(&ids, &pred, &truth, gt, k)).abs() <= 1e-9);
    }
}

fn case() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (2usize..30).prop_flat_map(|n| (prop::collection::vec(0.0..5.0f64, n), prop::collection::vec(0.0..5.0f64, n)))
}

fn ids(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("n{i:02}")).collect()
}

proptest! {
    #[test]
    fn metric_ranges((pred, truth) in case(), k in 1usize..40, gt in 1usize..10) {
        let ids = ids(pred.len());
        let r = RankedList::new(&ids, &pred);
        let nd = ndcg_at_k(&r, &truth, k).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&nd));
        if let Ok(s) = spearman(&pred, &truth) {
            prop_assert!((-1.0..=1.0).contains(&s));
        }
        let ov = overlap_at_k(&r, &truth, gt.min(pred.len()), 2).unwrap();
        prop_assert!((0.0..=1.0).contains(&ov));
    }

    #[test]
    fn invariant_under_monotone_transform((pred, truth) in case(), k in 1usize..40) {
        let ids = ids(pred.len());
        let warped: Vec<f64> = pred.iter().map(|x| (3.0 * x).exp() + 7.0).collect();
        let a = RankedList::new(&ids, &pred);
        let b = RankedList::new(&ids, &warped);
        prop_assert_eq!(ndcg_at_k(&a, &truth, k).unwrap(), ndcg_at_k(&b, &truth, k).unwrap());
        prop_assert_eq!(overlap_at_k(&a, &truth, 1, 2).unwrap(), overlap_at_k(&b, &truth, 1, 2).unwrap());
        match (spearman(&pred, &truth), spearman(&warped, &truth)) {
            (Ok(x), Ok(y)) => prop_assert!((x - y).abs() <= 1e-12),
            (Err(_), Err(_)) => {}
            other => prop_assert!(false, "{:?}", other),
        }
    }

    #[test]
    fn truth_ranking_is_perfect((_, truth) in case(), k in 1usize..40) {
        let ids = ids(truth.len());
        let r = RankedList::new(&ids, &truth);
        let nd = ndcg_at_k(&r, &truth, k).unwrap();
        prop_assert!(nd == 0.0 || (nd - 1.0).abs() <= 1e-12);
        prop_assert_eq!(overlap_at_k(&r, &truth, 1, 2).unwrap(), 1.0);
    }
}
