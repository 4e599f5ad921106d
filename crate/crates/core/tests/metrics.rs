use ged_aes::metrics::{qwk, significance_test, spearman};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Kappa from pairwise disagreements: observed pairs (i, i) against all
/// cross pairs (i, j), which is the chance-agreement expectation.
fn qwk_oracle(p: &[i64], g: &[i64], min: i64, max: i64) -> Option<f64> {
    let n = p.len() as f64;
    let span = ((max - min) * (max - min)) as f64;
    let w = |a: i64, b: i64| ((a - b) * (a - b)) as f64 / span;
    let observed: f64 = p.iter().zip(g).map(|(&a, &b)| w(a, b)).sum::<f64>() / n;
    let mut expected = 0.0;
    for &a in p {
        for &b in g {
            expected += w(a, b);
        }
    }
    expected /= n * n;
    (expected != 0.0).then(|| 1.0 - observed / expected)
}

fn rank_by_counting(v: &[f64]) -> Vec<f64> {
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let below = v.iter().filter(|&&y| y < x).count() as f64;
            let tied = v
                .iter()
                .enumerate()
                .filter(|&(j, &y)| j != i && y == x)
                .count() as f64;
            1.0 + below + tied / 2.0
        })
        .collect()
}

fn spearman_oracle(p: &[f64], g: &[f64]) -> Option<f64> {
    let (r, s) = (rank_by_counting(p), rank_by_counting(g));
    let pair = |a: &[f64], b: &[f64]| {
        let mut acc = 0.0;
        for i in 0..a.len() {
            for j in 0..a.len() {
                acc += (a[i] - a[j]) * (b[i] - b[j]);
            }
        }
        acc
    };
    let (rs, rr, ss) = (pair(&r, &s), pair(&r, &r), pair(&s, &s));
    (rr != 0.0 && ss != 0.0).then(|| rs / (rr * ss).sqrt())
}

#[test]
fn qwk_matches_pairwise_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let mut checked = 0;
    for _ in 0..100 {
        let n = rng.gen_range(2..=30);
        // Narrow ranges sometimes, to produce ties and degenerate cases.
        let hi = if rng.gen_bool(0.3) {
            rng.gen_range(1..=4)
        } else {
            20
        };
        let p: Vec<i64> = (0..n).map(|_| rng.gen_range(1..=hi)).collect();
        let g: Vec<i64> = (0..n).map(|_| rng.gen_range(1..=hi)).collect();
        match (qwk(&p, &g, 1, 20).ok(), qwk_oracle(&p, &g, 1, 20)) {
            (Some(a), Some(b)) => {
                assert!((a - b).abs() < 1e-10, "{a} vs {b} for {p:?} {g:?}");
                checked += 1;
            }
            (None, None) => {}
            other => panic!("definedness differs: {other:?} for {p:?} {g:?}"),
        }
    }
    assert!(checked > 80);
}

#[test]
fn spearman_matches_counting_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut checked = 0;
    for _ in 0..100 {
        let n = rng.gen_range(2..=30);
        let p: Vec<f64> = if rng.gen_bool(0.5) {
            (0..n).map(|_| rng.gen_range(1.0..20.0)).collect()
        } else {
            (0..n).map(|_| rng.gen_range(1..=20) as f64).collect()
        };
        let g: Vec<f64> = (0..n).map(|_| rng.gen_range(1..=20) as f64).collect();
        match (spearman(&p, &g).ok(), spearman_oracle(&p, &g)) {
            (Some(a), Some(b)) => {
                assert!((a - b).abs() < 1e-10, "{a} vs {b}");
                checked += 1;
            }
            (None, None) => {}
            other => panic!("definedness differs: {other:?}"),
        }
    }
    assert!(checked > 80);
}

#[test]
fn perfect_versus_wrong_system_is_significant() {
    let gold = vec![1u8; 10];
    let good = vec![1u8; 10];
    let bad = vec![0u8; 10];
    let acc = |s: &[u8], g: &[u8]| {
        s.iter().zip(g).filter(|(a, b)| a == b).count() as f64 / g.len() as f64
    };
    let p = significance_test(acc, &good, &bad, &gold, 10_000, 7).unwrap();
    assert!(p < 0.01, "p = {p}");
    let again = significance_test(acc, &good, &bad, &gold, 10_000, 7).unwrap();
    assert_eq!(p, again);
}
