use std::sync::Arc;

use lasserre_core::embed::{best_rank_r_error, factorize, laplacian_spectrum, projection_error, SeedColumns};
use lasserre_core::linalg::project_psd;
use lasserre_core::relaxation::{MomentIndex, MomentMatrix};
use lasserre_core::seeds::{score, select_exhaustive, select_greedy, select_random, select_volume};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-1.0f64..1.0, rows * cols)
        .prop_map(move |v| DMatrix::from_vec(rows, cols, v))
}

/// `(columns, k)` with `k` columns per variable.
fn seed_columns() -> impl Strategy<Value = SeedColumns> {
    (2usize..=6, 2usize..=3, 3usize..=7)
        .prop_flat_map(|(rows, k, n)| (matrix(rows, n * k), Just(k)))
        .prop_map(|(m, k)| SeedColumns::from_matrix(m, k))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn projection_error_shrinks_as_seeds_grow(v in matrix(5, 8), order in Just((0..8).collect::<Vec<usize>>()).prop_shuffle()) {
        let mut prev = projection_error(&v, &[]);
        for s in 1..=order.len() {
            let e = projection_error(&v, &order[..s]);
            prop_assert!(e <= prev + 1e-10 * (1.0 + prev), "{} > {}", e, prev);
            prev = e;
        }
        prop_assert!(prev.abs() < 1e-12);
    }

    #[test]
    fn projection_error_dominates_best_rank(v in matrix(6, 7), seeds in prop::sample::subsequence((0..7).collect::<Vec<usize>>(), 0..=7)) {
        let e = projection_error(&v, &seeds);
        prop_assert!(e >= best_rank_r_error(&v, seeds.len()) - 1e-10);
    }

    #[test]
    fn selection_ordering(cols in seed_columns(), m_raw in 0usize..4) {
        let m = m_raw.min(cols.n());
        let ex = select_exhaustive(&cols, m).unwrap();
        let gr = select_greedy(&cols, m).unwrap();
        let slack = 1e-10 * (1.0 + cols.total_norm_sq());
        prop_assert!(ex.score <= gr.score + slack);
        prop_assert!(gr.score <= score(&cols, &[]) + slack);
        let k = cols.groups[0].len();
        prop_assert!(gr.score >= best_rank_r_error(&cols.matrix, m * k) - slack);
    }

    #[test]
    fn nested_runs_are_monotone(cols in seed_columns(), stream in any::<u64>()) {
        let slack = 1e-10 * (1.0 + cols.total_norm_sq());
        let mut prev = [f64::INFINITY; 3];
        for m in 0..=cols.n() {
            let scores = [
                select_greedy(&cols, m).unwrap().score,
                select_random(&cols, m, &mut ChaCha8Rng::seed_from_u64(stream)).unwrap().score,
                select_volume(&cols, m, &mut ChaCha8Rng::seed_from_u64(stream)).unwrap().score,
            ];
            for (s, p) in scores.iter().zip(&mut prev) {
                prop_assert!(*s <= *p + slack, "m = {}: {} > {}", m, s, p);
                *p = *s;
            }
        }
    }

    #[test]
    fn gram_round_trip(labels in prop::collection::vec(0usize..2, 3), mix in 0.0f64..1.0, noise in matrix(7, 7)) {
        // moments of a two-point mixture plus a symmetric perturbation
        let index = Arc::new(MomentIndex::new(3, 2, 1).unwrap());
        let other: Vec<usize> = labels.iter().map(|l| 1 - l).collect();
        let base = MomentMatrix::from_distribution(index.clone(), &[(labels, mix), (other, 1.0 - mix)]).unwrap();
        let sym = (&noise + noise.transpose()) * 0.05;
        let m = MomentMatrix::new(index, base.entries() + sym).unwrap();
        let emb = factorize(&m);
        let want = project_psd(m.entries());
        prop_assert!((emb.gram() - want).abs().max() < 1e-6);
    }

    #[test]
    fn laplacian_trace_identity(n in 1usize..=8, mask in any::<u64>()) {
        let mut edges = Vec::new();
        let mut bit = 0;
        for u in 0..n {
            for v in u + 1..n {
                if mask >> (bit % 64) & 1 == 1 {
                    edges.push((u, v, 1.0 + (bit % 3) as f64));
                }
                bit += 1;
            }
        }
        let mut touched = vec![false; n];
        for &(u, v, _) in &edges {
            touched[u] = true;
            touched[v] = true;
        }
        let isolated = touched.iter().filter(|t| !**t).count();
        let spec = laplacian_spectrum(n, &edges);
        let sum: f64 = spec.eigenvalues.iter().sum();
        prop_assert!((sum - (n - isolated) as f64).abs() < 1e-6);
    }
}

#[test]
fn greedy_beats_random_on_gaussian_embeddings() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut greedy, mut random) = (0.0, 0.0);
    for _ in 0..100 {
        let m = DMatrix::from_fn(6, 16, |_, _| StandardNormal.sample(&mut rng));
        let cols = SeedColumns::from_matrix(m, 2);
        greedy += select_greedy(&cols, 2).unwrap().score;
        random += select_random(&cols, 2, &mut rng).unwrap().score;
    }
    assert!(greedy <= random, "greedy {greedy} random {random}");
}
