use std::sync::Arc;

use lasserre_core::relaxation::{MomentIndex, MomentMatrix, Tolerances};
use lasserre_core::Error;
use proptest::prelude::*;

fn max_abs_diff(a: &MomentMatrix, b: &MomentMatrix) -> f64 {
    (a.entries() - b.entries()).abs().max()
}

/// `(n, k, r, labels)` with `r <= n`.
fn integral_case() -> impl Strategy<Value = (usize, usize, usize, Vec<usize>)> {
    (1usize..=6, 2usize..=3)
        .prop_flat_map(|(n, k)| (Just(n), Just(k), 1..=n.min(3), prop::collection::vec(0..k, n)))
}

/// A distribution supported on a few random assignments.
fn mixture_case() -> impl Strategy<Value = (usize, usize, usize, Vec<(Vec<usize>, f64)>)> {
    (2usize..=5, 2usize..=3).prop_flat_map(|(n, k)| {
        (
            Just(n),
            Just(k),
            1..=n.min(3),
            prop::collection::vec((prop::collection::vec(0..k, n), 0.05f64..1.0), 1..=4),
        )
            .prop_map(|(n, k, r, support)| {
                let total: f64 = support.iter().map(|s| s.1).sum();
                (n, k, r, support.into_iter().map(|(x, w)| (x, w / total)).collect())
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn integral_moments_validate((n, k, r, labels) in integral_case()) {
        let index = Arc::new(MomentIndex::new(n, k, r).unwrap());
        let m = MomentMatrix::from_assignment(index, &labels).unwrap();
        let report = m.validate(&Tolerances::default());
        prop_assert!(report.is_valid(), "{report}");
    }

    #[test]
    fn conditioning_integral_moments_drops_a_level((n, k, r, labels) in integral_case(), pick in 0usize..6) {
        let var = pick % n;
        let index = Arc::new(MomentIndex::new(n, k, r).unwrap());
        let m = MomentMatrix::from_assignment(index, &labels).unwrap();
        let cond = m.condition(var, labels[var], 1e-8).unwrap();
        let lower = Arc::new(MomentIndex::new(n, k, r - 1).unwrap());
        let expect = MomentMatrix::from_assignment(lower, &labels).unwrap();
        prop_assert!(max_abs_diff(&cond, &expect) < 1e-12);
        let other = (labels[var] + 1) % k;
        let is_near_zero = matches!(m.condition(var, other, 1e-8), Err(Error::NearZeroProbability { .. }));
        prop_assert!(is_near_zero);
    }

    #[test]
    fn law_of_total_probability((n, k, r, support) in mixture_case(), pick in 0usize..5) {
        let var = pick % n;
        let index = Arc::new(MomentIndex::new(n, k, r).unwrap());
        let m = MomentMatrix::from_distribution(index, &support).unwrap();
        prop_assert!(m.validate(&Tolerances::default()).is_valid());
        let restricted = m.restrict(r - 1).unwrap();
        let marginal = m.raw_marginal(var).unwrap();
        let mut total = restricted.entries() * 0.0;
        for (label, &p) in marginal.iter().enumerate() {
            if p > 1e-8 {
                total += m.condition(var, label, 1e-8).unwrap().entries() * p;
            }
        }
        prop_assert!((total - restricted.entries()).abs().max() < 1e-10);
    }

    #[test]
    fn conditioning_matches_conditional_distribution((n, k, r, support) in mixture_case(), pick in 0usize..5) {
        let var = pick % n;
        let label = support[0].0[var];
        let index = Arc::new(MomentIndex::new(n, k, r).unwrap());
        let m = MomentMatrix::from_distribution(index, &support).unwrap();
        let p: f64 = support.iter().filter(|(x, _)| x[var] == label).map(|s| s.1).sum();
        let conditional: Vec<(Vec<usize>, f64)> = support
            .iter()
            .filter(|(x, _)| x[var] == label)
            .map(|(x, w)| (x.clone(), w / p))
            .collect();
        let lower = Arc::new(MomentIndex::new(n, k, r - 1).unwrap());
        let expect = MomentMatrix::from_distribution(lower, &conditional).unwrap();
        let cond = m.condition(var, label, 1e-8).unwrap();
        prop_assert!(max_abs_diff(&cond, &expect) < 1e-10);
        let report = cond.validate(&Tolerances::default());
        prop_assert!(report.is_valid(), "{report}");
    }

    #[test]
    fn marginals_are_distributions((n, k, r, support) in mixture_case()) {
        let index = Arc::new(MomentIndex::new(n, k, r).unwrap());
        let m = MomentMatrix::from_distribution(index, &support).unwrap();
        for v in 0..n {
            let p = m.marginal(v, &Tolerances::default()).unwrap();
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(p.iter().all(|&x| (0.0..=1.0).contains(&x)));
        }
    }
}

#[test]
fn restricting_is_a_prefix() {
    let index = Arc::new(MomentIndex::new(4, 2, 2).unwrap());
    let m = MomentMatrix::from_distribution(
        index,
        &[(vec![0, 1, 1, 0], 0.25), (vec![1, 1, 0, 0], 0.75)],
    )
    .unwrap();
    let lower = m.restrict(1).unwrap();
    let d = lower.dim();
    assert_eq!(d, 9);
    assert_eq!(lower.entries(), &m.entries().view((0, 0), (d, d)).into_owned());
}
