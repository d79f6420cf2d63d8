use std::sync::Arc;

use lasserre_core::pipeline::{round_once, run_pipeline, PipelineConfig};
use lasserre_core::problems::{encode, evaluate, generate, repair, Family, ProblemKind};
use lasserre_core::relaxation::{
    build_sdp, AssignmentIndex, LabelingInstance, MomentIndex, MomentMatrix, Term,
};
use lasserre_core::rounding::{
    expected_value_independent, round_independent, round_threshold, sample_seed_assignment,
    ConditionalTable, RoundingMode,
};
use lasserre_core::sdpsolve::{solve, SolverSettings};
use lasserre_core::seeds::SeedStrategy;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn seed_frequencies_match_joint_moments() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let (n, k) = (3, 3);
    let support: Vec<(Vec<usize>, f64)> = (0..5)
        .map(|_| ((0..n).map(|_| rng.random_range(0..k)).collect(), rng.random::<f64>() + 0.1))
        .collect();
    let total: f64 = support.iter().map(|s| s.1).sum();
    let support: Vec<_> = support.into_iter().map(|(x, w)| (x, w / total)).collect();
    let index = Arc::new(MomentIndex::new(n, k, n).unwrap());
    let m = MomentMatrix::from_distribution(index, &support).unwrap();

    let seeds = [2, 0];
    let trials = 5000;
    let mut counts = vec![0usize; k * k];
    for _ in 0..trials {
        let (assignment, _) = sample_seed_assignment(&m, &seeds, 1e-8, &mut rng).unwrap();
        counts[assignment[0].1 * k + assignment[1].1] += 1;
    }
    for a in 0..k {
        for b in 0..k {
            let event = AssignmentIndex::from_pairs(&[(2, a), (0, b)]).unwrap();
            let p = m.moment(&event).unwrap();
            let freq = counts[a * k + b] as f64 / trials as f64;
            let se = (p * (1.0 - p) / trials as f64).sqrt();
            if se == 0.0 {
                assert_eq!(freq, p);
            } else {
                assert!((freq - p).abs() <= 3.0 * se, "({a},{b}): {freq} vs {p}");
            }
        }
    }
}

#[test]
fn independent_rounding_expectation() {
    let spec = generate(ProblemKind::TwoCsp, &Family::Gnp { n: 4, p: 0.7 }, Some(3), 5).unwrap();
    let inst = encode(&spec).unwrap();
    let relax = build_sdp(&inst, 2).unwrap();
    let sol = solve(&relax.sdp, &SolverSettings::default()).unwrap();
    let m = relax.moments(&sol).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (assignment, cond) = sample_seed_assignment(&m, &[1], 1e-8, &mut rng).unwrap();
    let table = ConditionalTable::from_moments(&cond, assignment).unwrap();
    let expected = expected_value_independent(&table, &inst).unwrap();
    let (mean_exact, var_exact) = product_moments(&table, &inst);
    assert!((expected - mean_exact).abs() < 1e-12);
    let trials = 10_000;
    let mean = (0..trials)
        .map(|_| inst.objective(&round_independent(&table, &mut rng)))
        .sum::<f64>()
        / trials as f64;
    let se = (var_exact / trials as f64).sqrt();
    assert!((mean - expected).abs() <= 3.0 * se + 1e-12, "{mean} vs {expected} (se {se})");
}

/// Mean and variance of the objective under the product of the table's
/// marginals, by enumerating the labels of each pair of terms' joint scope.
fn product_moments(table: &ConditionalTable, inst: &LabelingInstance) -> (f64, f64) {
    let k = table.k;
    let dists: Vec<Vec<f64>> = (0..table.n).map(|v| table.distribution(v)).collect();
    let expect = |vars: &[usize], f: &dyn Fn(&[usize]) -> f64| {
        let mut labels = vec![0usize; table.n];
        let mut total = 0.0;
        for code in 0..k.pow(vars.len() as u32) {
            let mut p = 1.0;
            for (i, &v) in vars.iter().enumerate() {
                labels[v] = code / k.pow(i as u32) % k;
                p *= dists[v][labels[v]];
            }
            total += p * f(&labels);
        }
        total
    };
    let value = |t: &Term, labels: &[usize]| t.weight * t.value(labels, k);
    let mean: f64 = inst.terms.iter().map(|t| expect(&t.scope, &|x| value(t, x))).sum();
    let mut second = 0.0;
    for a in &inst.terms {
        for b in &inst.terms {
            let mut vars = a.scope.clone();
            vars.extend(&b.scope);
            vars.sort_unstable();
            vars.dedup();
            second += expect(&vars, &|x| value(a, x) * value(b, x));
        }
    }
    (mean, (second - mean * mean).max(0.0))
}

#[test]
fn threshold_sweep_dominates_half() {
    for seed in 0..5 {
        let fam = Family::PlantedBisection { n: 8, p_in: 0.7, p_out: 0.2 };
        let spec = generate(ProblemKind::MinBisection, &fam, None, seed).unwrap();
        let relax = build_sdp(&encode(&spec).unwrap(), 2).unwrap();
        let sol = solve(&relax.sdp, &SolverSettings::default()).unwrap();
        let m = relax.moments(&sol).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..20 {
            let (assignment, cond) = sample_seed_assignment(&m, &[0], 1e-8, &mut rng).unwrap();
            let table = ConditionalTable::from_moments(&cond, assignment).unwrap();
            let best = round_once(&spec, &table, RoundingMode::Threshold, 0, &mut rng).unwrap();
            let half = round_threshold(&table, 0.5, 1).unwrap();
            let half_value = evaluate(&spec, &repair(&spec, &half)).value;
            assert!(best.repaired_feasible);
            assert!(best.repaired_objective <= half_value, "{} > {half_value}", best.repaired_objective);
        }
    }
}

#[test]
fn rounding_never_beats_the_relaxation() {
    for seed in 0..4 {
        let fam = Family::Gnp { n: 6, p: 0.5 };
        for kind in [ProblemKind::MinBisection, ProblemKind::CapacityCutPacking, ProblemKind::SparsestCut] {
            let spec = generate(kind, &fam, None, seed).unwrap();
            let mut config = PipelineConfig::new(2);
            config.trials = 30;
            config.master_seed = seed;
            let out = run_pipeline(&spec, "g", &config).unwrap();
            let rec = &out.records[0];
            assert!(rec.converged, "{kind} seed {seed}");
            let sdp = rec.sdp_value.unwrap();
            for mode in &rec.modes {
                if let Some(best) = mode.best_post_repair {
                    assert!(best >= sdp - 1e-4, "{kind} seed {seed}: {best} < {sdp}");
                }
            }
        }
    }
}

#[test]
fn records_independent_of_thread_count() {
    let spec = generate(ProblemKind::MaxCut, &Family::Gnp { n: 6, p: 0.5 }, None, 9).unwrap();
    let mut config = PipelineConfig::new(2);
    config.trials = 64;
    config.master_seed = 77;
    config.strategies = SeedStrategy::ALL.to_vec();
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| run_pipeline(&spec, "g", &config).unwrap())
            .records
            .iter()
            .map(|r| r.to_json())
            .collect::<Vec<_>>()
    };
    assert_eq!(run(1), run(4));
}
